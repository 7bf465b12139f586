import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import chi2_sf
from lamqsd.geometry import (ROOT, Collision, Lamination, Rejected, Split,
                             accepted_chain_splits, construction_splits, locate,
                             polygons_disjoint, run_construction, throw_polygon)
from lamqsd.oracles import cartesian_polygons_intersect, side_signature
from lamqsd.rng import stream_key_u64


# -- disjointness ------------------------------------------------------------

def test_disjoint_examples():
    assert not polygons_disjoint([0.10, 0.40], [0.20, 0.60])
    assert polygons_disjoint([0.10, 0.20], [0.30, 0.40])
    assert polygons_disjoint([0.05, 0.35, 0.70], [0.40, 0.50, 0.60])
    assert not polygons_disjoint([0.05, 0.45, 0.70], [0.40, 0.50, 0.60])


def test_disjoint_examples_match_cartesian_oracle():
    cases = [([0.10, 0.40], [0.20, 0.60]), ([0.10, 0.20], [0.30, 0.40]),
             ([0.05, 0.35, 0.70], [0.40, 0.50, 0.60]),
             ([0.05, 0.45, 0.70], [0.40, 0.50, 0.60])]
    for a, b in cases:
        assert polygons_disjoint(a, b) != cartesian_polygons_intersect(a, b)


def test_disjoint_rejects_shared_point():
    with pytest.raises(ValueError):
        polygons_disjoint([0.1, 0.4], [0.4, 0.6])


def test_disjoint_is_symmetric_and_agrees_with_oracle():
    rng = np.random.default_rng(31)
    for _ in range(3000):
        j, k = rng.integers(2, 5, size=2)
        a, b = rng.random(j), rng.random(k)
        d = polygons_disjoint(a, b)
        assert d == polygons_disjoint(b, a)
        assert d != cartesian_polygons_intersect(a, b)


@given(st.lists(st.floats(0, 1, exclude_max=True), min_size=2, max_size=5, unique=True),
       st.floats(0, 1, exclude_max=True))
@settings(max_examples=200, deadline=None)
def test_disjoint_invariant_under_rotation(pts, shift):
    a, b = np.array(pts[:len(pts) // 2 + 1]), np.array(pts[len(pts) // 2 + 1:])
    if b.size < 2 or a.size < 2:
        return
    ra, rb = (a + shift) % 1.0, (b + shift) % 1.0
    if np.unique(np.concatenate([ra, rb])).size < a.size + b.size:
        return
    assert polygons_disjoint(a, b) == polygons_disjoint(ra, rb)


# -- locate / throw ----------------------------------------------------------

def test_locate_examples():
    lam = Lamination(2)
    assert locate(lam, 0.5) == ROOT
    out = throw_polygon(lam, [0.2, 0.7], order=[0, 1])
    assert isinstance(out, Split) and out.labels == (1, 1)
    inner, outer = locate(lam, 0.5), locate(lam, 0.9)
    assert inner != outer and {inner, outer} == set(out.children)
    assert locate(lam, 0.1) == outer
    assert lam.arcs(inner) == [(0.2, 0.7)]
    with pytest.raises(Collision):
        locate(lam, 0.2)


def _signature_table(lam):
    table = {}
    for f in lam.live():
        s, e = lam.arcs(f)[0]
        table[side_signature(lam.polygons, ((s + e) / 2) % 1.0)] = int(f)
    return table


def test_locate_agrees_with_half_plane_oracle_after_seven_chords():
    rng = np.random.default_rng(7)
    lam = Lamination(2)
    while lam.accepted < 7:
        throw_polygon(lam, rng.random(2), rng)
    table = _signature_table(lam)
    assert len(table) == 8
    for p in rng.random(1000):
        assert table[side_signature(lam.polygons, p)] == locate(lam, p)


def test_throw_root_chord_labels():
    rng = np.random.default_rng(1)
    for _ in range(20):
        lam = Lamination(2)
        assert throw_polygon(lam, rng.random(2), rng).labels == (1, 1)


def test_throw_one_end_fragment():
    lam = Lamination(2)
    first = throw_polygon(lam, [0.2, 0.7], order=[0, 1])
    inner = locate(lam, 0.5)
    rng = np.random.default_rng(2)
    seen = set()
    for _ in range(30):
        trial = Lamination(2)
        throw_polygon(trial, [0.2, 0.7], order=[0, 1])
        out = throw_polygon(trial, rng.uniform(0.25, 0.65, 2), rng)
        assert out.parent == inner
        seen.add(out.labels)
    assert first.labels == (1, 1)
    assert seen == {(1, 2), (2, 1)}


def test_throw_rejects_crossing_polygon():
    lam = Lamination(2)
    throw_polygon(lam, [0.2, 0.7], order=[0, 1])
    before = (lam.pts.copy(), lam.n_fragments)
    out = throw_polygon(lam, [0.1, 0.5])
    assert isinstance(out, Rejected)
    assert lam.throws == 2 and lam.accepted == 1
    assert np.array_equal(lam.pts, before[0]) and lam.n_fragments == before[1]


def test_throw_collisions_raise():
    lam = Lamination(3)
    with pytest.raises(Collision):
        throw_polygon(lam, [0.1, 0.1, 0.5])
    throw_polygon(lam, [0.1, 0.3, 0.5])
    with pytest.raises(Collision):
        throw_polygon(lam, [0.3, 0.6, 0.8])
    with pytest.raises(ValueError):
        throw_polygon(lam, [0.6, 0.8])


def _check_invariants(lam):
    live = lam.live()
    total = sum(e - s for f in live for s, e in lam.arcs(f))
    assert abs(total - 1.0) < 1e-12
    for f in live:
        if f != ROOT:
            assert lam.label[f] == len(lam.arcs(f))
    plab, rows = lam.splits()
    assert np.array_equal(rows.sum(axis=1) - lam.k, plab)
    assert lam.accepted <= lam.throws


@given(st.integers(2, 4), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_replayed_construction_invariants(k, seed):
    rng = np.random.default_rng(seed)
    lam = Lamination(k)
    for _ in range(150):
        out = throw_polygon(lam, rng.random(k), rng)
        if isinstance(out, Split):
            for c in out.children:
                assert lam.label[c] == len(lam.arcs(c))
                assert lam.depth[c] == lam.depth[out.parent] + 1
    _check_invariants(lam)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_run_construction_invariants(k):
    lam = run_construction(k, 3000, 5)
    _check_invariants(lam)
    assert lam.accept_log.sum() == lam.accepted
    assert lam.polygons.shape == (lam.accepted, k)
    for i in range(lam.accepted):
        for j in range(i):
            assert polygons_disjoint(lam.polygons[i], lam.polygons[j])


def test_run_construction_small_cases():
    lam = run_construction(2, 0, 3)
    assert lam.n_fragments == 1 and lam.label[ROOT] == 0 and lam.accepted == 0
    assert lam.genealogy_lines() == ["-\t0\t0"]
    lam = run_construction(2, 1, 3)
    assert lam.accepted == 1 and list(lam.label[1:]) == [1, 1]


def test_run_construction_deterministic():
    a, b = run_construction(3, 2000, 11), run_construction(3, 2000, 11)
    assert np.array_equal(a.pts, b.pts) and np.array_equal(a.label, b.label)
    assert a.genealogy_lines() == b.genealogy_lines()
    c = run_construction(3, 2000, 12)
    assert not np.array_equal(a.pts[:3], c.pts[:3])


def test_accepted_count_bracket_k2():
    # bracket frozen from a 100-seed pilot (range 160..202) cross-checked by an
    # independent rejection loop over throw_polygon
    for seed in range(5):
        assert 120 <= run_construction(2, 10_000, seed).accepted <= 260


def test_genealogy_export_order():
    lam = Lamination(2)
    # the arc (0.2, 0.7) becomes child 1; the second chord splits it
    throw_polygon(lam, [0.2, 0.7], order=[1, 0])
    throw_polygon(lam, [0.3, 0.4], order=[0, 1])
    lines = lam.genealogy_lines()
    addrs = [ln.split("\t")[0] for ln in lines]
    assert addrs == ["-", "0", "1", "10", "11"]
    labels = {ln.split("\t")[0]: int(ln.split("\t")[1]) for ln in lines}
    assert labels["-"] == 0 and labels["0"] == 1 and labels["1"] == 1
    assert sorted([labels["10"], labels["11"]]) == [1, 2]
    assert [int(ln.split("\t")[2]) for ln in lines] == [0, 1, 1, 2, 2]


def test_child_order_uniform_k3():
    counts = {}
    rng = np.random.default_rng(9)
    for _ in range(6000):
        lam = Lamination(3)
        throw_polygon(lam, [0.1, 0.4, 0.8], rng)
        key = tuple(int(lam.child_index[locate(lam, p)]) for p in (0.2, 0.6, 0.9))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    c = np.array(list(counts.values()), float)
    stat = ((c - 1000) ** 2 / 1000).sum()
    assert chi2_sf(stat, 5) > 0.001


# -- accepted-polygon chain vs rejection construction ------------------------

def _parent_label_table(source, k, runs, splits, throws):
    table = np.zeros((splits, 12))
    for r in range(runs):
        key = stream_key_u64(777 if source == "chain" else 778, r)
        if source == "chain":
            plab, _ = accepted_chain_splits(k, splits, key)
        else:
            plab, _ = construction_splits(k, throws, key)
        assert plab.size >= splits
        for j in range(splits):
            table[j, min(plab[j], 11)] += 1
    return table


@pytest.mark.parametrize("k,throws", [(2, 400), (3, 4000)])
def test_chain_matches_rejection_construction(k, throws):
    """The law of the parent labels of the first splits agrees (chi-square)."""
    splits, runs = 6, 3000
    a = _parent_label_table("chain", k, runs, splits, throws)
    b = _parent_label_table("rejection", k, runs, splits, throws)
    stat, df = 0.0, 0
    for j in range(1, splits):
        cols = (a[j] + b[j]) > 0
        tab = np.vstack([a[j][cols], b[j][cols]])
        exp = tab.sum(axis=1, keepdims=True) * tab.sum(axis=0) / tab.sum()
        stat += ((tab - exp) ** 2 / exp).sum()
        df += cols.sum() - 1
    assert chi2_sf(stat, df) > 0.001


def test_chain_split_rows_are_compositions():
    plab, rows = accepted_chain_splits(3, 5000, stream_key_u64(1, 0))
    assert np.array_equal(rows.sum(axis=1), plab + 3)
    assert plab[0] == 0 and np.all(rows >= 1)
