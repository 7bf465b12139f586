"""Random laminations of the disk built by throwing inscribed k-gons.

Points on the unit circle are stored as fractions of a turn in ``[0, 1)``.
The live fragments partition the circle into arcs: ``pts`` holds the sorted
split points and ``owner[j]`` is the fragment owning the arc from
``pts[j]`` to the next point (the last arc wraps through 0). A new polygon
is accepted iff all its vertices land in arcs of one fragment, which is the
same as being disjoint from every polygon already in place.
"""
from dataclasses import dataclass, field

import numpy as np

from ._jit import I64, njit
from .rng import bounded, draw, stream_key_u64, uniform01

ROOT = 0


class Collision(ValueError):
    """A sampled point coincides with an existing split point."""


def polygons_disjoint(a, b):
    """True iff the inscribed polygons with vertex sets ``a`` and ``b`` are disjoint.

    Two inscribed polygons are disjoint exactly when all vertices of one lie
    in a single circular gap between consecutive vertices of the other.
    """
    a = np.sort(np.asarray(a, dtype=float) % 1.0)
    b = np.asarray(b, dtype=float) % 1.0
    if len(a) < 2 or len(b) < 2:
        raise ValueError("polygons need at least two vertices")
    if np.intersect1d(a, b).size or np.unique(a).size < a.size or np.unique(b).size < b.size:
        raise ValueError("degenerate configuration: repeated point")
    gaps = np.searchsorted(a, b) % len(a)
    return bool(np.all(gaps == gaps[0]))


# -- kernels ---------------------------------------------------------------

@njit
def _locate(pts, npts, owner, p):
    """Owning fragment of ``p`` or -1 if ``p`` is a split point."""
    if npts == 0:
        return ROOT
    j = np.searchsorted(pts[:npts], p, side="right") - 1
    if j >= 0 and pts[j] == p:
        return -1
    if j < 0:
        j = npts - 1
    return owner[j]


@njit
def _insert(pts, owner, npts, p):
    pos = np.searchsorted(pts[:npts], p)
    if npts == 0:
        o = ROOT
    elif pos == 0:
        o = owner[npts - 1]
    else:
        o = owner[pos - 1]
    for j in range(npts, pos, -1):
        pts[j] = pts[j - 1]
        owner[j] = owner[j - 1]
    pts[pos] = p
    owner[pos] = o
    return npts + 1


@njit
def _split(pts, owner, npts, frag, verts, perm, base, label):
    """Insert sorted ``verts`` inside fragment ``frag``; children get ids
    ``base + perm[g]`` for the gap ``g`` after vertex ``g``. Returns npts."""
    k = verts.shape[0]
    for g in range(k):
        npts = _insert(pts, owner, npts, verts[g])
    pos = np.empty(k, np.int64)
    for g in range(k):
        pos[g] = np.searchsorted(pts[:npts], verts[g])
    for g in range(k):
        cid = base + perm[g]
        end = pos[(g + 1) % k]
        j = pos[g]
        ends = 0
        while True:
            if owner[j] == frag:
                owner[j] = cid
                ends += 1
            j += 1
            if j == npts:
                j = 0
            if j == end:
                break
        label[cid] = ends
    return npts


@njit
def _construct(k, throws, key):
    cap_pts = k * throws + 1
    cap_frag = k * throws + 1
    pts = np.zeros(cap_pts)
    owner = np.zeros(cap_pts, np.int64)
    parent = np.full(cap_frag, -1, np.int64)
    child_index = np.full(cap_frag, -1, np.int64)
    label = np.zeros(cap_frag, np.int64)
    depth = np.zeros(cap_frag, np.int64)
    born = np.zeros(cap_frag, np.int64)
    accept_log = np.zeros(throws, np.int8)
    polys = np.zeros((throws, k))
    split_parent = np.zeros(throws, np.int64)
    npts = 0
    nfrag = 1
    nacc = 0
    collisions = 0
    counter = 0
    verts = np.empty(k)
    perm = np.empty(k, np.int64)
    for t in range(throws):
        while True:
            for i in range(k):
                verts[i] = uniform01(draw(key, counter))
                counter += 1
            verts.sort()
            bad = False
            for i in range(1, k):
                if verts[i] == verts[i - 1]:
                    bad = True
            frag = _locate(pts, npts, owner, verts[0])
            if frag < 0:
                bad = True
            if not bad:
                break
            collisions += 1
        same = True
        for i in range(1, k):
            f = _locate(pts, npts, owner, verts[i])
            if f < 0:
                # collision on a later vertex: the polygon cannot fit anyway
                collisions += 1
                same = False
                break
            if f != frag:
                same = False
                break
        if not same:
            continue
        # uniform child order (Fisher-Yates)
        for i in range(k):
            perm[i] = i
        for i in range(k - 1, 0, -1):
            j = I64(bounded(draw(key, counter), i + 1))
            counter += 1
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
        base = nfrag
        npts = _split(pts, owner, npts, frag, verts, perm, base, label)
        for c in range(k):
            parent[base + c] = frag
            child_index[base + c] = c
            depth[base + c] = depth[frag] + 1
            born[base + c] = t + 1
        nfrag += k
        accept_log[t] = 1
        for i in range(k):
            polys[nacc, i] = verts[i]
        split_parent[nacc] = frag
        nacc += 1
    return (pts[:npts].copy(), owner[:npts].copy(), parent[:nfrag].copy(),
            child_index[:nfrag].copy(), label[:nfrag].copy(), depth[:nfrag].copy(),
            born[:nfrag].copy(), accept_log, polys[:nacc].copy(),
            split_parent[:nacc].copy(), collisions)


# -- Python-facing structure ----------------------------------------------

@dataclass
class Split:
    parent: int
    children: tuple  # fragment ids in child-index order
    labels: tuple    # end counts in child-index order


@dataclass
class Rejected:
    fragments: tuple  # owners of the polygon's vertices


@dataclass
class Lamination:
    k: int
    seed: int = 0
    pts: np.ndarray = field(default_factory=lambda: np.zeros(0))
    owner: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    parent: np.ndarray = field(default_factory=lambda: np.full(1, -1, np.int64))
    child_index: np.ndarray = field(default_factory=lambda: np.full(1, -1, np.int64))
    label: np.ndarray = field(default_factory=lambda: np.zeros(1, np.int64))
    depth: np.ndarray = field(default_factory=lambda: np.zeros(1, np.int64))
    born: np.ndarray = field(default_factory=lambda: np.zeros(1, np.int64))
    accept_log: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int8))
    polygons: np.ndarray = None
    split_parent: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    collisions: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.polygons is None:
            self.polygons = np.zeros((0, self.k))

    @property
    def throws(self):
        return int(self.accept_log.size)

    @property
    def accepted(self):
        return int(self.polygons.shape[0])

    @property
    def n_fragments(self):
        return int(self.parent.size)

    def live(self):
        """Ids of fragments that have not been split."""
        split = np.zeros(self.n_fragments, bool)
        split[self.split_parent] = True
        return np.flatnonzero(~split)

    def arcs(self, frag):
        """Arcs ``(start, end)`` of a live fragment, counterclockwise from 0.

        An arc crossing 0 has ``end > 1``. The root of an empty lamination
        owns the whole circle, returned as ``[(0.0, 1.0)]``.
        """
        n = self.pts.size
        if n == 0:
            return [(0.0, 1.0)] if frag == ROOT else []
        out = []
        for j in np.flatnonzero(self.owner == frag):
            start = self.pts[j]
            end = self.pts[j + 1] if j + 1 < n else self.pts[0] + 1.0
            out.append((float(start), float(end)))
        return out

    def children(self, frag):
        ids = np.flatnonzero(self.parent == frag)
        return tuple(int(i) for i in ids[np.argsort(self.child_index[ids])])

    def address(self, frag):
        digits = []
        while self.parent[frag] >= 0:
            digits.append(_DIGITS[self.child_index[frag]])
            frag = self.parent[frag]
        return "".join(reversed(digits)) or "-"

    def splits(self):
        """Parent labels and child-label rows, one per accepted polygon."""
        base = 1 + self.k * np.arange(self.accepted)
        kids = base[:, None] + np.arange(self.k)[None, :]
        return self.label[self.split_parent], self.label[kids]

    def genealogy_lines(self):
        """``address<TAB>label<TAB>throw`` lines, depth first, lexicographic."""
        kids = {}
        for i in range(1, self.n_fragments):
            kids.setdefault(int(self.parent[i]), []).append(i)
        for v in kids.values():
            v.sort(key=lambda i: self.child_index[i])
        lines = []
        stack = [(ROOT, "-")]
        while stack:
            frag, addr = stack.pop()
            lines.append(f"{addr}\t{self.label[frag]}\t{self.born[frag]}")
            prefix = "" if addr == "-" else addr
            for c in reversed(kids.get(frag, [])):
                stack.append((c, prefix + _DIGITS[self.child_index[c]]))
        return lines


_DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"


def locate(lam, p):
    """Id of the live fragment whose arcs contain the circle point ``p``."""
    f = _locate(lam.pts, lam.pts.size, lam.owner, float(p) % 1.0)
    if f < 0:
        raise Collision(f"{p!r} is a split point")
    return int(f)


def throw_polygon(lam, pts, rng=None, order=None):
    """Try to add the polygon with vertices ``pts``; mutates ``lam``.

    Returns :class:`Split` when every vertex falls in the same fragment and
    :class:`Rejected` otherwise. Children are numbered by a uniformly random
    permutation of the gaps (``order[g]`` is the child index of the gap
    following the ``g``-th smallest vertex); pass ``order`` to fix it.
    """
    k = lam.k
    verts = np.sort(np.asarray(pts, dtype=float) % 1.0)
    if verts.size != k:
        raise ValueError(f"expected {k} points, got {verts.size}")
    if np.unique(verts).size < k:
        raise Collision("repeated vertex")
    owners = tuple(locate(lam, p) for p in verts)
    lam.accept_log = np.append(lam.accept_log, np.int8(0))
    if any(o != owners[0] for o in owners):
        return Rejected(owners)
    if order is None:
        rng = rng if rng is not None else np.random.default_rng()
        order = rng.permutation(k)
    perm = np.asarray(order, dtype=np.int64)
    frag = owners[0]
    base = lam.n_fragments
    n = lam.pts.size
    pts_buf = np.concatenate([lam.pts, np.zeros(k)])
    own_buf = np.concatenate([lam.owner, np.zeros(k, np.int64)])
    label = np.concatenate([lam.label, np.zeros(k, np.int64)])
    _split(pts_buf, own_buf, n, frag, verts, perm, base, label)
    lam.pts, lam.owner, lam.label = pts_buf, own_buf, label
    lam.parent = np.concatenate([lam.parent, np.full(k, frag, np.int64)])
    lam.child_index = np.concatenate([lam.child_index, np.arange(k, dtype=np.int64)])
    lam.depth = np.concatenate([lam.depth, np.full(k, lam.depth[frag] + 1, np.int64)])
    lam.born = np.concatenate([lam.born, np.full(k, lam.throws, np.int64)])
    lam.accept_log[-1] = 1
    lam.polygons = np.vstack([lam.polygons, verts[None, :]])
    lam.split_parent = np.append(lam.split_parent, np.int64(frag))
    children = tuple(range(base, base + k))
    return Split(frag, children, tuple(int(label[c]) for c in children))


def run_construction(k, throws, seed):
    """Throw ``throws`` uniform k-gons; deterministic in ``(k, throws, seed)``."""
    if k < 2 or throws < 0:
        raise ValueError("need k >= 2 and throws >= 0")
    out = _construct(k, throws, stream_key_u64(seed, 0))
    (pts, owner, parent, child_index, label, depth, born,
     log, polys, split_parent, collisions) = out
    return Lamination(k, seed, pts, owner, parent, child_index, label, depth, born,
                      log, polys, split_parent, int(collisions))


def construction_splits(k, throws, key):
    """Raw ``(parent_labels, child_label_rows)`` of one run keyed by ``key``."""
    out = _construct(k, throws, np.uint64(key))
    label, polys, split_parent = out[4], out[8], out[9]
    nacc = polys.shape[0]
    base = 1 + k * np.arange(nacc)
    rows = label[base[:, None] + np.arange(k)[None, :]]
    return label[split_parent], rows


# -- accepted-polygon chain ------------------------------------------------
#
# Rejected throws leave the lamination unchanged, so the sequence of accepted
# polygons is itself a Markov chain: the next polygon falls in fragment F
# with probability proportional to |F|^k (|F| = total arc length) and its
# vertices are i.i.d. uniform on F's arcs. Sampling this chain directly is
# exact and avoids the vanishing acceptance rate of long runs. Fragments
# keep their own arc lists here, independent of the circle partition above.

@njit
def _fenwick_add(tree, i, w):
    n = tree.shape[0]
    i += 1
    while i <= n:
        tree[i - 1] += w
        i += i & (-i)


@njit
def _fenwick_find(tree, target):
    n = tree.shape[0]
    pos = 0
    step = 1
    while step * 2 <= n:
        step *= 2
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt - 1] <= target:
            pos = nxt
            target -= tree[nxt - 1]
        step //= 2
    return pos


@njit
def _fenwick_build(weights, n):
    tree = np.zeros(weights.shape[0])
    for i in range(n):
        _fenwick_add(tree, i, weights[i])
    return tree


@njit
def _embedded_chain(k, nsplits, key, rebuild_every):
    cap_frag = 1 + k * nsplits
    label = np.zeros(cap_frag, np.int64)
    off = np.zeros(cap_frag, np.int64)
    cnt = np.zeros(cap_frag, np.int64)
    length = np.zeros(cap_frag)
    weight = np.zeros(cap_frag)
    cap_arc = 64 + (k + 8) * nsplits
    a_start = np.zeros(cap_arc)
    a_len = np.zeros(cap_arc)
    a_start[0] = 0.0
    a_len[0] = 1.0
    cnt[0] = 1
    length[0] = 1.0
    weight[0] = 1.0
    narc = 1
    nfrag = 1
    tree = _fenwick_build(weight, nfrag)
    parent_label = np.zeros(nsplits, np.int64)
    rows = np.zeros((nsplits, k), np.int64)
    coords = np.empty(k)
    idx = np.empty(k, np.int64)
    offs = np.empty(k)
    perm = np.empty(k, np.int64)
    counter = 0
    s = 0
    while s < nsplits:
        if s % rebuild_every == 0:
            tree = _fenwick_build(weight, nfrag)
        total = _fenwick_total(tree, nfrag)
        f = _fenwick_find(tree, uniform01(draw(key, counter)) * total)
        counter += 1
        if f >= nfrag or weight[f] == 0.0:
            continue
        L = length[f]
        for i in range(k):
            coords[i] = uniform01(draw(key, counter)) * L
            counter += 1
        coords.sort()
        ok = True
        for i in range(k):
            c = coords[i]
            j = 0
            while j < cnt[f] - 1 and c >= a_len[off[f] + j]:
                c -= a_len[off[f] + j]
                j += 1
            idx[i] = j
            offs[i] = c
            if c <= 0.0 or c >= a_len[off[f] + j]:
                ok = False
            if i > 0 and idx[i] == idx[i - 1] and offs[i] <= offs[i - 1]:
                ok = False
        if not ok:
            continue
        for i in range(k):
            perm[i] = i
        for i in range(k - 1, 0, -1):
            j = I64(bounded(draw(key, counter), i + 1))
            counter += 1
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
        need = narc + cnt[f] + 2 * k
        if need > cap_arc:
            cap_arc = 2 * need
            ns = np.zeros(cap_arc)
            nl = np.zeros(cap_arc)
            ns[:narc] = a_start[:narc]
            nl[:narc] = a_len[:narc]
            a_start = ns
            a_len = nl
        m = cnt[f]
        o = off[f]
        is_root = label[f] == 0 and f == 0
        for g in range(k):
            cid = nfrag + perm[g]
            off[cid] = narc
            i0 = idx[g]
            s0 = a_start[o + i0] + offs[g]
            if g < k - 1:
                i1 = idx[g + 1]
                if i1 == i0:
                    a_start[narc] = s0 % 1.0
                    a_len[narc] = offs[g + 1] - offs[g]
                    narc += 1
                else:
                    a_start[narc] = s0 % 1.0
                    a_len[narc] = a_len[o + i0] - offs[g]
                    narc += 1
                    for j in range(i0 + 1, i1):
                        a_start[narc] = a_start[o + j]
                        a_len[narc] = a_len[o + j]
                        narc += 1
                    a_start[narc] = a_start[o + i1]
                    a_len[narc] = offs[g + 1]
                    narc += 1
            else:
                i1 = idx[0]
                if is_root:
                    a_start[narc] = s0 % 1.0
                    a_len[narc] = (a_len[o] - offs[g]) + offs[0]
                    narc += 1
                else:
                    a_start[narc] = s0 % 1.0
                    a_len[narc] = a_len[o + i0] - offs[g]
                    narc += 1
                    for j in range(i0 + 1, m):
                        a_start[narc] = a_start[o + j]
                        a_len[narc] = a_len[o + j]
                        narc += 1
                    for j in range(0, i1):
                        a_start[narc] = a_start[o + j]
                        a_len[narc] = a_len[o + j]
                        narc += 1
                    a_start[narc] = a_start[o + i1]
                    a_len[narc] = offs[0]
                    narc += 1
            cnt[cid] = narc - off[cid]
            tot = 0.0
            for j in range(off[cid], narc):
                tot += a_len[j]
            length[cid] = tot
            label[cid] = cnt[cid]
        parent_label[s] = label[f]
        for c in range(k):
            rows[s, c] = label[nfrag + c]
        _fenwick_add(tree, f, -weight[f])
        weight[f] = 0.0
        for c in range(k):
            w = length[nfrag + c] ** k
            weight[nfrag + c] = w
            _fenwick_add(tree, nfrag + c, w)
        nfrag += k
        s += 1
    return parent_label, rows


@njit
def _fenwick_total(tree, n):
    total = 0.0
    i = n
    while i > 0:
        total += tree[i - 1]
        i -= i & (-i)
    return total


def accepted_chain_splits(k, nsplits, key, rebuild_every=1024):
    """``(parent_labels, child_label_rows)`` of the first ``nsplits`` accepted
    polygons, sampled directly from the accepted-polygon chain."""
    return _embedded_chain(k, nsplits, np.uint64(key), rebuild_every)
