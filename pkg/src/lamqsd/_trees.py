"""Pruned-tree kernels for counting good paths.

A sample is the labelled k-ary tree grown from a root label, with every node
whose label falls below the threshold removed together with its subtree.
Randomness is attached to nodes (see :mod:`lamqsd.rng`), so the depth-first
numba kernel and the level-by-level numpy kernel visit the same tree.
"""
import numpy as np

from . import rng as _rng
from ._jit import I64, USE_NUMBA, njit, prange
from .rng import bounded, child_key, draw, stream_key, stream_key_u64


@njit(inline="always")
def composition_labels(key, m, k, bars, out):
    """Fill ``out`` with child labels ``1 + m_i`` for a uniform composition.

    The composition of ``m`` into ``k`` parts is read off a uniform
    ``(k-1)``-subset of ``m + k - 1`` bar positions drawn with Floyd's
    algorithm. ``bars`` is scratch space of length ``k - 1``.
    """
    s = k - 1
    npos = m + k - 1
    for t in range(s):
        j = npos - s + t
        r = I64(bounded(draw(key, t), j + 1))
        for q in range(t):
            if bars[q] == r:
                r = j
                break
        bars[t] = r
    for t in range(1, s):
        v = bars[t]
        q = t - 1
        while q >= 0 and bars[q] > v:
            bars[q + 1] = bars[q]
            q -= 1
        bars[q + 1] = v
    prev = -1
    for t in range(s):
        out[t] = bars[t] - prev
        prev = bars[t]
    out[s] = npos - prev


@njit
def dfs_count(k, a, x0, n, budget, key):
    """Depth-first count of depth-``n`` nodes; returns (count, nodes, truncated)."""
    if x0 < a:
        return 0, 0, False
    cap = n * (k - 1) + 2
    labels = np.empty(cap, np.int64)
    depths = np.empty(cap, np.int64)
    keys = np.empty(cap, np.uint64)
    bars = np.empty(max(k - 1, 1), np.int64)
    kids = np.empty(k, np.int64)
    labels[0] = x0
    depths[0] = 0
    keys[0] = key
    top = 1
    count = 0
    nodes = 0
    while top > 0:
        top -= 1
        lab = labels[top]
        dep = depths[top]
        nkey = keys[top]
        nodes += 1
        if nodes > budget:
            return count, nodes - 1, True
        if dep == n:
            count += 1
            continue
        composition_labels(nkey, lab, k, bars, kids)
        # push in reverse so children pop in index order (preorder)
        for c in range(k - 1, -1, -1):
            if kids[c] >= a:
                labels[top] = kids[c]
                depths[top] = dep + 1
                keys[top] = child_key(nkey, c)
                top += 1
    return count, nodes, False


@njit(parallel=True)
def _batch_numba(k, a, x0, n, budget, seed, start, samples):
    counts = np.zeros(samples, np.int64)
    nodes = np.zeros(samples, np.int64)
    trunc = np.zeros(samples, np.bool_)
    for i in prange(samples):
        c, w, t = dfs_count(k, a, x0, n, budget, stream_key(seed, start + i))
        counts[i] = c
        nodes[i] = w
        trunc[i] = t
    return counts, nodes, trunc


def composition_labels_np(keys, m, k):
    """Vectorised :func:`composition_labels`; returns an ``(len(keys), k)`` array."""
    size = keys.shape[0]
    s = k - 1
    npos = m.astype(np.int64) + s
    bars = np.empty((size, max(s, 1)), np.int64)
    for t in range(s):
        j = npos - s + t
        r = _rng.bounded_np(_rng.draw_np(keys, t), j + 1).astype(np.int64)
        if t:
            hit = (bars[:, :t] == r[:, None]).any(axis=1)
            r = np.where(hit, j, r)
        bars[:, t] = r
    out = np.empty((size, k), np.int64)
    if s == 0:
        out[:, 0] = npos + 1
        return out
    bars = np.sort(bars[:, :s], axis=1)
    out[:, 0] = bars[:, 0] + 1
    out[:, 1:s] = np.diff(bars, axis=1)
    out[:, s] = npos - bars[:, -1]
    return out


# frontier entries per chunk before heavy samples are handed to the scalar path
_FRONTIER_CAP = 1 << 22


def _batch_numpy(k, a, x0, n, budget, seed, start, samples):
    counts = np.zeros(samples, np.int64)
    nodes = np.zeros(samples, np.int64)
    trunc = np.zeros(samples, np.bool_)
    if x0 < a:
        return counts, nodes, trunc
    sid = np.arange(samples, dtype=np.int64)
    keys = _rng.stream_key_np(seed, sid + start)
    labels = np.full(samples, x0, np.int64)
    heavy = np.zeros(samples, np.bool_)
    for depth in range(n + 1):
        nodes += np.bincount(sid, minlength=samples)
        over = nodes > budget
        live = sid.size
        if live > _FRONTIER_CAP:
            per = np.bincount(sid, minlength=samples)
            over |= per > max(1, _FRONTIER_CAP // max(1, np.count_nonzero(per)))
        if over.any():
            heavy |= over
            keep = ~heavy[sid]
            sid, keys, labels = sid[keep], keys[keep], labels[keep]
        if depth == n or sid.size == 0:
            break
        kids = composition_labels_np(keys, labels, k)
        ckeys = np.stack([_rng.child_key_np(keys, c) for c in range(k)], axis=1)
        alive = kids >= a
        sid = np.repeat(sid, k).reshape(-1, k)[alive]
        keys = ckeys[alive]
        labels = kids[alive]
    counts += np.bincount(sid, minlength=samples)
    for i in np.flatnonzero(heavy):
        c, w, t = _dfs_scalar(k, a, x0, n, budget, stream_key_u64(seed, start + int(i)))
        counts[i], nodes[i], trunc[i] = c, w, t
    return counts, nodes, trunc


_dfs_scalar = dfs_count


def good_path_batch(k, a, x0, n, samples, seed, budget, start=0, backend=None):
    """Counts for samples ``start .. start+samples-1`` of the stream ``seed``.

    Returns ``(counts, nodes, truncated)`` arrays indexed by sample.
    """
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    if backend == "numba":
        if not USE_NUMBA:
            raise RuntimeError("numba backend requested but the JIT is disabled")
        return _batch_numba(k, a, x0, n, budget, np.uint64(seed), start, samples)
    if backend == "numpy":
        return _batch_numpy(k, a, x0, n, budget, seed, start, samples)
    raise ValueError(f"unknown backend {backend!r}")
