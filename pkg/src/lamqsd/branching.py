"""The label process on the k-ary tree.

A node labelled ``m`` gives its ``k`` children the labels ``1 + m_i`` where
``(m_1, ..., m_k)`` is uniform over the ``C(m+k-1, k-1)`` compositions of
``m`` into ``k`` nonnegative parts. Along a fixed ray the labels form a
Markov chain with kernel ``P_k``; good paths are root-to-level-``n`` paths
whose labels all stay at or above a threshold ``a``.
"""
from dataclasses import dataclass
from fractions import Fraction
from math import comb, inf

import numpy as np

from ._trees import dfs_count, good_path_batch
from .rng import stream_key_u64

DEFAULT_BUDGET = 10_000_000


def kernel_prob(k, x, y):
    """Exact ``P_k(x, y)`` as a :class:`~fractions.Fraction`."""
    if k < 2 or x < 0:
        raise ValueError(f"need k >= 2 and x >= 0, got k={k}, x={x}")
    if not 1 <= y <= x + 1:
        return Fraction(0)
    return Fraction(comb(x - y + k - 1, k - 2), comb(x + k - 1, k - 1))


def kernel_row(k, x):
    """Exact row ``[P_k(x, 1), ..., P_k(x, x+1)]``."""
    return [kernel_prob(k, x, y) for y in range(1, x + 2)]


def kernel_tail(k, x, y):
    """``P_k(x, [y, inf))`` as a float; uses the hockey-stick identity."""
    if y <= 1:
        return 1.0
    if y > x + 1:
        return 0.0
    return comb(x - y + k, k - 1) / comb(x + k - 1, k - 1)


def kernel_matrix(k, lo, hi, fold=False):
    """Float matrix of ``P_k(x, y)`` for ``lo <= x, y <= hi``.

    Mass leaving above ``hi`` is dropped, or added to the last column when
    ``fold`` is set. Mass below ``lo`` is always dropped (killed).
    """
    size = hi - lo + 1
    P = np.zeros((size, size))
    for x in range(lo, hi + 1):
        for y in range(lo, min(x + 1, hi) + 1):
            P[x - lo, y - lo] = comb(x - y + k - 1, k - 2) / comb(x + k - 1, k - 1)
        if fold and x + 1 > hi:
            P[x - lo, hi - lo] += kernel_tail(k, x, hi + 1)
    return P


def sample_children(k, m, rng):
    """Child labels of a node labelled ``m``, drawn by stars and bars.

    A uniform ``(k-1)``-subset of the ``m + k - 1`` positions is chosen with
    Floyd's algorithm; gaps between the chosen bars are the parts.
    """
    if m < 0:
        raise ValueError("label must be nonnegative")
    npos = m + k - 1
    bars = set()
    for j in range(npos - k + 1, npos):
        t = int(rng.integers(0, j + 1))
        bars.add(j if t in bars else t)
    labels = []
    prev = -1
    for b in sorted(bars):
        labels.append(b - prev)
        prev = b
    labels.append(npos - prev)
    return tuple(labels)


def ray_step(k, x, u):
    """Next label from ``x`` by inverse transform of the uniform ``u``.

    The map is nondecreasing in ``x`` for fixed ``u``, which gives the
    monotone coupling of chains started at different labels.
    """
    y = 1
    while y <= x and kernel_tail(k, x, y + 1) > u:
        y += 1
    return y


@dataclass
class RayPath:
    labels: list
    T: float  # first index with label < a; inf if none up to n

    @property
    def survived(self):
        return self.T == inf


def simulate_ray(k, x0, n, a, rng):
    """Labels ``X_0 .. X_n`` along a fixed ray, with the killing time."""
    if x0 < 0 or n < 0 or a < 1:
        raise ValueError("need x0 >= 0, n >= 0, a >= 1")
    labels = [x0]
    for _ in range(n):
        labels.append(ray_step(k, labels[-1], rng.random()))
    T = next((i for i, x in enumerate(labels) if x < a), inf)
    return RayPath(labels, T)


def ray_survival_mc(k, x0, n, a, size, rng, chunk=1 << 18):
    """Number of ``size`` independent rays with ``T > n`` (vectorised)."""
    top = x0 + n + 1
    # tails[x, y] = P_k(x, [y, inf)), used for inverse transform sampling
    tails = np.zeros((top + 1, top + 2))
    for x in range(top + 1):
        for y in range(1, x + 2):
            tails[x, y] = kernel_tail(k, x, y)
    survived = 0
    done = 0
    while done < size:
        m = min(chunk, size - done)
        x = np.full(m, x0, np.int64)
        alive = x >= a
        for _ in range(n):
            u = rng.random(m)
            y = np.ones(m, np.int64)
            for cand in range(2, top + 2):
                y += tails[x, cand] > u
            x = y
            alive &= x >= a
        survived += int(alive.sum())
        done += m
    return survived


@dataclass
class GoodPathCount:
    n: int
    a: int
    count: int
    nodes_expanded: int
    truncated: bool


def count_good_paths(k, a, x0, n, budget=DEFAULT_BUDGET, seed=0, index=0):
    """Count ``#G_n`` for the tree indexed ``index`` of stream ``seed``.

    Nodes with labels below ``a`` are pruned together with their subtrees.
    When more than ``budget`` nodes would be visited the search stops and
    ``truncated`` is set; ``count`` is then only a lower bound.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    c, w, t = dfs_count(k, a, x0, n, budget, stream_key_u64(seed, index))
    return GoodPathCount(n, a, int(c), int(w), bool(t))


def count_good_paths_batch(k, a, x0, n, samples, seed, budget=DEFAULT_BUDGET,
                           start=0, backend=None):
    """Vector of counts for consecutive sample indices; see :mod:`lamqsd._trees`."""
    return good_path_batch(k, a, x0, n, samples, seed, budget, start, backend)
