"""Counter-based random numbers keyed by integers.

Every draw is a pure function of a 64-bit key and a counter, using the
splitmix64 finaliser. Streams for Monte Carlo samples are keyed by
``(master_seed, sample_index)`` and tree nodes derive their keys from their
parent, so results never depend on how work is split across threads or on
which backend evaluates them.

The scalar functions are jitted; the ``*_np`` variants take uint64 arrays.
"""
import numpy as np

from ._jit import U64, njit

MASK = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_CHILD = 0xD1B54A32D192ED03
_INV53 = 1.0 / 9007199254740992.0


def _mix64(z):
    z = (z + GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


mix64 = njit(inline="always")(_mix64)


@njit(inline="always")
def stream_key(seed, index):
    """Key of stream ``index`` under ``seed`` (both nonnegative < 2**64)."""
    return mix64(mix64(U64(seed) & MASK) ^ (U64(index) & MASK))


@njit(inline="always")
def draw(key, t):
    """The ``t``-th raw 64-bit output of the stream with this key."""
    return mix64((U64(key) + ((U64(t) * GOLDEN) & MASK)) & MASK)


@njit(inline="always")
def child_key(key, c):
    """Key of child ``c`` of a tree node with the given key."""
    return mix64(U64(key) ^ ((U64(c + 1) * _CHILD) & MASK))


@njit(inline="always")
def bounded(u, n):
    """Map a raw draw to an integer in ``[0, n)``; requires ``n < 2**32``."""
    return ((U64(u) >> 32) * U64(n)) >> 32


@njit(inline="always")
def uniform01(u):
    """Map a raw draw to a double in ``[0, 1)`` with 53 random bits."""
    return float(U64(u) >> 11) * _INV53


def stream_key_u64(seed, index):
    """:func:`stream_key` for calls from Python; accepts any seed below 2**64."""
    if not 0 <= int(seed) <= MASK:
        raise ValueError("seed must lie in [0, 2**64)")
    return np.uint64(stream_key(np.uint64(seed), np.uint64(index)))


# -- numpy array versions --------------------------------------------------

def mix64_np(z):
    z = np.asarray(z, dtype=np.uint64)
    # wraparound is intended; numpy only warns for 0-d inputs
    with np.errstate(over="ignore"):
        return _mix64(z)


def stream_key_np(seed, index):
    base = np.uint64(_mix64(int(seed) & MASK))
    return _mix64(np.asarray(index, dtype=np.uint64) ^ base)


def draw_np(keys, t):
    return _mix64(keys + np.uint64((int(t) * GOLDEN) & MASK))


def child_key_np(keys, c):
    return _mix64(keys ^ np.uint64(((c + 1) * _CHILD) & MASK))


def bounded_np(u, n):
    return ((u >> np.uint64(32)) * np.asarray(n, dtype=np.uint64)) >> np.uint64(32)


def uniform01_np(u):
    return (u >> np.uint64(11)).astype(np.float64) * _INV53


def entropy_seed():
    """A fresh 63-bit seed from system entropy."""
    return int(np.random.SeedSequence().entropy) & 0x7FFFFFFFFFFFFFFF
