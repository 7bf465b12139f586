"""Backend selection for the hot kernels.

Kernels are compiled with numba when it is importable and the environment
variable ``LAMQSD_DISABLE_JIT`` is unset (or set to ``0``/``false``).
Otherwise the decorators below are no-ops and the same functions run as
plain Python, while the batch routines switch to their vectorised numpy
implementations.
"""
import os

import numpy as np

_flag = os.environ.get("LAMQSD_DISABLE_JIT", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no", "off")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and not DISABLED
if USE_NUMBA:
    # skip the TBB probe, which warns on older TBB installs
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
BACKEND = "numba" if USE_NUMBA else "numpy"

# Integer casts used inside kernels. Under numba, mixing signed and unsigned
# 64-bit integers promotes to float64, so every hash input goes through U64.
# Plain Python ints are masked explicitly instead.
if USE_NUMBA:
    U64 = np.uint64
    I64 = np.int64
else:
    U64 = int
    I64 = int


def njit(*args, **kwargs):
    """``numba.njit`` (on-disk cached) when the JIT is enabled, identity otherwise."""
    if USE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


if USE_NUMBA:
    prange = numba.prange
else:
    prange = range


def set_threads(n):
    """Set the kernel thread count; returns the value actually applied."""
    if n is None:
        return get_threads()
    n = max(1, int(n))
    if USE_NUMBA:
        n = min(n, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(n)
    return n


def get_threads():
    if USE_NUMBA:
        return numba.get_num_threads()
    return 1
