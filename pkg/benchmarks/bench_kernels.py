"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is made at
import time from ``LAMQSD_DISABLE_JIT``. Usage::

    python benchmarks/bench_kernels.py [--samples 200000] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from lamqsd import BACKEND
from lamqsd.branching import count_good_paths_batch
from lamqsd.geometry import run_construction, accepted_chain_splits
from lamqsd.spectral import dominant_eigen, build_killed_kernel
from lamqsd.rng import stream_key_u64

samples, repeat = int(sys.argv[1]), int(sys.argv[2])
cases = {
    "good paths k=2 a=4 n=40": lambda: count_good_paths_batch(2, 4, 4, 40, samples, 1),
    "good paths k=3 a=3 n=12": lambda: count_good_paths_batch(3, 3, 3, 12, samples // 4, 1),
    "construction k=2 10^4 throws": lambda: run_construction(2, 10_000, 1),
    "accepted chain k=3 2*10^4 splits": lambda: accepted_chain_splits(
        3, 20_000, stream_key_u64(1, 0)),
    "power iteration k=3 a=4 N=240": lambda: dominant_eigen(build_killed_kernel(3, 4, 240)),
}
out = {"backend": BACKEND}
for name, fn in cases.items():
    fn()  # compile / warm up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = best
    if isinstance(res, tuple) and isinstance(res[0], np.ndarray):
        out[name + " checksum"] = int(res[0].sum())
print(json.dumps(out))
"""


def run(disable, samples, repeat):
    env = dict(os.environ, LAMQSD_DISABLE_JIT="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(samples), str(repeat)],
                         capture_output=True, text=True, env=env, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    jit = run(False, args.samples, args.repeat)
    ref = run(True, args.samples, args.repeat)
    print(f"{'kernel':36s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name, t_jit in jit.items():
        if name == "backend" or name.endswith("checksum"):
            continue
        t_ref = ref[name]
        print(f"{name:36s} {t_jit:10.4f} {t_ref:10.4f} {t_ref / t_jit:8.1f}x")
        chk = name + " checksum"
        if chk in jit and jit[chk] != ref[chk]:
            print(f"  checksum mismatch: {jit[chk]} vs {ref[chk]}")


if __name__ == "__main__":
    main()
