"""Seeded Monte Carlo experiments on the label process and the geometry.

Sample ``i`` of an experiment always uses the random stream keyed by
``(master_seed, i)``. Work is cut into fixed blocks of sample indices and
reduced in index order, so a given configuration produces the same numbers
for any worker count.
"""
import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from itertools import product
from math import comb

import numpy as np

from ._jit import USE_NUMBA, set_threads
from .branching import DEFAULT_BUDGET, count_good_paths_batch
from .geometry import accepted_chain_splits
from .rng import stream_key_u64

Z95 = 1.96
BLOCK = 1 << 16


@dataclass
class McConfig:
    master_seed: int
    samples: int
    batches: int = 32
    parallelism: int = 1
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if not self.samples >= self.batches >= 2:
            raise ValueError("need samples >= batches >= 2")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("seed must lie in [0, 2**64)")


@dataclass
class Estimate:
    mean: float
    stderr: float
    ci95_low: float
    ci95_high: float
    samples: int
    seed: int
    wall_time: float
    truncated: int = 0

    @property
    def flagged(self):
        """True when some sample hit the node budget (mean biased low)."""
        return self.truncated > 0

    def covers(self, value):
        return self.ci95_low <= value <= self.ci95_high


def _make_estimate(mean, stderr, cfg, wall, truncated=0):
    return Estimate(float(mean), float(stderr), float(mean - Z95 * stderr),
                    float(mean + Z95 * stderr), cfg.samples, cfg.master_seed, wall,
                    int(truncated))


def batch_means_stderr(values, batches):
    """Standard error of the mean from contiguous batch means."""
    # sum_b n_b (mean_b - mean)^2 / (B - 1) estimates the per-sample variance
    groups = np.array_split(np.asarray(values, dtype=float), batches)
    means = np.array([g.mean() for g in groups])
    sizes = np.array([g.size for g in groups], dtype=float)
    grand = float(np.dot(means, sizes) / sizes.sum())
    var = float(np.dot(sizes, (means - grand) ** 2) / (batches - 1))
    return math.sqrt(var / len(values)) if var > 0 else 0.0


def good_path_samples(k, a, x0, n, cfg):
    """Per-sample ``(counts, nodes, truncated)`` for an experiment."""
    blocks = [(s, min(BLOCK, cfg.samples - s)) for s in range(0, cfg.samples, BLOCK)]

    def run(block):
        start, size = block
        return count_good_paths_batch(k, a, x0, n, size, cfg.master_seed,
                                      cfg.budget, start=start)

    if USE_NUMBA:
        # numba parallelises inside a block; blocks run in order
        set_threads(cfg.parallelism)
        parts = [run(b) for b in blocks]
    elif cfg.parallelism > 1:
        with ThreadPoolExecutor(cfg.parallelism) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def _good_path_estimates(k, a, x0, n, cfg):
    t0 = time.perf_counter()
    counts, _, trunc = good_path_samples(k, a, x0, n, cfg)
    wall = time.perf_counter() - t0
    mean = counts.mean()
    se_mean = batch_means_stderr(counts, cfg.batches)
    p = float(np.count_nonzero(counts)) / counts.size
    se_p = math.sqrt(p * (1 - p) / counts.size)
    ntr = int(trunc.sum())
    return (_make_estimate(mean, se_mean, cfg, wall, ntr),
            _make_estimate(p, se_p, cfg, wall, ntr))


def estimate_mean_good_paths(k, a, x0, n, cfg):
    """Mean of ``#G_n`` over independent trees; batch-means error bars."""
    return _good_path_estimates(k, a, x0, n, cfg)[0]


def estimate_nonempty_prob(k, a, x0, n, cfg):
    """Fraction of trees with ``#G_n > 0``; binomial error bars."""
    return _good_path_estimates(k, a, x0, n, cfg)[1]


def estimate_good_paths(k, a, x0, n, cfg):
    """Both estimates from one shared set of samples: ``(mean, nonempty)``."""
    return _good_path_estimates(k, a, x0, n, cfg)


# -- geometry cross-validation ---------------------------------------------

def compositions(m, k):
    """All compositions of ``m`` into ``k`` nonnegative parts."""
    return [c for c in product(range(m + 1), repeat=k) if sum(c) == m]


def tv_to_uniform(rows, m, k):
    """Total variation between the empirical law of ``rows`` and uniform
    over the ``C(m+k-1, k-1)`` compositions of ``m``."""
    rows = np.asarray(rows)
    total = comb(m + k - 1, k - 1)
    if rows.shape[0] == 0:
        return math.nan
    # encode a composition by its first k-1 parts in base m+1
    code = np.zeros(rows.shape[0], np.int64)
    for j in range(k - 1):
        code = code * (m + 1) + rows[:, j]
    _, freq = np.unique(code, return_counts=True)
    emp = freq / rows.shape[0]
    seen = emp.size
    return 0.5 * (float(np.abs(emp - 1.0 / total).sum()) + (total - seen) / total)


@dataclass
class TvCell:
    k: int
    m: int
    splits: int
    outcomes: int
    tv: float
    missing: bool


def cross_validate_geometry(k, m_max, splits_per_label, cfg, run_splits=20_000,
                            max_runs=10_000):
    """Split-composition law of the geometric process vs uniform compositions.

    Independent runs of the accepted-polygon chain (run ``r`` keyed by
    ``(master_seed, r)``) are harvested until every parent label
    ``m <= m_max`` has ``splits_per_label`` splits or ``max_runs`` is hit.
    Cells left short are marked ``missing``.
    """
    if k < 2 or m_max < 0:
        raise ValueError("need k >= 2 and m_max >= 0")
    got = {m: [] for m in range(m_max + 1)}
    have = np.zeros(m_max + 1, np.int64)
    r = 0
    # m = 0 is only ever the root, once per run
    need = np.full(m_max + 1, splits_per_label)
    need[0] = 1
    while r < max_runs and np.any(have < need):
        batch = range(r, min(r + max(1, cfg.parallelism), max_runs))

        def run(i):
            return accepted_chain_splits(k, run_splits, stream_key_u64(cfg.master_seed, i))

        if cfg.parallelism > 1:
            with ThreadPoolExecutor(cfg.parallelism) as pool:
                outs = list(pool.map(run, batch))
        else:
            outs = [run(i) for i in batch]
        for plab, rows in outs:
            for m in range(m_max + 1):
                if have[m] >= need[m] and m > 0:
                    continue
                sel = rows[plab == m] - 1
                got[m].append(sel)
                have[m] += sel.shape[0]
        r = batch.stop
    cells = []
    for m in range(m_max + 1):
        rows = np.concatenate(got[m]) if got[m] else np.zeros((0, k), np.int64)
        if m > 0:
            rows = rows[:splits_per_label]
        missing = m > 0 and rows.shape[0] < splits_per_label
        cells.append(TvCell(k, m, int(rows.shape[0]), comb(m + k - 1, k - 1),
                            tv_to_uniform(rows, m, k), bool(missing)))
    return cells


# -- serialisation ---------------------------------------------------------

CSV_FIELDS = ["experiment", "k", "a", "x0", "n", "mean", "stderr", "ci95_low",
              "ci95_high", "samples", "seed", "truncated", "exact", "wall_time"]


def estimates_to_rows(experiment, k, a, x0, n, est, exact=None, with_time=False):
    row = {"experiment": experiment, "k": k, "a": a, "x0": x0, "n": n,
           "mean": repr(est.mean), "stderr": repr(est.stderr),
           "ci95_low": repr(est.ci95_low), "ci95_high": repr(est.ci95_high),
           "samples": est.samples, "seed": est.seed, "truncated": est.truncated,
           "exact": "" if exact is None else repr(exact)}
    if with_time:
        row["wall_time"] = f"{est.wall_time:.3f}"
    return row


def rows_to_csv(rows, with_time=False):
    fields = CSV_FIELDS if with_time else CSV_FIELDS[:-1]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def estimate_to_json(est, with_time=False):
    d = asdict(est)
    if not with_time:
        d.pop("wall_time")
    return json.dumps(d, sort_keys=True)
