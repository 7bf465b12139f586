"""Acceptance criteria, one test per criterion.

Each test appends a ``[PASS]`` or ``[FAIL]`` line that pytest prints in an
"acceptance criteria" section at the end of the run.
"""
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np

from conftest import ACCEPTANCE_LINES, run_cli
from lamqsd import spectral as sp
from lamqsd.branching import kernel_prob
from lamqsd.estimators import (McConfig, cross_validate_geometry, estimate_good_paths,
                               estimate_mean_good_paths, good_path_samples)
from lamqsd.geometry import polygons_disjoint
from lamqsd.oracles import cartesian_polygons_intersect, composition_marginal


@contextmanager
def criterion(num, title):
    info = {"detail": ""}
    try:
        yield info
    except BaseException:
        line = f"[FAIL] criterion {num:2d}: {title} {info['detail']}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    line = f"[PASS] criterion {num:2d}: {title} {info['detail']}".rstrip()
    ACCEPTANCE_LINES.append(line)
    print(line)


REFERENCE = [((3, 4), 0.248376642883065), ((2, 5), 0.433040861268365),
             ((4, 3), 0.231280689028977)]


def test_c01_eigenvalue_reproduction():
    with criterion(1, "eigenvalues match the published values to 1e-9") as c:
        parts = []
        for (k, a), ref in REFERENCE:
            t0 = time.perf_counter()
            lam = sp.dominant_eigen(sp.build_killed_kernel(k, a, 30)).lam
            dt = time.perf_counter() - t0
            parts.append(f"({k},{a}) err={abs(lam - ref):.1e} t={dt:.2f}s")
            c["detail"] = "; ".join(parts)
            assert abs(lam - ref) < 1e-9
            assert dt < 1.0


def test_c02_critical_limits():
    with criterion(2, "2^n P_4(T>n) and E_4[X_n|T>n] limits") as c:
        t0 = time.perf_counter()
        n, two_pow, mean = sp.converged_limits()
        dt = time.perf_counter() - t0
        target_a = 4 / (math.e ** 2 - 1)
        target_b = (math.e ** 2 + 3) / 2
        c["detail"] = (f"n={n} N={sp.LIMIT_TRUNCATION} |d1|={abs(two_pow - target_a):.1e} "
                       f"|d2|={abs(mean - target_b):.1e} t={dt:.2f}s")
        assert abs(two_pow - target_a) < 1e-6
        assert abs(mean - target_b) < 1e-6
        assert n <= 400 and sp.LIMIT_TRUNCATION <= 600
        assert dt < 10


def test_c03_closed_form_eigenvectors():
    with criterion(3, "closed-form eigenvectors and generating function") as c:
        left = max(sp.left_equation_residual(x) for x in range(4, 151))
        right = max(sp.right_equation_residual(x) for x in range(4, 1001))
        total = math.fsum(sp.qsd_exact(i) for i in range(4, 201))
        gf = max(sp.generating_function_check(z / 10) for z in range(1, 10))
        c["detail"] = (f"left={left:.1e} right={right:.1e} |sum-1|={abs(total - 1):.1e} "
                       f"gf={gf:.1e}")
        assert left < 1e-12 and right < 1e-12
        assert abs(total - 1) <= 1e-15
        assert gf < 1e-10


def test_c04_exact_identities():
    with criterion(4, "exact rational identities") as c:
        for x in range(0, 1001):
            s = sum((kernel_prob(2, x, y) * (y - 2) for y in range(1, x + 2)), Fraction(0))
            assert s == Fraction(x - 2, 2)
        for k in range(2, 7):
            for x in range(0, 201):
                row = [kernel_prob(k, x, y) for y in range(1, x + 2)]
                assert sum(row) == 1
                assert sum(y * p for y, p in enumerate(row, start=1)) == 1 + Fraction(x, k)
        for k in range(2, 6):
            for m in range(0, 13):
                assert composition_marginal(k, m) == {y: kernel_prob(k, m, y)
                                                      for y in range(1, m + 2)}
        c["detail"] = "martingale x<=1000, rows/mean k<=6 x<=200, marginals k<=5 m<=12"


def test_c05_monotone_ratio_and_symmetry():
    with criterion(5, "monotone ratio and hitting symmetry") as c:
        rep = sp.monotone_ratio_check(50, 300)
        sym = [sp.hitting_symmetry_check(x0, 30) for x0 in range(4, 9)]
        worst_sym = max(r.worst for r in sym)
        c["detail"] = f"ratio worst margin={rep.worst:.1e} symmetry worst={worst_sym:.1e}"
        assert rep.passed and rep.worst >= -1e-12
        assert worst_sym <= 1e-12


def test_c06_certificate_and_supercritical_bound():
    with criterion(6, "subcritical certificate and supercritical bound") as c:
        rec = sp.subcritical_certificate_k3()
        _, lam2 = sp.folded_chain_k3_a3()
        rep = sp.classify(3, 3, N=100)
        c["detail"] = (f"tail={rec.tail_mass_upper:.5f} rows<=30={rec.worst_low:.4f} "
                       f"rows>30={rec.worst_high:.4f} lam2x2={lam2:.6f} "
                       f"3lam100={3 * rep.lam:.4f}")
        assert rec.tail_mass_upper < 0.014
        assert rec.worst_low <= 0.263 and rec.worst_high <= 0.3
        assert rec.passed
        assert abs(lam2 - (2 + math.sqrt(2)) / 10) < 1e-12 and lam2 > 0.34
        assert rep.verdict == sp.SUPERCRITICAL and 3 * rep.lam > 1


def test_c07_monte_carlo_vs_exact():
    with criterion(7, "Monte Carlo mean #G_40 vs exact oracle") as c:
        exact = sp.expected_good_paths(2, 4, 4, 40)
        t0 = time.perf_counter()
        est = estimate_mean_good_paths(2, 4, 4, 40, McConfig(7, 1_000_000, parallelism=8))
        dt = time.perf_counter() - t0
        z = (est.mean - exact) / est.stderr
        c["detail"] = (f"mean={est.mean:.5f} exact={exact:.5f} se={est.stderr:.1e} "
                       f"z={z:+.2f} t={dt:.1f}s")
        assert abs(z) < 3
        assert not est.flagged
        assert dt < 60


# frozen from a pilot on seeds 101-103 (n P = 6.83-6.85, 9.20-9.23, 11.34-11.36)
BRACKET = (6.0, 12.0)


def test_c08_nonempty_bracket():
    with criterion(8, "n P(G_n nonempty) bracket") as c:
        vals = []
        for n in (20, 40, 80):
            cfg = McConfig(8, 1_000_000)
            counts, _, _ = good_path_samples(2, 4, 4, n, cfg)
            assert np.all((counts > 0) <= counts)
            mean, prob = estimate_good_paths(2, 4, 4, n, cfg)
            assert prob.mean <= mean.mean
            vals.append(n * prob.mean)
        ratio = max(vals) / min(vals)
        c["detail"] = ("nP=" + ",".join(f"{v:.3f}" for v in vals) +
                       f" ratio={ratio:.3f} band={BRACKET}")
        assert ratio < 2
        assert all(BRACKET[0] <= v <= BRACKET[1] for v in vals)


def test_c09_geometry_mechanism():
    with criterion(9, "geometry vs branching mechanism") as c:
        worst = {}
        for k in (2, 3):
            cells = cross_validate_geometry(k, 4, 100_000, McConfig(9, 100_000))
            for cell in cells[1:]:
                assert cell.splits >= 100_000 and not cell.missing
            worst[k] = max(cell.tv for cell in cells)
            assert worst[k] < 0.02
        rng = np.random.default_rng(9)
        agree = 0
        for i in range(10_000):
            j, k = 2 + i % 3, 2 + (i // 3) % 3
            a, b = rng.random(j), rng.random(k)
            agree += polygons_disjoint(a, b) != cartesian_polygons_intersect(a, b)
        c["detail"] = f"TV k=2 {worst[2]:.4f}, k=3 {worst[3]:.4f}; oracle {agree}/10000"
        assert agree == 10_000


COMMANDS = [
    (["lam", "--k", "2", "--throws", "2000", "--seed", "7", "--svg", "a.svg",
      "--tree", "a.tsv"], ["a.svg", "a.tsv"]),
    (["lam", "--k", "3", "--throws", "2000", "--seed", "7", "--hyperbolic", "--svg", "b.svg",
      "--tree", "b.tsv"], ["b.svg", "b.tsv"]),
    (["labels", "--k", "2", "--a", "4", "--x0", "4", "--n", "10", "40",
      "--samples", "200000", "--seed", "10", "--out", "l.csv"], ["l.csv"]),
    (["labels", "--k", "3", "--a", "3", "--x0", "3", "--n", "12", "--samples", "100000",
      "--seed", "10", "--out", "l.json"], ["l.json"]),
    (["classify", "--k", "3", "--a", "4", "--out", "c.json"], ["c.json"]),
    (["spectral", "q", "--n", "40", "--out", "q.csv"], ["q.csv"]),
    (["verify", "geometry", "--seed", "10"], []),
]


def test_c10_reproducibility(tmp_path):
    with criterion(10, "byte-identical CLI reruns at 1, 4 and 8 threads") as c:
        env = {"NUMBA_NUM_THREADS": "8"}
        checked = 0
        for argv, files in COMMANDS:
            outputs = []
            for threads in (1, 4, 8):
                work = tmp_path / f"{argv[0]}_{checked}_{threads}"
                work.mkdir()
                res = run_cli([*argv, "--threads", str(threads)], env=env, cwd=work)
                assert res.returncode == 0, res.stderr
                outputs.append([res.stdout] + [(work / f).read_bytes() for f in files])
            assert outputs[0] == outputs[1] == outputs[2], argv
            checked += 1
        c["detail"] = f"{checked} commands x 3 thread counts"
