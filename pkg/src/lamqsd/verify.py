"""Invariant suites driven by ``lamqsd verify``."""
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import spectral as sp
from .branching import kernel_prob
from .estimators import McConfig, cross_validate_geometry
from .geometry import locate, polygons_disjoint, run_construction
from .oracles import cartesian_polygons_intersect, composition_marginal, side_signature

REFERENCE_EIGENVALUES = {
    (3, 4): 0.248376642883065,
    (2, 5): 0.433040861268365,
    (4, 3): 0.231280689028977,
}

SUITES = ("eigen", "qsd", "martingale", "certificate", "geometry")


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    detail: str


def _check(suite, name, passed, detail):
    return Check(suite, name, bool(passed), detail)


def eigen_suite(**_):
    out = []
    for (k, a), ref in REFERENCE_EIGENVALUES.items():
        eig = sp.dominant_eigen(sp.build_killed_kernel(k, a, 30))
        out.append(_check("eigen", f"lambda(k={k},a={a},N=30)", abs(eig.lam - ref) < 1e-9,
                          f"{eig.lam:.15f} vs {ref}"))
        ok = eig.residual < 1e-12 and np.all(eig.left > 0) and np.all(eig.right > 0)
        out.append(_check("eigen", f"perron vectors (k={k},a={a})", ok,
                          f"residual {eig.residual:.1e}"))
    lams = [sp.dominant_eigen(sp.build_killed_kernel(2, 4, N)).lam for N in (10, 20, 40, 80, 160)]
    mono = all(b >= a - 1e-13 for a, b in zip(lams, lams[1:])) and lams[-1] <= 0.5 + 1e-12
    out.append(_check("eigen", "lambda_N nondecreasing to 1/2 (k=2,a=4)", mono,
                      " ".join(f"{v:.15f}" for v in lams)))
    _, lam = sp.folded_chain_k3_a3()
    exact = (2 + math.sqrt(2)) / 10
    out.append(_check("eigen", "folded 2x2 chain (k=3,a=3)",
                      abs(lam - exact) < 1e-12 and lam > 0.34, f"{lam:.12f}"))
    return out


def qsd_suite(**_):
    out = []
    total = math.fsum(sp.qsd_exact(i) for i in range(4, 201))
    out.append(_check("qsd", "sum g = 1", abs(total - 1) <= 1e-15, f"{total!r}"))
    left = max(sp.left_equation_residual(x) for x in range(4, 151))
    out.append(_check("qsd", "left eigen-equation, x<=150", left < 1e-12, f"{left:.1e}"))
    right = max(sp.right_equation_residual(x) for x in range(4, 1001))
    out.append(_check("qsd", "right eigen-equation, x<=1000", right < 1e-12, f"{right:.1e}"))
    gf = max(sp.generating_function_check(z / 10) for z in range(1, 10))
    out.append(_check("qsd", "generating function, z=0.1..0.9", gf < 1e-10, f"{gf:.1e}"))
    law = sp.iterate_conditioned(2, 4, 4, 200, N=260)
    g = np.array([sp.qsd_exact(x) for x in law.states])
    tv = 0.5 * np.abs(law.q - g).sum()
    out.append(_check("qsd", "TV(q_200, g) < 1e-8", tv < 1e-8, f"{tv:.1e}"))
    rep = sp.monotone_ratio_check(50, 300)
    out.append(_check("qsd", "q_n/g nonincreasing, n<=50", rep.passed,
                      f"worst margin {rep.worst:.1e}; max q_n(4)/g(4) "
                      f"{rep.detail['max_q4_over_g4']:.6f}"))
    n, two_pow, mean = sp.converged_limits()
    out.append(_check("qsd", "2^n P(T>n) -> 4/(e^2-1)",
                      abs(two_pow - sp.LIMIT_TWO_POW_SURVIVAL) < 1e-6,
                      f"{two_pow:.10f} at n={n}"))
    out.append(_check("qsd", "E[X_n|T>n] -> (e^2+3)/2",
                      abs(mean - sp.LIMIT_COND_MEAN) < 1e-6, f"{mean:.10f} at n={n}"))
    return out


def martingale_suite(**_):
    out = []
    mart = all(sum((kernel_prob(2, x, y) * (y - 2) for y in range(1, x + 2)), Fraction(0))
               == Fraction(x - 2, 2) for x in range(0, 1001))
    out.append(_check("martingale", "sum_y P2(x,y)(y-2) = (x-2)/2, x<=1000", mart, "exact"))
    rows = all(sum((kernel_prob(k, x, y) for y in range(1, x + 2)), Fraction(0)) == 1
               for k in range(2, 7) for x in range(0, 201))
    out.append(_check("martingale", "rows sum to 1, k<=6, x<=200", rows, "exact"))
    mean = all(sum((kernel_prob(k, x, y) * y for y in range(1, x + 2)), Fraction(0))
               == 1 + Fraction(x, k) for k in range(2, 7) for x in range(0, 201))
    out.append(_check("martingale", "mean 1 + x/k, k<=6, x<=200", mean, "exact"))
    marg = all(composition_marginal(k, m) == {y: kernel_prob(k, m, y) for y in range(1, m + 2)}
               for k in range(2, 6) for m in range(0, 13))
    out.append(_check("martingale", "kernel = composition marginal, k<=5, m<=12", marg,
                      "exact"))
    try:
        sp.survival_path(200)
        ident, msg = True, "holds at every step n<=200"
    except sp.ConsistencyError as exc:
        ident, msg = False, str(exc)
    out.append(_check("martingale", "x0-2 = 2^n P(T>n) E[X_n-2|T>n]", ident, msg))
    worst = -math.inf
    for x0 in range(4, 11):
        for two_pow, _ in sp.survival_path(200, x0=x0):
            worst = max(worst, two_pow - (x0 - 2) / 2)
    out.append(_check("martingale", "2^n P_x0(T>n) <= (x0-2)/2", worst <= 1e-12,
                      f"max excess {worst:.1e}"))
    sym = [sp.hitting_symmetry_check(x0, 30) for x0 in range(4, 9)]
    out.append(_check("martingale", "P(T=i,X_T=1)=P(T=i,X_T=2)=P(T=i,X_T=3)",
                      all(r.passed for r in sym), "exact, x0=4..8, i<=30"))
    return out


def certificate_suite(**_):
    out = []
    rec = sp.subcritical_certificate_k3()
    detail = {"tail_mass": f"sum h(x>30) <= {rec.tail_mass_upper:.6f}",
              "rows_le_N": f"max (hP)/h on [4,30] = {rec.worst_low:.6f}",
              "rows_gt_N": f"sup (hP)/h beyond 30 <= {rec.worst_high:.6f}"}
    for name, ok in rec.checks.items():
        out.append(_check("certificate", f"k=3,a=4: {name}", ok, detail.get(name, "")))
    rep = sp.classify(3, 3, N=100)
    out.append(_check("certificate", "classify(3,3,N=100) supercritical",
                      rep.verdict == sp.SUPERCRITICAL and 3 * rep.lam > 1,
                      f"3*lambda = {3 * rep.lam:.6f}"))
    expected = {(2, 4): sp.CRITICAL, (2, 5): sp.SUBCRITICAL, (3, 4): sp.SUBCRITICAL,
                (4, 3): sp.SUBCRITICAL}
    for (k, a), verdict in expected.items():
        rep = sp.classify(k, a)
        out.append(_check("certificate", f"classify({k},{a}) {verdict}",
                          rep.verdict == verdict, f"lambda={rep.lam:.12f}"))
    return out


def geometry_suite(seed=1, splits=100_000, **_):
    out = []
    for k in (2, 3):
        cells = cross_validate_geometry(k, 4, splits, McConfig(seed, max(splits, 2)))
        worst = max(c.tv for c in cells)
        ok = worst < 0.02 and not any(c.missing for c in cells)
        table = ", ".join(f"m={c.m}:{c.tv:.4f}" for c in cells)
        out.append(_check("geometry", f"split law vs uniform, k={k}", ok, table))
    rng = np.random.default_rng(seed)
    agree = 0
    cases = 10_000
    for i in range(cases):
        j, k = (2 + i % 3), (2 + (i // 3) % 3)
        a, b = rng.random(j), rng.random(k)
        agree += polygons_disjoint(a, b) != cartesian_polygons_intersect(a, b)
    out.append(_check("geometry", "disjointness vs Cartesian oracle", agree == cases,
                      f"{agree}/{cases}"))
    bad = 0
    for k in (2, 3, 4):
        lam = run_construction(k, 300, seed)
        live = lam.live()
        sig = {}
        for f in live:
            s, e = lam.arcs(f)[0]
            sig[side_signature(lam.polygons, ((s + e) / 2) % 1.0)] = f
        for p in rng.random(300):
            bad += sig.get(side_signature(lam.polygons, p)) != locate(lam, p)
    out.append(_check("geometry", "locate vs half-plane oracle", bad == 0,
                      f"{bad} mismatches"))
    return out


_RUNNERS = {"eigen": eigen_suite, "qsd": qsd_suite, "martingale": martingale_suite,
            "certificate": certificate_suite, "geometry": geometry_suite}


def run_suites(names, seed=1, splits=100_000):
    checks = []
    for name in names:
        checks.extend(_RUNNERS[name](seed=seed, splits=splits))
    return checks
