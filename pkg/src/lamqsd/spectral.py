"""Killed label kernels: eigenvalues, quasi-stationary laws, certificates.

The killed kernel ``P~_k`` is the label kernel restricted to states
``>= a``; mass that would move below ``a`` is lost. Its truncation to
``a..N`` is lower Hessenberg (``y <= x + 1``), nonnegative and
substochastic.

For ``k = 2, a = 4`` the left and right eigenvectors at eigenvalue 1/2 are
known in closed form::

    g(i) = 2**(i-3) (i-3) / (i-1)!      (a probability on i >= 4)
    f(i) = (i - 2) / 2
"""
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

from ._jit import USE_NUMBA, njit
from .branching import kernel_matrix, kernel_prob

E2 = math.exp(2.0)
LIMIT_TWO_POW_SURVIVAL = 4.0 / (E2 - 1.0)
LIMIT_COND_MEAN = (E2 + 3.0) / 2.0


class ConvergenceError(RuntimeError):
    """Power iteration hit its iteration cap."""

    def __init__(self, msg, residual):
        super().__init__(f"{msg} (residual {residual:.3e})")
        self.residual = residual


class TruncationError(RuntimeError):
    """Results depend on the truncation level more than allowed."""


class ConsistencyError(RuntimeError):
    """An identity that must hold exactly was violated numerically."""


# -- compensated products --------------------------------------------------

@njit
def _vec_mat(q, P):
    """``q @ P`` for lower-Hessenberg ``P`` with Neumaier summation."""
    n = q.shape[0]
    out = np.zeros(n)
    for y in range(n):
        s = 0.0
        c = 0.0
        for x in range(max(y - 1, 0), n):
            v = q[x] * P[x, y]
            t = s + v
            if abs(s) >= abs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
        out[y] = s + c
    return out


@njit
def _mat_vec(P, r):
    """``P @ r`` for lower-Hessenberg ``P`` with Neumaier summation."""
    n = r.shape[0]
    out = np.zeros(n)
    for x in range(n):
        s = 0.0
        c = 0.0
        for y in range(0, min(x + 2, n)):
            v = P[x, y] * r[y]
            t = s + v
            if abs(s) >= abs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
        out[x] = s + c
    return out


if USE_NUMBA:
    vec_mat, mat_vec = _vec_mat, _mat_vec
else:
    def vec_mat(q, P):
        return q @ P

    def mat_vec(P, r):
        return P @ r


# -- kernels ---------------------------------------------------------------

@dataclass
class KilledKernel:
    k: int
    a: int
    N: int
    matrix: np.ndarray
    fold: bool = False

    @property
    def states(self):
        return np.arange(self.a, self.N + 1)

    def exact(self):
        """Entries as a list of lists of Fractions."""
        rows = []
        for x in range(self.a, self.N + 1):
            row = [kernel_prob(self.k, x, y) for y in range(self.a, self.N + 1)]
            if self.fold and x + 1 > self.N:
                row[-1] += sum((kernel_prob(self.k, x, y) for y in range(self.N + 1, x + 2)),
                               Fraction(0))
            rows.append(row)
        return rows


def build_killed_kernel(k, a, N, fold=False):
    """Killed kernel on states ``a..N``; ``fold`` sends mass above N to N."""
    if k < 2 or a < 1:
        raise ValueError("need k >= 2 and a >= 1")
    if N < a + 1:
        raise ValueError(f"truncation N={N} must be at least a+1={a + 1}")
    return KilledKernel(k, a, N, kernel_matrix(k, a, N, fold=fold), fold)


@dataclass
class EigenTriple:
    lam: float
    left: np.ndarray   # sums to 1
    right: np.ndarray  # first entry 1
    residual: float
    iterations: int


def dominant_eigen(kernel, tol=1e-13, max_iter=200_000):
    """Perron eigenvalue and vectors by power iteration from all-ones."""
    P = kernel.matrix if isinstance(kernel, KilledKernel) else np.asarray(kernel, float)
    n = P.shape[0]
    left = np.full(n, 1.0 / n)
    right = np.ones(n)
    lam = 0.0
    res = math.inf
    for it in range(1, max_iter + 1):
        nl = vec_mat(left, P)
        nr = mat_vec(P, right)
        sl = nl.sum()
        if sl == 0.0:
            raise ConvergenceError("nilpotent kernel", math.inf)
        left = nl / sl
        right = nr / nr.max()
        if it % 8 and it > 2:
            continue
        lam = float(vec_mat(left, P).sum())
        res_l = np.abs(vec_mat(left, P) - lam * left).max() / left.max()
        Pr = mat_vec(P, right)
        lam_r = float(Pr.max())
        res_r = np.abs(Pr - lam * right).max()
        res = max(res_l, res_r, abs(lam - lam_r))
        if res < tol:
            break
    else:
        raise ConvergenceError(f"no convergence after {max_iter} iterations", res)
    right = right / right[0]
    if np.any(left <= 0) or np.any(right <= 0):
        raise ConvergenceError("Perron vectors not strictly positive", res)
    return EigenTriple(lam, left, right, float(res), it)


def truncation_eigenvalue(k, a, N=None, tol=1e-12, n0=30, n_max=960):
    """``lambda_N`` for doubling N until it moves by less than ``tol``.

    With ``N`` given, exactly that truncation is used. Returns
    ``(lambda, N, history)`` where history lists ``(N, lambda_N)``.
    """
    if N is not None:
        lam = dominant_eigen(build_killed_kernel(k, a, N)).lam
        return lam, N, [(N, lam)]
    history = []
    N = max(n0, a + 1)
    while True:
        lam = dominant_eigen(build_killed_kernel(k, a, N)).lam
        history.append((N, lam))
        if len(history) > 1 and abs(lam - history[-2][1]) < tol:
            return lam, N, history
        if 2 * N > n_max:
            return lam, N, history
        N *= 2


# -- closed forms for k = 2, a = 4 ------------------------------------------

@lru_cache(maxsize=None)
def qsd_fraction(i):
    """Exact quasi-stationary probability of label ``i`` (0 below 4)."""
    i = int(i)
    if i < 4:
        return Fraction(0)
    return Fraction(2 ** (i - 3) * (i - 3), math.factorial(i - 1))


def qsd_exact(i):
    return float(qsd_fraction(i))


def right_eigen_exact(i):
    """Right eigenvector ``f(i) = (i-2)/2``, normalised to ``f(4) = 1``."""
    if i < 4:
        return 0.0
    return (i - 2) / 2


def _g_tail_bound(y):
    # g(j+1)/g(j) = 2(j-2)/((j-1)(j-3)) <= 2(y-2)/((y-1)(y-3)) for j >= y >= 5
    r = 2 * (y - 2) / ((y - 1) * (y - 3))
    return qsd_exact(y) * r / (1 - r)


def left_equation_residual(x, extra=200):
    """``|g(x) - 2 sum_{y >= max(x-1,4)} g(y)/(y+1)|`` plus a tail bound."""
    lo = max(x - 1, 4)
    hi = lo + extra
    s = math.fsum(qsd_exact(y) / (y + 1) for y in range(lo, hi + 1))
    tail = 2 * _g_tail_bound(hi + 1)
    return abs(qsd_exact(x) - 2 * s) + tail


def right_equation_residual(x):
    """``|2/(x+1) sum_{y=4}^{x+1} f(y) - f(x)|``."""
    s = math.fsum(right_eigen_exact(y) for y in range(4, x + 2))
    return abs(2 * s / (x + 1) - right_eigen_exact(x))


def qsd_generating_function(z):
    """Closed form ``G(z) = z/2 (exp(2z)(z-1) + z + 1)``."""
    return 0.5 * z * (math.exp(2 * z) * (z - 1) + z + 1)


def generating_function_check(z, terms=400):
    """|power series of g at z - closed form|, series truncated with a tail bound."""
    if not 0 <= z < 1:
        raise ValueError("z must lie in [0, 1)")
    if z == 0:
        return 0.0
    series = math.fsum(qsd_exact(i) * z ** i for i in range(4, terms + 1))
    tail = _g_tail_bound(terms + 1) * z ** (terms + 1)
    return abs(series - qsd_generating_function(z)) + tail


# -- conditioned laws ------------------------------------------------------

@dataclass
class ConditionedLaw:
    n: int
    states: np.ndarray
    q: np.ndarray
    survival: float
    log_survival: float


def _conditioned_steps(k, a, x0, n, N):
    """Yield ``(step, q, mass)`` where ``mass = P(T > step | T > step-1)``."""
    P = kernel_matrix(k, a, N)
    q = np.zeros(N - a + 1)
    q[x0 - a] = 1.0
    yield 0, q, 1.0
    for j in range(1, n + 1):
        nq = vec_mat(q, P)
        mass = math.fsum(nq)
        if mass == 0.0:
            raise ConsistencyError(f"chain killed surely by step {j}")
        q = nq / mass
        yield j, q, mass


def _default_truncation(x0, n):
    return x0 + n + 1


def iterate_conditioned(k, a, x0, n, N=None, rel_tol=1e-12):
    """Law of ``X_n`` given ``T > n`` started from ``x0``, on states ``a..N``.

    With ``N`` at least ``x0 + n + 1`` nothing is truncated. A smaller N is
    accepted only if doubling it changes the survival probability by less
    than ``rel_tol`` (relative).
    """
    if not a <= x0:
        raise ValueError("x0 must be at least a")
    exact_N = _default_truncation(x0, n)
    if N is None:
        N = exact_N
    if x0 > N:
        raise ValueError("x0 must lie in [a, N]")
    law = _iterate(k, a, x0, n, N)
    if N < exact_N:
        wide = _iterate(k, a, x0, n, min(2 * N, exact_N))
        if abs(math.expm1(wide.log_survival - law.log_survival)) > rel_tol:
            raise TruncationError(f"survival at n={n} changes when N={N} is doubled; "
                                  "increase N")
    return law


def _iterate(k, a, x0, n, N):
    log_s = 0.0
    q = None
    for _, q, mass in _conditioned_steps(k, a, x0, n, N):
        log_s += math.log(mass)
    return ConditionedLaw(n, np.arange(a, N + 1), q, math.exp(log_s), log_s)


# conditioned laws put mass ~ 2**x / x! on label x, so beyond this
# truncation the lost mass is far below double precision
LIMIT_TRUNCATION = 256


def survival_path(n, N=None, x0=4, check_tol=1e-10):
    """Per-step ``(2**j P(T>j), E[X_j | T>j])`` for ``j = 0..n`` (k=2, a=4).

    Every step is checked against ``x0 - 2 = 2**j P(T>j) (E[X_j|T>j] - 2)``;
    truncation losses would show up there first.
    """
    if N is None:
        N = min(_default_truncation(x0, n), max(LIMIT_TRUNCATION, x0 + 64))
    states = np.arange(4, N + 1, dtype=float)
    two_pow = 1.0
    out = []
    for j, q, mass in _conditioned_steps(2, 4, x0, n, N):
        two_pow *= 2.0 * mass if j else 1.0
        mean = math.fsum(states * q)
        if abs(two_pow * (mean - 2.0) - (x0 - 2)) > check_tol:
            raise ConsistencyError(f"martingale identity fails at step {j}: "
                                   f"{two_pow * (mean - 2.0)} != {x0 - 2}")
        out.append((two_pow, mean))
    return out


def survival_asymptotics(n, N=None, x0=4):
    """``(2**n P_x0(T > n), E_x0[X_n | T > n])`` for the binary chain, a=4."""
    return survival_path(n, N, x0)[-1]


def expected_good_paths(k, a, x0, n, N=None):
    """Exact ``E[#G_n] = k**n P_x0(T > n)``."""
    if x0 < a:
        return 0.0
    law = iterate_conditioned(k, a, x0, n, N)
    return math.exp(n * math.log(k) + law.log_survival)


def converged_limits(tol=1e-9, n0=25, n_max=1600, N=None):
    """Double n until both limit quantities move by less than ``tol``.

    Returns ``(n, two_pow_survival, cond_mean)``.
    """
    path = survival_path(n_max, N)
    n = n0
    prev = path[n]
    while 2 * n <= n_max:
        cur = path[2 * n]
        if max(abs(cur[0] - prev[0]), abs(cur[1] - prev[1])) < tol:
            return 2 * n, cur[0], cur[1]
        n *= 2
        prev = cur
    return n, prev[0], prev[1]


# -- property checks -------------------------------------------------------

@dataclass
class CheckReport:
    name: str
    passed: bool
    worst: float
    detail: dict = field(default_factory=dict)


def monotone_ratio_check(n_max, N=300, tol=1e-12, dps=40):
    """Check that ``q_n(x)/g(x)`` is nonincreasing in x for ``n <= n_max``.

    Arithmetic is done with mpmath so values far below the double range
    still compare correctly. Also checks ``q_n(4)/g(4) <= 3``.
    """
    with mpmath.workdps(dps):
        g = [mpmath.mpf(qsd_fraction(x).numerator) / qsd_fraction(x).denominator
             for x in range(4, N + 1)]
        size = N - 3
        q = [mpmath.mpf(0)] * size
        q[0] = mpmath.mpf(1)
        worst = mpmath.inf
        where = None
        max_head = mpmath.mpf(0)
        for n in range(n_max + 1):
            if n:
                # suffix sums of q(z)/(z+1) over z >= max(x-1, 4)
                suffix = [mpmath.mpf(0)] * (size + 1)
                for i in range(size - 1, -1, -1):
                    suffix[i] = suffix[i + 1] + q[i] / (i + 5)
                new = [suffix[max(i - 1, 0)] for i in range(size)]
                tot = mpmath.fsum(new)
                q = [v / tot for v in new]
            ratios = [q[i] / g[i] for i in range(size)]
            max_head = max(max_head, ratios[0])
            for i in range(size - 1):
                margin = ratios[i] - ratios[i + 1]
                if margin < worst:
                    worst, where = margin, (n, i + 4)
        passed = worst >= -tol and max_head <= 3 + tol
        return CheckReport("monotone_ratio", bool(passed), float(worst),
                           {"at": where, "max_q4_over_g4": float(max_head)})


def hitting_symmetry_check(x0, n_max):
    """Exact check of ``P(T=i, X_T=1) = P(T=i, X_T=2) = P(T=i, X_T=3)``.

    Uses rational arithmetic on the binary chain absorbed at {1, 2, 3}.
    """
    if x0 < 4:
        raise ValueError("x0 must be at least 4")
    alive = {x0: Fraction(1)}
    worst = Fraction(0)
    table = []
    for i in range(1, n_max + 1):
        hits = [sum((p * kernel_prob(2, x, y) for x, p in alive.items()), Fraction(0))
                for y in (1, 2, 3)]
        worst = max(worst, max(hits) - min(hits))
        table.append(hits)
        nxt = {}
        for x, p in alive.items():
            w = p * Fraction(1, x + 1)
            for y in range(4, x + 2):
                nxt[y] = nxt.get(y, Fraction(0)) + w
        alive = nxt
    return CheckReport("hitting_symmetry", worst == 0, float(worst),
                       {"x0": x0, "first": [str(h) for h in table[0]]})


# -- certificates ----------------------------------------------------------

@dataclass
class CertificateRecord:
    k: int
    a: int
    N: int
    lambda_max: float
    theta: float
    lambda_low: float       # target on states a..N
    lambda_high: float      # target on states > N
    h: np.ndarray           # h on a..N, h(N) = 1
    h_decreasing: bool
    tail_mass_upper: float  # upper bound for sum_{x > N} h(x)
    worst_low: float        # max (hP)(y)/h(y), y in a..N (rigorous upper bound)
    worst_high: float       # sup (hP)(y)/h(y), y > N (rigorous upper bound)
    checks: dict

    @property
    def passed(self):
        return all(self.checks.values())

    @property
    def worst_margin(self):
        return min(self.lambda_low - self.worst_low, self.lambda_high - self.worst_high)

    def to_dict(self):
        d = asdict(self)
        d["h"] = [float(v) for v in self.h]
        d["passed"] = self.passed
        return d


def _tail_h(theta, N, k, x):
    """``theta**(x-N) (N!/x!)**(k-1)`` for ``x >= N``, as a float."""
    lg = (x - N) * math.log(theta) - (k - 1) * (math.lgamma(x + 1) - math.lgamma(N + 1))
    return math.exp(lg)


def h_certificate(k, a, N, theta, lambda_low, lambda_high, extra=60, tail_mass_max=None):
    """Try to certify ``h P~_k <= lambda h`` for an explicit positive summable h.

    ``h`` is the left Perron vector of the ``a..N`` truncation scaled to
    ``h(N) = 1`` and continued by ``h(x) = theta**(x-N) (N!/x!)**(k-1)``.
    Rows ``y <= N`` must satisfy the bound with ``lambda_low`` and rows
    ``y > N`` with ``lambda_high``. Infinite sums are cut at ``N + extra``
    with a geometric remainder; rows beyond ``N + extra`` are covered by a
    uniform analytic bound.
    """
    kern = build_killed_kernel(k, a, N)
    eig = dominant_eigen(kern)
    h = eig.left / eig.left[-1]
    X = N + extra

    def hx(x):
        return h[x - a] if x <= N else _tail_h(theta, N, k, x)

    def ptilde(x, y):
        if y < a or y > x + 1:
            return 0.0
        return float(kernel_prob(k, x, y))

    # h(x+1)/h(x) = theta/(x+1)**(k-1) beyond N
    def ratio_after(x):
        return theta / (x + 1) ** (k - 1)

    r_tail = ratio_after(X + 1)
    if r_tail >= 1:
        raise ValueError("theta too large for the chosen extra range")
    beyond = hx(X + 1) / (1 - r_tail)  # >= sum_{x > X} h(x)
    tail_mass = math.fsum(hx(x) for x in range(N + 1, X + 1)) + beyond

    worst_low = 0.0
    for y in range(a, N + 1):
        s = math.fsum(hx(x) * ptilde(x, y) for x in range(max(y - 1, a), X + 1))
        worst_low = max(worst_low, (s + beyond) / hx(y))

    worst_high = 0.0
    for y in range(N + 1, X + 1):
        s = math.fsum(hx(x) * ptilde(x, y) for x in range(y - 1, X + 1))
        worst_high = max(worst_high, (s + beyond) / hx(y))
    # rows y > X: P~(y-1, y) h(y-1)/h(y) <= (k-1)!/theta, P~(y, y) decreases in y,
    # and h(y+i)/h(y) <= ratio_after(y)**i
    q = ratio_after(X + 1)
    uniform = (math.factorial(k - 1) / theta + ptilde(X + 1, X + 1) + q / (1 - q))
    worst_high = max(worst_high, uniform)

    checks = {
        "h_positive": bool(np.all(h > 0)),
        "rows_le_N": bool(worst_low <= lambda_low),
        "rows_gt_N": bool(worst_high <= lambda_high),
        "targets_subcritical": bool(lambda_low < 1.0 / k and lambda_high < 1.0 / k),
    }
    if tail_mass_max is not None:
        checks["tail_mass"] = bool(tail_mass < tail_mass_max)
    decreasing = bool(np.all(np.diff(h) < 0))
    return CertificateRecord(k, a, N, eig.lam, theta, lambda_low, lambda_high, h,
                             decreasing, float(tail_mass), float(worst_low),
                             float(worst_high), checks)


def subcritical_certificate_k3(lambda_target=0.3, lambda_low=0.263):
    """The k=3, a=4 certificate with N=30 and theta=13.

    Checks ``sum_{x>=31} h(x) < 0.014``, ``(h P~_3)(y) <= 0.263 h(y)`` for
    ``4 <= y <= 30`` and ``<= lambda_target h(y)`` for ``y >= 31``.
    """
    rec = h_certificate(3, 4, 30, 13.0, lambda_low, lambda_target, tail_mass_max=0.014)
    rec.checks["h_decreasing"] = rec.h_decreasing
    if not rec.lambda_max < lambda_target <= 1 / 3:
        rec.checks["target_range"] = False
    return rec


def folded_chain_k3_a3():
    """The chain on {3, 4} with the 4 -> 5 move folded into 4 -> 4, and its
    largest eigenvalue ``(2 + sqrt 2)/10``."""
    kern = build_killed_kernel(3, 3, 4, fold=True)
    return kern, dominant_eigen(kern).lam


# -- classification --------------------------------------------------------

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"
INDETERMINATE = "indeterminate"

SCHEMA_VERSION = 1


@dataclass
class ClassificationReport:
    k: int
    a: int
    verdict: str
    lam: float
    N: int
    margin: float
    certificate: dict
    history: list
    note: str = ""

    def to_json_dict(self):
        return {
            "schemaVersion": SCHEMA_VERSION,
            "k": self.k,
            "a": self.a,
            "verdict": self.verdict,
            "lambda": self.lam,
            "N": self.N,
            "margin": self.margin,
            "certificate": self.certificate,
            "lambdaHistory": [[n, lam] for n, lam in self.history],
            "note": self.note,
        }


def auto_certificate(k, a, N, lam_N):
    """Certificate with targets halfway between ``lambda_N`` and ``1/k``."""
    target = 0.5 * (lam_N + 1.0 / k)
    theta = 2.0 * math.factorial(k - 1) / target
    extra = 60
    while theta / (N + extra + 2) ** (k - 1) >= 0.5:
        extra *= 2
    return h_certificate(k, a, N, theta, target, target, extra=extra)


def classify(k, a, N=None, tol=1e-6):
    """Sub/super/critical verdict for threshold ``a`` on the k-ary tree.

    ``N`` caps the truncation (default: double from 30 until stable).
    Supercritical needs ``k lambda_N > 1 + tol``; since truncation only
    removes mass, ``lambda_N`` is a lower bound. Subcritical needs a passing
    certificate. Critical is reported when ``|k lambda_N - 1| < tol``,
    lambda_N does not decrease with N, and no certificate exists; this is a
    measurement, not a proof.
    """
    if k < 2 or a < 2:
        raise ValueError("need k >= 2 and a >= 2")
    if N is None:
        lam, N, history = truncation_eigenvalue(k, a)
    else:
        history = []
        n = max(min(30, N), a + 1)
        while n < N:
            history.append((n, dominant_eigen(build_killed_kernel(k, a, n)).lam))
            n *= 2
        lam = dominant_eigen(build_killed_kernel(k, a, N)).lam
        history.append((N, lam))
    margin = k * lam - 1.0
    cert = {"checked": False, "worstMargin": None}
    if margin > tol:
        return ClassificationReport(k, a, SUPERCRITICAL, lam, N, margin, cert, history,
                                    "k*lambda_N > 1 with lambda_N a lower bound")
    rec = auto_certificate(k, a, N, lam)
    cert = {"checked": True, "worstMargin": float(rec.worst_margin), "passed": rec.passed,
            "lambdaTarget": rec.lambda_low, "theta": rec.theta}
    if rec.passed and margin < -tol:
        return ClassificationReport(k, a, SUBCRITICAL, lam, N, margin, cert, history,
                                    "h P <= lambda h certified with k*lambda < 1")
    drift_ok = all(b >= a_ - 1e-12 for (_, a_), (_, b) in zip(history, history[1:]))
    if abs(margin) < tol and drift_ok:
        return ClassificationReport(k, a, CRITICAL, lam, N, margin, cert, history,
                                    "k*lambda_N = 1 within tolerance; measured, not proved")
    return ClassificationReport(k, a, INDETERMINATE, lam, N, margin, cert, history,
                                "no certificate at this truncation")
