import os
import subprocess
import sys

import mpmath
import numpy as np
import pytest

# one "[PASS]/[FAIL] criterion ..." line per acceptance criterion
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def chi2_sf(stat, df):
    """Upper tail of the chi-square law."""
    return float(mpmath.gammainc(df / 2.0, stat / 2.0, mpmath.inf, regularized=True))


def chi2_gof(counts, probs):
    counts = np.asarray(counts, float)
    expected = counts.sum() * np.asarray(probs, float)
    stat = float(((counts - expected) ** 2 / expected).sum())
    return chi2_sf(stat, len(counts) - 1)


def run_cli(args, env=None, cwd=None):
    full = dict(os.environ)
    full.update(env or {})
    return subprocess.run([sys.executable, "-m", "lamqsd", *args], capture_output=True,
                          text=True, env=full, cwd=cwd)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
