import pytest

from lamqsd.verify import SUITES, Check, run_suites


@pytest.mark.parametrize("suite", ["eigen", "qsd", "martingale", "certificate"])
def test_suite_passes(suite):
    checks = run_suites([suite])
    assert checks and all(isinstance(c, Check) for c in checks)
    failed = [c for c in checks if not c.passed]
    assert not failed, failed


def test_geometry_suite_structure():
    checks = run_suites(["geometry"], seed=1, splits=100_000)
    names = [c.name for c in checks]
    assert "disjointness vs Cartesian oracle" in names
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]


def test_suite_names():
    assert set(SUITES) == {"eigen", "qsd", "martingale", "certificate", "geometry"}
