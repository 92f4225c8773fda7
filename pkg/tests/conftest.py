import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_spd_tridiag(rng, n):
    """Random diagonally dominant symmetric tridiagonal (diag, sub)."""
    c = rng.normal(size=n - 1)
    v = np.abs(rng.normal(size=n)) + 0.1
    v[:-1] += np.abs(c)
    v[1:] += np.abs(c)
    return v, c


_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE.extend(line for line in report.capstdout.splitlines() if line.startswith("AC"))


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s[2:].split()[0])):
            terminalreporter.write_line(line)
