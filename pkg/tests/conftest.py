import numpy as np
import pytest

from hotspot_dw.initdata import Bump, BumpSum, ProblemSetup, regression_setup


@pytest.fixture(scope="session")
def reg2():
    return regression_setup(2)


@pytest.fixture(scope="session")
def reg1():
    return regression_setup(1)


@pytest.fixture(scope="session")
def reg3():
    return regression_setup(3)


def unit_bump(dim, radius=1.0, center=None):
    c = tuple([0.0] * dim) if center is None else tuple(center)
    return BumpSum.from_bumps(dim, [Bump(c, radius, 1.0)], normalize_l1=1.0)


def g_only(g):
    return ProblemSetup(BumpSum.zero(g.dim), g)


def rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
