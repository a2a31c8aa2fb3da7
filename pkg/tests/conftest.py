import numpy as np
import pytest

from gfunc_rhp.continuation import NewtonOptions, newton_solve, scan_initializer
from gfunc_rhp.ffunction import nls_jump_function
from gfunc_rhp.validation import genus2_fixture

GENUS0_BETA = (2.2, 1.0, 0.0)


@pytest.fixture(scope="session")
def nls():
    return nls_jump_function()


@pytest.fixture(scope="session")
def genus0_scan(nls):
    return scan_initializer(GENUS0_BETA, nls)


@pytest.fixture(scope="session")
def genus0(nls, genus0_scan):
    return newton_solve(genus0_scan[0], GENUS0_BETA, nls, NewtonOptions(residual_tol=1e-12))


@pytest.fixture(scope="session")
def genus2_pair():
    return genus2_fixture(newton=NewtonOptions(residual_tol=1e-11))


@pytest.fixture(scope="session")
def genus2(genus2_pair):
    return genus2_pair[1]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240607)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion; printed at the end of the run."""

    def record(number, title, passed, detail=""):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}  {detail}".rstrip()
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
