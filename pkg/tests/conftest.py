import numpy as np
import pytest

from dynakernel.ball_heat import Truncation, dirichlet_eigenbasis
from dynakernel.dyn_eigen import wentzell_eigenpairs


@pytest.fixture(scope="session")
def disk():
    return dirichlet_eigenbasis(2, Truncation())


@pytest.fixture(scope="session")
def ball3():
    return dirichlet_eigenbasis(3, Truncation())


@pytest.fixture(scope="session")
def wdisk():
    return wentzell_eigenpairs(2, Truncation())


@pytest.fixture(scope="session")
def wball3():
    return wentzell_eigenpairs(3, Truncation())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
