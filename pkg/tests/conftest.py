import warnings

import pytest

from hermanlab.cf import ContinuedFraction
from hermanlab.solver import rotation_candidate, solve_bbm_parameter, solve_herman_parameter

warnings.filterwarnings("ignore", message="The TBB threading layer")

C_STAR = -0.386631 - 0.320505j
Q_STAR = -1.26 + 2.94j


@pytest.fixture(scope="session")
def golden():
    return ContinuedFraction.golden()


@pytest.fixture(scope="session")
def cand24(golden):
    return solve_herman_parameter(2, 4, golden, depth=16)


@pytest.fixture(scope="session")
def cand22(golden):
    return solve_herman_parameter(2, 2, golden, depth=16)


@pytest.fixture(scope="session")
def cand_bbm(golden):
    return solve_bbm_parameter(golden, depth=14)


@pytest.fixture(scope="session")
def rot(golden):
    return rotation_candidate(golden, depth=14)


ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line[1])
