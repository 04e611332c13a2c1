import numpy as np
import pytest

from koiterfsi.config import scenario_config
from koiterfsi.coupled import CoupledProblem
from koiterfsi.geometry import arc_geometry, channel_geometry

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, text: str) -> None:
    flag = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {flag}  {text}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def channel():
    return channel_geometry()


@pytest.fixture(scope="session")
def arc():
    return arc_geometry()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def free_problem():
    """Free scenario on a short horizon, shared by the quick coupled tests."""
    return CoupledProblem(scenario_config("free", T=0.1))


@pytest.fixture(scope="session")
def forced_problem():
    return CoupledProblem(scenario_config("forced", T=0.1))
