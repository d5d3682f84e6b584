import numpy as np
import pytest

from cgoptics.assembler import AsymptoticSolution
from cgoptics.models import get_model
from cgoptics.phase import build_phases
from cgoptics.transport import solve_transport

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def specs():
    return {k: get_model(k) for k in ("L1", "S1", "S2", "S3", "S4", "LA")}


@pytest.fixture(scope="session")
def phases(specs):
    return {k: build_phases(ms.model, ms.init, s0=ms.defaults["s0"]) for k, ms in specs.items()}


@pytest.fixture(scope="session")
def s1_transport(specs, phases):
    return solve_transport(specs["S1"].model, phases["S1"])


@pytest.fixture(scope="session")
def l1_solution(specs, phases):
    ms, ph = specs["L1"], phases["L1"]
    return AsymptoticSolution(ms.model, ph, solve_transport(ms.model, ph))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
