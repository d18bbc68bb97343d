import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from liqfuel.boundary import solve_boundary
from liqfuel.model import ImpactFunction, ModelParams
from liqfuel.value import ValueFunction

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# reference parameter set used throughout (configs/fig1.json)
FIG1 = dict(beta=1.0, sigma_hat=1.0, sigma=0.1, rho=0.0, gamma=0.1, mu=0.0, s_bar0=1.0)


@pytest.fixture(scope="session")
def params():
    return ModelParams(**FIG1)


@pytest.fixture(scope="session")
def f_exp():
    return ImpactFunction.exponential(1.0)


@pytest.fixture(scope="session")
def boundary(params, f_exp):
    return solve_boundary(params, f_exp, 50.0)


@pytest.fixture(scope="session")
def vf(boundary):
    return ValueFunction(boundary)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
