import numpy as np
import pytest

from dronemob.mobility import RS, RW, RWP, SL, Arc
from dronemob.stochastic import Exponential, Rayleigh

V = 12.5


@pytest.fixture(scope="session")
def flight():
    return Rayleigh.from_mean(500.0)


@pytest.fixture(scope="session")
def hover():
    return Exponential(5.0)


@pytest.fixture(scope="session")
def models(flight, hover):
    return {
        "SL": SL(V),
        "RS": RS(V, flight),
        "RW": RW(V, flight),
        "RWP": RWP(V, flight, hover),
        "ARC": Arc(V, 500.0),
    }


@pytest.fixture
def gen():
    return np.random.default_rng(12345)



def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", {})
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
