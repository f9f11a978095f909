import math

import numpy as np
import pytest
from hypothesis import settings

from starloc.scenario import Scenario
from starloc.star_ris import PowerConfig, dft_design

settings.register_profile("starloc", max_examples=50, deadline=None)
settings.load_profile("starloc")

EPS1 = math.sqrt(0.9)
ETA1 = math.sqrt(0.5)


@pytest.fixture(scope="session")
def paper_scenario():
    return Scenario.table1(m=16, n=36)


@pytest.fixture(scope="session")
def desk_scenario():
    return Scenario.table1(m=16, n=16)


@pytest.fixture(scope="session")
def power():
    return PowerConfig(EPS1, ETA1)


@pytest.fixture(scope="session")
def desk_schedule():
    return dft_design(16, 33)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = pytest.StashKey[dict]()
N_CRITERIA = 9


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """``report(number, passed, detail)`` records an acceptance verdict and asserts it."""
    results = request.config.stash[ACCEPTANCE]

    def report(number, passed, detail):
        results[number] = (bool(passed), detail)
        assert passed, f"criterion {number}: {detail}"

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, N_CRITERIA + 1):
        passed, detail = results.get(number, (False, "not evaluated"))
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
