import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sarcover.scenario import default_scenario

settings.register_profile("sarcover", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("sarcover")


@pytest.fixture(scope="session")
def nominal():
    return default_scenario()


@pytest.fixture(scope="session")
def nominal_plain():
    # no sync/localisation overhead: the closed-form examples assume it away
    return default_scenario(r_sl=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
