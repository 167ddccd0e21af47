import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from magvlasov.model import InitialData, ModeContext, PlasmaParams

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ORACLES = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def oracles():
    return ORACLES


@pytest.fixture
def unit_params():
    return PlasmaParams()


@pytest.fixture
def transverse(unit_params):
    return ModeContext.from_k((1, 0, 0), unit_params)


@pytest.fixture
def offcentre_data():
    return InitialData.single((1, 0, 0), center=(0.5, 0.3, 0.0))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
