import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from crystaldit.chem import atomic_number
from crystaldit.tensorize import CrystalStructure

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROCKSALT = [(0, 0, 0), (0, .5, .5), (.5, 0, .5), (.5, .5, 0),
            (.5, .5, .5), (.5, 0, 0), (0, .5, 0), (0, 0, .5)]


def cubic(a, symbols, coords):
    return CrystalStructure(np.eye(3) * a, [atomic_number(s) for s in symbols], coords)


@pytest.fixture
def nacl():
    return cubic(5.64, ["Na"] * 4 + ["Cl"] * 4, ROCKSALT)


# lines collected by the acceptance suite and echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
