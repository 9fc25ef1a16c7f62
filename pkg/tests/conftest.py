import math

import pytest

from qrefl.potential import CasimirVdWPotential
from qrefl.units import UnitContext

# He-3 on alpha-quartz reference system
C4 = 23600.0
L_TRANSITION = 100.0
A = 2.65
V0 = 9.6


@pytest.fixture(scope="session")
def ctx():
    return UnitContext()


@pytest.fixture(scope="session")
def quartz():
    return CasimirVdWPotential(C4, L_TRANSITION)


def rel(a, b):
    return abs(a - b) / abs(b)


def deg(x):
    return math.radians(x)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
