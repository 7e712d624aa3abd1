import numpy as np
import pytest
from hypothesis import settings

from critsos.critical import Problem

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

MOTZKIN = "1 + x^4*y^2 + x^2*y^4 - 3*x^2*y^2"
MARSHALL = "6*x^2 + 8*x^3 + 3*x^4"


@pytest.fixture
def paraboloid():
    return Problem.from_strings("xyz", "x", ["x - y^2 - z^2"])


@pytest.fixture
def motzkin():
    return Problem.from_strings("xy", MOTZKIN)


@pytest.fixture
def marshall():
    return Problem.from_strings("x", MARSHALL)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
