import numpy as np
import pytest

from progadjust.rng import RngStream


@pytest.fixture
def stream():
    return RngStream(20240601, 0)


def mc_se(values):
    values = np.asarray(values)
    return values.std(ddof=1) / np.sqrt(values.size)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
