import numpy as np
import pytest

from xlrkit.structures import PredictionStructure


@pytest.fixture
def rng():
    return np.random.default_rng(20191)


@pytest.fixture
def ipp4():
    """IPP structure with period 4: IDR0 P1 P2 P3 | IDR4 ..."""
    return PredictionStructure.preset("ipp", 4)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
