import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pdsir.model import IncidenceCounts, ObservationGrid, Params  # noqa: E402

ACCEPTANCE_LINES = []

# Reference scenario: 1010 individuals, R0 about 2, ten intervals over six time units.
REF_Y = (12, 13, 21, 46, 91, 127, 156, 151, 88, 41)
REF_S0, REF_I0 = 1000, 10
REF_PARAMS = Params(0.00225, 1.0, 2.0)


@pytest.fixture
def ref_data():
    return IncidenceCounts(np.array(REF_Y)), ObservationGrid.uniform(6.0, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} -- {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
