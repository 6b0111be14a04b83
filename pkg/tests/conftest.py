import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from obstacle_mcf.grid import make_grid  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def unit_grid():
    return make_grid(33, 33, (0.0, 1.0, 0.0, 1.0))


@pytest.fixture
def box_grid():
    return make_grid(65, 65, (-1.0, 1.0, -1.0, 1.0))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
