import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cascade_ldp import WeightModel  # noqa: E402


@pytest.fixture
def expo():
    return WeightModel.exponential()


@pytest.fixture
def twopoint():
    return WeightModel.two_point(0.5)


@pytest.fixture
def degenerate():
    return WeightModel.degenerate()


def pytest_terminal_summary(terminalreporter):
    # one pass/fail line per acceptance criterion
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
