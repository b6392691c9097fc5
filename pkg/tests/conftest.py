import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from thermopf.case import load_case  # noqa: E402
from thermopf.thermal import assemble_system, steady_point  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def case33():
    return load_case("case33")


@pytest.fixture(scope="session")
def system33(case33):
    return assemble_system(case33.geometry, case33.params)


@pytest.fixture(scope="session")
def point33(case33, system33):
    return steady_point(system33, case33.fan_speed, case33.squared_current)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
