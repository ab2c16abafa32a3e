import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from issforge.asm import Assembler  # noqa: E402
from issforge.toolchain import Toolchain  # noqa: E402

import checks  # noqa: E402


@pytest.fixture(scope="session")
def tc():
    return Toolchain.load()


@pytest.fixture(scope="session")
def tc_nospec():
    return Toolchain.load(specialize=False)


@pytest.fixture(scope="session")
def asm(tc):
    return Assembler(tc.flats)


@pytest.fixture(scope="session")
def flats(tc):
    return {f.name: f for f in tc.flats}


def pytest_terminal_summary(terminalreporter):
    if checks.ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in checks.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
