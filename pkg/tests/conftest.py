import pytest

from fhn_ring.model import CubicNonlinearity, ModelParams

ACCEPTANCE_LINES = []


@pytest.fixture
def baseline():
    """delta=0.2, b=1, c=0.1, alpha=0.5, a=1, p=1, n=4."""
    return ModelParams(n=4, a=1.0, b=1.0, c=0.1, delta=0.2, p=1.0,
                       nonlinearity=CubicNonlinearity(0.5))


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
