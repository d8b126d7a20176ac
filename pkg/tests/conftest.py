import pytest

from helpers import g2_network, h_network


@pytest.fixture
def h_net():
    return h_network()


@pytest.fixture
def g2_net():
    return g2_network()


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
