import pytest

REPORT = []


@pytest.fixture
def report():
    return REPORT


def pytest_terminal_summary(terminalreporter):
    if not REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(REPORT, key=lambda l: int(l.split()[1])):
        terminalreporter.write_line(line)
