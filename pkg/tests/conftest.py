import pytest

# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def record():
    def _record(number: int, name: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE_LINES[number] = f"{'PASS' if passed else 'FAIL'}  {number:>2}. {name}: {detail}"
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
