import pytest

# filled by tests/test_acceptance.py: (number, title, status, seconds, detail)
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, status, secs, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"[{status}] criterion {num}: {title} ({secs:.2f}s) {detail}")


@pytest.fixture
def acceptance_lines():
    return ACCEPTANCE_LINES
