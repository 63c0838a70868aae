import pytest

ACCEPTANCE = {}


def record(number, title, passed, detail=""):
    """Store one acceptance line; printed in the terminal summary."""
    ACCEPTANCE[number] = (title, bool(passed), detail)


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}")
