import pytest

# (criterion, passed, detail) lines filled in by test_acceptance.py
ACCEPTANCE = []


@pytest.fixture
def report():
    def _report(criterion: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} [{criterion}] {detail}"
        print(line)
        ACCEPTANCE.append(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
