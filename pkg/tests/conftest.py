import pytest

CRITERIA = {}


@pytest.fixture
def record():
    """``record(k, ok, detail)`` stores one acceptance line and prints it."""

    def _record(k, ok, detail):
        line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        CRITERIA[k] = line
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])
