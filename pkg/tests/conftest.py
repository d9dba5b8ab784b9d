import pytest

_RESULTS: dict = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion for the summary table."""

    def record(number, ok, detail):
        prev = _RESULTS.get(number)
        _RESULTS[number] = (bool(ok) and (prev is None or prev[0]), detail if prev is None else f"{prev[1]}; {detail}")
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 9):
        ok, detail = _RESULTS.get(n, (False, "not reached"))
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
