import pytest

RESULTS: dict[int, str] = {}


@pytest.fixture
def record():
    """``record(n, ok, detail)`` stores one acceptance line and asserts ``ok``."""
    def _record(n: int, ok: bool, detail: str):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        RESULTS[n] = line
        print(line)
        assert ok, line
    return _record


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
