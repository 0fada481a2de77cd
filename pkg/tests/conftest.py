import pytest

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record the outcome of an acceptance criterion and fail the test if it does not hold."""

    def record(number: int, ok: bool, detail: str):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}"
        _CRITERIA[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
