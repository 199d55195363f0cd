import pytest

_ACCEPTANCE: list[tuple[int, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance outcome; the terminal summary prints them in order."""
    def record(number: int, passed: bool, detail: str) -> bool:
        _ACCEPTANCE.append((number, bool(passed), detail))
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
