import pytest

_lines = {}
_ORDER = ["1", "2", "3", "4", "5", "6a", "6b", "7", "8a", "8b", "9", "10"]


@pytest.fixture(scope="session")
def acceptance():
    """Recorder for the acceptance gate: one PASS/FAIL line per criterion."""
    def record(criterion, ok: bool, detail: str = ""):
        word = "PASS" if ok else "FAIL"
        _lines[str(criterion)] = f"criterion {criterion:>2}: {word}  {detail}"
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in _ORDER:
        if key in _lines:
            terminalreporter.line(_lines[key])
    for key in sorted(set(_lines) - set(_ORDER)):
        terminalreporter.line(_lines[key])
