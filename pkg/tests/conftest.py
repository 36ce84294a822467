import pytest

_ACCEPTANCE = {}


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(criterion, passed, detail=""):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
        _ACCEPTANCE[criterion] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[key])
