import pytest

_CRITERIA: list[str] = []


@pytest.fixture
def report_criterion():
    """Record one ``CRITERION n PASS/FAIL`` line; all lines are repeated in the terminal summary."""

    def record(label, ok: bool, detail: str = "") -> bool:
        line = f"CRITERION {label} {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        print(line)
        _CRITERIA.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
