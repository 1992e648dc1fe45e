import pytest


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance_report(request):
    """Collects one PASS/FAIL line per acceptance criterion; the lines are
    printed in a dedicated section at the end of the run so they stay
    visible regardless of output capture."""
    lines = request.config._acceptance_lines

    def report(criterion: str, ok: bool, detail: str) -> None:
        lines.append(f"[ACCEPTANCE] {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
