"""Shared fixtures: per-criterion pass/fail reporting for the acceptance suite."""
import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one summary line per acceptance criterion, then assert it."""

    def _record(num: int, name: str, ok: bool, detail: str = "") -> None:
        verdict = "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append(f"criterion {num} [{verdict}] {name}: {detail}")
        assert ok, f"criterion {num} ({name}): {detail}"

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
