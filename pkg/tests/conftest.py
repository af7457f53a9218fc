"""Shared fixtures: a recorder that prints one line per acceptance criterion."""

import pytest

_criterion_lines = []


def _record(num: int, passed: bool, detail: str) -> None:
    line = "criterion %02d: %s - %s" % (num, "PASS" if passed else "FAIL", detail)
    _criterion_lines.append(line)
    print(line)


@pytest.fixture
def checklist():
    """Callable ``(num, passed, detail)`` feeding the end-of-run checklist."""
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _criterion_lines:
        return
    terminalreporter.section("acceptance checklist")
    for line in sorted(_criterion_lines):
        terminalreporter.write_line(line)
