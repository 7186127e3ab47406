"""Shared test plumbing: collect acceptance-criterion verdict lines.

The acceptance tests record one line per criterion through the
`criterion_recorder` fixture; the lines are replayed after the run in a
dedicated terminal section so the verdicts are visible without -s.
"""

_CRITERION_LINES: list[str] = []


def _record(line: str) -> None:
    _CRITERION_LINES.append(line)
    print(line)


import pytest


@pytest.fixture
def criterion_recorder():
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERION_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)
