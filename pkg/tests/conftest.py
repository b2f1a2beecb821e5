"""Shared test plumbing: collects one pass/fail line per acceptance
criterion and prints them in the terminal summary."""

import pytest

_criterion_lines = []


@pytest.fixture
def criterion_report():
    """Record and assert a single acceptance-criterion verdict."""

    def record(num, ok, detail):
        line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
        _criterion_lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
