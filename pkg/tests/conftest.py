"""Shared pytest plumbing.

The acceptance module records one line per criterion; printing them in the
terminal summary keeps the verdicts visible even when everything passes.
"""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
