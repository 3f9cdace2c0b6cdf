"""Shared pytest plumbing.

The acceptance tests record one verdict line per release criterion; the
terminal-summary hook prints them after the run so they survive output
capture and show up in piped logs.
"""

ACCEPTANCE_LINES: list[str] = []


def record_verdict(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
