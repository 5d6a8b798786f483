"""Shared pytest hooks for the test suite."""
import sys


def pytest_terminal_summary(terminalreporter):
    """Replay acceptance verdict lines after the run, one per criterion."""
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None) if module else None
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)
