"""Shared pytest hooks.

The acceptance tests record one verdict line per criterion; echoing them
from the terminal-summary hook keeps them visible even though pytest
captures stdout during the tests themselves.
"""

from __future__ import annotations

import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ANNOUNCED", None) if mod is not None else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
