"""Shared pytest wiring.

The acceptance tests are named test_criterion_<n>_*; a terminal-summary hook
prints one CRITERION line per criterion so the suite's verdict can be read
off the bottom of the run.
"""

import re

_CRITERION_RE = re.compile(r"test_criterion_(\d+)")
_results = {}


def pytest_runtest_logreport(report):
    m = _CRITERION_RE.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call":
        _results[n] = report.outcome == "passed"
    elif report.failed:
        _results[n] = False


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        verdict = "PASS" if _results[n] else "FAIL"
        terminalreporter.write_line(f"CRITERION {n}: {verdict}")
