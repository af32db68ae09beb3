import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

from fixtures import ACCEPTANCE  # noqa: E402


def pytest_collection_modifyitems(items):
    # the run-wide criteria are judged after every other test has fed the monitor
    last = [it for it in items if it.name in ("test_criterion_05_dissipation", "test_criterion_06_herring")]
    items[:] = [it for it in items if it not in last] + last


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
