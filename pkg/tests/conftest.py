import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_OUTCOMES: dict[int, str] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _OUTCOMES[n] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    import test_acceptance

    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        detail = test_acceptance.DETAILS.get(n, "")
        terminalreporter.write_line(f"criterion {n}: {_OUTCOMES[n]}" + (f"  ({detail})" if detail else ""))
