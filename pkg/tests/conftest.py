import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# nodeid -> first docstring line, and nodeid -> outcome, for acceptance tests
_labels: dict[str, str] = {}
_outcomes: dict[str, str] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        if "test_acceptance.py" in item.nodeid and item.function.__doc__:
            _labels[item.nodeid] = item.function.__doc__.strip().splitlines()[0]


def pytest_runtest_logreport(report):
    if report.nodeid not in _labels:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(report.nodeid, report.outcome)
        if report.outcome != "passed":
            _outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_outcomes, key=_labels.get):
        verdict = "PASS" if _outcomes[nodeid] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {_labels[nodeid]}")
