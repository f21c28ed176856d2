import os

import pytest

from hrebeca import Program, bundled_model

SLOW = os.environ.get("HREBECA_SLOW") == "1"


def pytest_collection_modifyitems(config, items):
    if SLOW:
        return
    skip = pytest.mark.skip(reason="set HREBECA_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def heater():
    return Program.from_text(bundled_model("heater"))


@pytest.fixture(scope="session")
def heater_src():
    return bundled_model("heater")


# one summary line per acceptance criterion
_verdicts = []


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _verdicts.append((report.nodeid.split("::")[-1], report.outcome.upper()))


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _verdicts:
        terminalreporter.write_line(f"{'PASS' if outcome == 'PASSED' else outcome:8s} {name}")
