from __future__ import annotations

from collections import OrderedDict
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

_criteria: OrderedDict[str, dict] = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            entry = _criteria.setdefault(str(number), {"title": title, "outcomes": []})
            entry.setdefault("nodeids", []).append(item.nodeid)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for entry in _criteria.values():
        if report.nodeid in entry.get("nodeids", ()):
            entry["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, entry in sorted(_criteria.items(), key=lambda kv: int(kv[0]) if kv[0].isdigit() else kv[0]):
        outcomes = entry["outcomes"]
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {number:>3}: {status:<7} {entry['title']} ({len(outcomes)} test(s))")


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES
