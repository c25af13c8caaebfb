import re

import pytest

TITLES = {
    1: "speed invariance under the circular field",
    2: "R^2 + S^2 = |x|^2 |v|^2 identity",
    3: "only the ray heading collides",
    4: "collision time from the ray",
    5: "per-class guarantees around one point",
    6: "guarantees under bounded disturbances",
    7: "speed envelope of the full planner",
    8: "goal convergence in a nonconvex course",
    9: "gain rescaling near the ray",
    10: "ratio bound and uniform barrier bound",
    11: "virtual agents",
    12: "steering force cost per tick",
}

_outcome: dict[int, bool] = {}
_notes: dict[int, list[str]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_ac(\d+)_", report.nodeid)
    if not m:
        return
    if report.when == "call" or report.outcome == "failed":
        ac = int(m.group(1))
        _outcome[ac] = _outcome.get(ac, True) and report.outcome == "passed"


def pytest_terminal_summary(terminalreporter):
    if not _outcome:
        return
    terminalreporter.section("acceptance criteria")
    for ac in sorted(_outcome):
        line = f"AC{ac:<3d}{'PASS' if _outcome[ac] else 'FAIL'}  {TITLES.get(ac, '')}"
        if _notes.get(ac):
            line += "  [" + "; ".join(_notes[ac]) + "]"
        terminalreporter.write_line(line)


@pytest.fixture
def note():
    """note(ac, text): attach a measured value to the criterion's summary line."""
    def add(ac: int, text: str):
        _notes.setdefault(ac, []).append(text)
    return add
