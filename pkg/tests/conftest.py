import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE: dict = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or report.outcome != "passed":
        prev = _ACCEPTANCE.get(name, "PASS")
        _ACCEPTANCE[name] = "PASS" if prev == "PASS" and report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split("_")[1])):
        terminalreporter.write_line(f"ACCEPTANCE {name}: {_ACCEPTANCE[name]}")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240601)
