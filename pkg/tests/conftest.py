import re

import numpy as np
import pytest

from hexholo.signatures import one_two_signature

_CRITERIA: dict[int, str] = {}


def pytest_runtest_logreport(report):
    # acceptance tests are named test_criterion_<k>_...
    found = re.search(r"test_criterion_(\d+)_", report.nodeid)
    if not found or (report.when != "call" and report.outcome == "passed"):
        return
    k = int(found.group(1))
    ok = _CRITERIA.get(k, "PASS") == "PASS" and report.outcome == "passed"
    _CRITERIA[k] = "PASS" if ok else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {k:2d}: {_CRITERIA[k]}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def uniform_model():
    u = one_two_signature(1, 1, 1)
    return np.array([u, u])


@pytest.fixture(scope="session")
def critical_model():
    c = one_two_signature(4, 1, 1)
    return np.array([c, c])
