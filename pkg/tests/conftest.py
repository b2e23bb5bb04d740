import re

import pytest

from fgmkit.flamelet import default_bc, stoichiometric_z
from fgmkit.mech import load_bundled

_CRITERIA = {}
_PATTERN = re.compile(r"test_criterion_(\d+)")


@pytest.fixture(scope="session")
def mech():
    return load_bundled("ch4_4step")


@pytest.fixture(scope="session")
def mech_oh():
    return load_bundled("ch4_6step_oh")


@pytest.fixture(scope="session")
def bc(mech):
    return default_bc(mech)


@pytest.fixture(scope="session")
def z_st(mech, bc):
    return stoichiometric_z(mech, bc)


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    failed = report.failed
    if report.when == "call" or failed:
        prev = _CRITERIA.get(n, (True, []))
        details = prev[1] + [v for k, v in report.user_properties if k == "detail"]
        _CRITERIA[n] = (prev[0] and not failed, details)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, details = _CRITERIA[n]
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}"
        if details:
            line += "  (" + "; ".join(dict.fromkeys(details)) + ")"
        terminalreporter.write_line(line)
