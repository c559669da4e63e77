import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pipest.core import InertialParams  # noqa: E402


@pytest.fixture
def payload():
    """0.3 kg box-like payload offset from the sensor, inertia about the sensor origin."""
    mass = 0.3
    com = np.array([0.012, -0.008, 0.045])
    i_com = np.diag([4.1e-4, 3.3e-4, 2.2e-4]) + np.array(
        [[0.0, 1.5e-5, -2.0e-5], [1.5e-5, 0.0, 1.0e-5], [-2.0e-5, 1.0e-5, 0.0]]
    )
    shift = mass * (com @ com * np.eye(3) - np.outer(com, com))
    return InertialParams.from_matrix(mass, com, i_com + shift)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, with its measured values."""
    reports = [
        r for key in ("passed", "failed")
        for r in terminalreporter.stats.get(key, [])
        if r.when == "call" and "test_acceptance.py::" in r.nodeid
    ]
    if not reports:
        return
    terminalreporter.section("acceptance criteria")
    for r in sorted(reports, key=lambda r: r.nodeid):
        props = dict(r.user_properties)
        status = "PASS" if r.passed else "FAIL"
        terminalreporter.write_line(f"{status}  {props.get('criterion', r.nodeid)}  {props.get('measured', '')}")
