import numpy as np
import pytest

from diracforge import PhaseSpace, ReducibleSystem

ACCEPTANCE_RESULTS = []


def record_criterion(number, passed, description):
    ACCEPTANCE_RESULTS.append((number, bool(passed), description))
    assert passed, f"acceptance criterion {number} failed: {description}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, description in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status} - {description}")


@pytest.fixture
def toy_system():
    """Three linear constraints with one dependency: chi = (q1, p1, q1 + p1)."""
    space = PhaseSpace(2)
    chi = [space.q(0), space.p(0), space.q(0) + space.p(0)]
    return ReducibleSystem(space, chi, [np.array([[1.0, 1.0, -1.0]])])
