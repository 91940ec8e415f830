import math

import pytest

from cpbalance import Gains, SystemParams

OMEGA = 3.2


@pytest.fixture
def nominal():
    """omega = 3.2 1/s, tau = 0.1 s, k = 2 on the capture-point line."""
    return SystemParams(OMEGA, 0.1), Gains.cp_line(2.0, OMEGA)


def params_wt(wt, omega=OMEGA):
    return SystemParams(omega, wt / omega)


LN2, LN25, LN3 = math.log(2.0), math.log(2.5), math.log(3.0)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def record(n: int, passed: bool, detail: str) -> bool:
    ACCEPTANCE[n] = f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE[n])
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
