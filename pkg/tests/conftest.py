import math

import pytest

from vpl.geometry import RotationParams
from vpl.grid import PolarGrid
from vpl.maximizer import default_initial_guess, solve_patch


@pytest.fixture(scope="session")
def patch_1e3():
    """Converged lam = 1e3, omega = 1/pi maximizer on the default grid."""
    params = RotationParams(1.0 / math.pi, 1e3)
    grid = PolarGrid(256, 512)
    return solve_patch(params, default_initial_guess(grid, params))


@pytest.fixture(scope="session")
def patch_small():
    """Cheap lam = 10 maximizer on a 48x96 grid for evolution tests."""
    params = RotationParams(1.0 / math.pi, 10.0)
    grid = PolarGrid(48, 96)
    return solve_patch(params, default_initial_guess(grid, params))


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def verdict():
    """Record and print one ``PASS``/``FAIL`` line per acceptance criterion."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
