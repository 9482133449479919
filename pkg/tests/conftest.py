from __future__ import annotations

import pytest

from doublewell.grid_ops import build_grid
from doublewell.potential import PotentialSpec, Shape
from doublewell.sweep import solve_single_well

from oracles import KAPPA2_1D


@pytest.fixture(scope="session")
def square_spec():
    return PotentialSpec(Shape.SQUARE_WELL, a=1.0, lambda_sq=4.0)


@pytest.fixture(scope="session")
def well_1d(square_spec):
    """Square well states at h = 0.01 on the extended grid for d = 6."""
    grid = build_grid(1, 6.0, KAPPA2_1D, 0.01, square_spec.a)
    return grid, solve_single_well(square_spec, grid.single_well_grid(), 3)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
