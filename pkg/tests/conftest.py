import numpy as np
import pytest

from specpot import (
    BoundaryCondition,
    Circle,
    Interval,
    Potential,
    Torus2D,
    build_grid,
    solve_spectrum,
)


@pytest.fixture(scope="session")
def circle_grid():
    return build_grid(Circle(2.0 * np.pi), 256, BoundaryCondition.CLOSED)


@pytest.fixture(scope="session")
def dirichlet_grid():
    return build_grid(Interval(np.pi), 256, BoundaryCondition.DIRICHLET)


@pytest.fixture(scope="session")
def neumann_grid():
    return build_grid(Interval(np.pi), 256, BoundaryCondition.NEUMANN)


@pytest.fixture(scope="session")
def torus_grid():
    return build_grid(Torus2D(2.0 * np.pi, 2.0 * np.pi), 16, BoundaryCondition.CLOSED)


@pytest.fixture(scope="session")
def circle_zero_spec(circle_grid):
    return solve_spectrum(circle_grid, Potential.zero(circle_grid), 10)


@pytest.fixture(scope="session")
def dirichlet_zero_spec(dirichlet_grid):
    return solve_spectrum(dirichlet_grid, Potential.zero(dirichlet_grid), 10)


@pytest.fixture(scope="session")
def neumann_zero_spec(neumann_grid):
    return solve_spectrum(neumann_grid, Potential.zero(neumann_grid), 10)
