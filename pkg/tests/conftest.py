import numpy as np
import pytest

from nisio import (ChainOperator, FamilyBounds, HeatOperator,
                   SemigroupFamily, WeightedGrid)


@pytest.fixture(scope="session")
def heat_grid():
    return WeightedGrid.uniform(-8.0, 8.0, 0.01, boundary="reflect")


@pytest.fixture(scope="session")
def heat_family(heat_grid):
    return SemigroupFamily([HeatOperator(heat_grid, 0.5), HeatOperator(heat_grid, 1.0)],
                           FamilyBounds(0.0, 0.0))


@pytest.fixture(scope="session")
def coarse_grid():
    return WeightedGrid.uniform(-8.0, 8.0, 0.02, boundary="reflect")


@pytest.fixture(scope="session")
def coarse_family(coarse_grid):
    return SemigroupFamily([HeatOperator(coarse_grid, 0.5), HeatOperator(coarse_grid, 1.0)],
                           FamilyBounds(0.0, 0.0))


@pytest.fixture(scope="session")
def log_grid():
    return WeightedGrid.loggrid(8.0, 1e-2, 800,
                                kappa=lambda x: (1.0 + np.abs(x)) ** -2.0,
                                boundary="reflect")


@pytest.fixture(scope="session")
def ou_grid():
    return WeightedGrid.uniform(-8.0, 8.0, 0.01, boundary="reflect")


@pytest.fixture(scope="session")
def periodic_grid():
    return WeightedGrid.uniform(-np.pi, np.pi, 2.0 * np.pi / 256.0, periodic=True)


@pytest.fixture(scope="session")
def label_grid():
    return WeightedGrid.labels(4)


# birth-death chain with both ends reflecting; conservative
Q_BD = np.array([
    [-1.0, 1.0, 0.0, 0.0],
    [0.5, -1.0, 0.5, 0.0],
    [0.0, 0.5, -1.0, 0.5],
    [0.0, 0.0, 1.0, -1.0],
])
# conservative chain with an absorbing top state
Q_ABS = np.array([
    [-1.0, 1.0, 0.0, 0.0],
    [0.5, -1.0, 0.5, 0.0],
    [0.0, 0.5, -1.0, 0.5],
    [0.0, 0.0, 0.0, 0.0],
])
Q_MIX = np.array([
    [-0.5, 0.25, 0.25, 0.0],
    [0.25, -0.5, 0.0, 0.25],
    [0.25, 0.0, -0.5, 0.25],
    [0.0, 0.25, 0.25, -0.5],
])


@pytest.fixture(scope="session")
def chain_family(label_grid):
    return SemigroupFamily([ChainOperator(label_grid, Q_BD),
                            ChainOperator(label_grid, Q_MIX)],
                           FamilyBounds(0.0, 2.0))
