import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nisio import (ConfigurationError, GridFunction, InvalidInputError,
                   UndefinedSeminormError, WeightedGrid, lip_seminorm,
                   weighted_norm)


def test_uniform_grid_points():
    g = WeightedGrid.uniform(-1.0, 1.0, 0.5)
    assert np.allclose(g.points, [-1.0, -0.5, 0.0, 0.5, 1.0])
    assert g.spacing == 0.5
    assert np.all(g.kappa == 1.0)


def test_periodic_grid_excludes_endpoint():
    g = WeightedGrid.uniform(0.0, 1.0, 0.25, periodic=True)
    assert len(g.points) == 4
    assert g.period == pytest.approx(1.0)


def test_grid_rejects_bad_spacing():
    with pytest.raises(ConfigurationError):
        WeightedGrid.uniform(0.0, 1.0, 0.3)
    with pytest.raises(ConfigurationError):
        WeightedGrid.uniform(0.0, 1.0, -0.1)


def test_kappa_must_be_positive():
    with pytest.raises(ConfigurationError):
        WeightedGrid.uniform(0.0, 1.0, 0.5, kappa=lambda x: x)  # zero at 0


def test_loggrid_symmetry_and_zero():
    g = WeightedGrid.loggrid(8.0, 0.01, 50)
    assert g.size == 101
    assert g.points[50] == 0.0
    assert np.allclose(g.points[:50], -g.points[:50:-1])


def test_weighted_norm_values():
    g = WeightedGrid.uniform(-2.0, 2.0, 0.01, kappa=lambda x: (1 + np.abs(x)) ** -2.0)
    u = GridFunction(g.points ** 2, g)
    # max of x^2/(1+|x|)^2 on [-2,2] sits at the ends: 4/9
    assert weighted_norm(u) == pytest.approx(4.0 / 9.0, abs=1e-12)


def test_weighted_norm_trivials():
    g = WeightedGrid.uniform(0.0, 1.0, 0.5)
    assert weighted_norm(GridFunction(np.zeros(3), g)) == 0.0
    assert weighted_norm(GridFunction(np.ones(3), g)) == 1.0


def test_nonfinite_values_rejected():
    g = WeightedGrid.uniform(0.0, 1.0, 0.5)
    with pytest.raises(InvalidInputError):
        GridFunction(np.array([0.0, np.nan, 1.0]), g)
    with pytest.raises(InvalidInputError):
        GridFunction(np.array([0.0, np.inf, 1.0]), g)


def test_lip_seminorm_basics():
    g = WeightedGrid.uniform(-3.0, 3.0, 0.01)
    assert lip_seminorm(GridFunction(np.full(g.size, 4.2), g)) == 0.0
    assert lip_seminorm(GridFunction(g.points.copy(), g)) == pytest.approx(1.0)
    # max |cos| at grid midpoints is 1 up to O(dx^2)
    u = GridFunction(np.sin(g.points), g)
    assert lip_seminorm(u) == pytest.approx(1.0, abs=1e-4)


def test_lip_seminorm_single_point_rejected():
    g = WeightedGrid.labels(1)
    with pytest.raises(UndefinedSeminormError):
        lip_seminorm(GridFunction(np.array([1.0]), g))


def test_lip_seminorm_labels_uses_discrete_metric():
    g = WeightedGrid.labels(4)
    u = GridFunction(np.array([0.0, 5.0, 1.0, 2.0]), g)
    assert lip_seminorm(u) == 5.0


def test_window_mask():
    g = WeightedGrid.uniform(-4.0, 4.0, 1.0)
    assert g.window_mask(-2, 2).sum() == 5


def test_nearest_index_ties_left():
    g = WeightedGrid.uniform(0.0, 1.0, 0.25)
    # exact midpoint 0.125 between nodes 0 and 1 goes left
    assert g.nearest_index(np.array([0.125]))[0] == 0
    assert g.nearest_index(np.array([0.13]))[0] == 1
    assert g.nearest_index(np.array([-5.0, 5.0])).tolist() == [0, 4]


def test_interp_constant_extrapolation():
    g = WeightedGrid.uniform(0.0, 1.0, 0.5)
    u = GridFunction(np.array([1.0, 2.0, 3.0]), g)
    assert u.at(np.array([-1.0, 2.0])).tolist() == [1.0, 3.0]
    assert u.at(np.array([0.25]))[0] == pytest.approx(1.5)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=40))
def test_weighted_norm_is_a_norm(vals):
    g = WeightedGrid.uniform(0.0, 1.0, 1.0 / (len(vals) - 1),
                             kappa=lambda x: 1.0 / (1.0 + x))
    u = GridFunction(np.asarray(vals), g)
    v = GridFunction(np.asarray(vals[::-1]), g)
    assert weighted_norm(u) >= 0.0
    both = u.with_values(u.values + v.values)
    assert weighted_norm(both) <= weighted_norm(u) + weighted_norm(v) + 1e-12
    assert weighted_norm(u.with_values(2.0 * u.values)) == pytest.approx(
        2.0 * weighted_norm(u), rel=1e-12)
