import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nisio import (ChainOperator, ConfigurationError, GBMOperator, GridFunction,
                   HeatOperator, InvalidInputError, KoopmanOperator,
                   NumericalDegeneracyError, OUOperator, ScaledOperator,
                   StableOperator, WeightedGrid,
                   generator_apply, lip_seminorm, quadrature_tolerance,
                   weighted_norm)
from nisio.probes import probe_function

from conftest import Q_BD


def winmax(grid, values, lo, hi):
    return float(np.max(np.abs(values)[grid.window_mask(lo, hi)]))


# ---------------------------------------------------------------------------
# shared member contracts
# ---------------------------------------------------------------------------

def _all_members(heat_grid, log_grid, ou_grid, periodic_grid, label_grid):
    return [
        HeatOperator(heat_grid, 0.7),
        GBMOperator(log_grid, 0.1, 0.2),
        OUOperator(ou_grid, -0.5, 0.2, 1.0),
        KoopmanOperator(ou_grid, lambda x: -x, 1.0),
        StableOperator(periodic_grid, 0.5),
        ChainOperator(label_grid, Q_BD),
        ScaledOperator(HeatOperator(heat_grid, 1.0), 0.5),
    ]


def test_identity_at_zero(heat_grid, log_grid, ou_grid, periodic_grid, label_grid):
    for op in _all_members(heat_grid, log_grid, ou_grid, periodic_grid, label_grid):
        u = probe_function("sin", op.grid)
        assert op.apply(0.0, u) is u


def test_mass_preserved(heat_grid, log_grid, ou_grid, periodic_grid, label_grid):
    for op in _all_members(heat_grid, log_grid, ou_grid, periodic_grid, label_grid):
        one = probe_function("const", op.grid)
        for t in (0.01, 0.25, 1.0):
            out = op.apply(t, one).values
            assert np.max(np.abs(out - 1.0)) < 1e-12, op.name


def test_monotone_and_linear(heat_grid, log_grid, ou_grid, periodic_grid, label_grid):
    rng = np.random.default_rng(1)
    for op in _all_members(heat_grid, log_grid, ou_grid, periodic_grid, label_grid):
        n = op.grid.size
        u = rng.standard_normal(n)
        v = u + rng.random(n)
        au = op.apply_values(0.3, u)
        av = op.apply_values(0.3, v)
        slack = float(np.min(av - au))
        tol = 1e-12 if not isinstance(op, StableOperator) else 1e-10
        assert slack >= -tol, op.name
        lin = op.apply_values(0.3, 2.0 * u - 0.5 * v)
        assert np.allclose(lin, 2.0 * au - 0.5 * av, atol=1e-10), op.name


def test_negative_duration_rejected(heat_grid):
    op = HeatOperator(heat_grid, 1.0)
    with pytest.raises(InvalidInputError):
        op.apply(-0.1, probe_function("sin", heat_grid))


def test_composition_defect_small(heat_family):
    assert quadrature_tolerance(heat_family) <= 1e-10


# ---------------------------------------------------------------------------
# heat
# ---------------------------------------------------------------------------

def test_heat_second_moment(heat_grid):
    op = HeatOperator(heat_grid, 1.0)
    u = probe_function("quadratic", heat_grid)
    out = op.apply(0.5, u).values
    assert winmax(heat_grid, out - (heat_grid.points ** 2 + 0.5), -2, 2) < 1e-9


def test_heat_fourier_mode(heat_grid):
    op = HeatOperator(heat_grid, 1.0)
    u = probe_function("cos", heat_grid)
    out = op.apply(1.0, u).values
    oracle = np.exp(-0.5) * np.cos(heat_grid.points)
    assert winmax(heat_grid, out - oracle, -2, 2) < 1e-6


def test_heat_small_variance_stencil(heat_grid):
    # below one cell the moment-matched stencil takes over; x^2 stays exact
    op = HeatOperator(heat_grid, 0.5)
    t = 1e-4 / 0.25 / 2.0   # var = 5e-5 < dx^2 = 1e-4
    u = probe_function("quadratic", heat_grid)
    out = op.apply(t, u).values
    assert winmax(heat_grid, out - (heat_grid.points ** 2 + 0.25 * t), -6, 6) < 1e-12


def test_heat_sigma_zero_is_identity(heat_grid):
    op = HeatOperator(heat_grid, 0.0)
    u = probe_function("sin", heat_grid)
    assert np.array_equal(op.apply(0.7, u).values, u.values)


# ---------------------------------------------------------------------------
# geometric member on the log grid
# ---------------------------------------------------------------------------

def _gbm_window(log_grid, sigma, t):
    # rows whose kernel band stays inside the log lattice
    margin = 10.0 * sigma * np.sqrt(t) + 0.15
    lo = 1e-2 * np.exp(margin)
    hi = 8.0 * np.exp(-margin)
    m = (np.abs(log_grid.points) >= lo) & (np.abs(log_grid.points) <= hi)
    assert m.any()
    return m


def test_gbm_mean(log_grid):
    op = GBMOperator(log_grid, 0.1, 0.2)
    u = probe_function("linear", log_grid)
    out = op.apply(1.0, u).values
    err = np.abs(out - log_grid.points * np.exp(0.1))
    assert np.max(err[_gbm_window(log_grid, 0.2, 1.0)]) < 1e-8


def test_gbm_second_moment(log_grid):
    op = GBMOperator(log_grid, 0.1, 0.2)
    u = probe_function("quadratic", log_grid)
    out = op.apply(1.0, u).values
    err = np.abs(out - log_grid.points ** 2 * np.exp(0.24))
    assert np.max(err[_gbm_window(log_grid, 0.2, 1.0)]) < 1e-7


def test_gbm_zero_is_fixed_point(log_grid):
    op = GBMOperator(log_grid, 0.3, 0.4)
    u = probe_function("sin", log_grid)
    i0 = log_grid.size // 2
    assert op.apply(1.0, u).values[i0] == u.values[i0]


def test_gbm_weighted_norm_growth(log_grid):
    # growth rate of the weighted norm is at most p*(|mu| + sigma^2/2)
    mu, sigma, p = 0.1, 0.2, 2.0
    op = GBMOperator(log_grid, mu, sigma)
    beta = abs(mu) + 0.5 * sigma ** 2
    u = probe_function("quadratic", log_grid)
    for t in (0.25, 1.0):
        grow = weighted_norm(op.apply(t, u)) / weighted_norm(u)
        assert grow <= np.exp(p * beta * t) + 1e-6


# ---------------------------------------------------------------------------
# linear-drift Gaussian member
# ---------------------------------------------------------------------------

def test_ou_degenerate_identity(ou_grid):
    op = OUOperator(ou_grid, 0.0, 0.0, 0.0)
    u = probe_function("sin", ou_grid)
    assert np.allclose(op.apply(0.5, u).values, u.values, atol=1e-14)


def test_ou_pure_drift(ou_grid):
    op = OUOperator(ou_grid, 0.0, 1.0, 0.0)
    u = probe_function("linear", ou_grid)
    out = op.apply(0.5, u).values
    mask = ou_grid.window_mask(-7, 7)
    assert np.max(np.abs(out - (ou_grid.points + 0.5))[mask]) < 1e-12


def test_ou_brownian_moment(ou_grid):
    op = OUOperator(ou_grid, 0.0, 0.0, 1.0)
    u = probe_function("quadratic", ou_grid)
    out = op.apply(1.0, u).values
    assert winmax(ou_grid, out - (ou_grid.points ** 2 + 1.0), -2, 2) < 1e-6


def test_ou_mean_reversion_moments(ou_grid):
    b, m, c, t = -0.5, 0.2, 1.0, 0.7
    op = OUOperator(ou_grid, b, m, c)
    M, drift, cov = op.moments(t)
    assert M[0, 0] == pytest.approx(np.exp(b * t), rel=1e-12)
    assert drift[0] == pytest.approx(m / b * (np.exp(b * t) - 1.0), rel=1e-9)
    assert cov[0, 0] == pytest.approx(c / (2 * abs(b)) * (1 - np.exp(2 * b * t)), rel=1e-9)


def test_ou_rejects_non_psd(ou_grid):
    with pytest.raises(ConfigurationError):
        OUOperator(ou_grid, 0.0, 0.0, -1.0)


def test_ou_2d_drift_and_diffusion():
    g = WeightedGrid.tensor([-5.0, -5.0], [5.0, 5.0], 51)
    drift = OUOperator(g, np.zeros((2, 2)), [0.5, -0.25], np.zeros((2, 2)))
    u = GridFunction(g.points[:, 0] + g.points[:, 1], g)
    out = drift.apply(1.0, u).values
    inner = g.window_mask([-4, -4], [4, 4])
    assert np.max(np.abs(out - (u.values + 0.25))[inner]) < 1e-10

    diff = OUOperator(g, np.zeros((2, 2)), [0.0, 0.0], np.diag([1.0, 0.5]))
    uq = GridFunction(g.points[:, 0] ** 2 + g.points[:, 1] ** 2, g)
    out = diff.apply(0.25, uq).values
    mid = g.window_mask([-2, -2], [2, 2])
    assert np.max(np.abs(out - (uq.values + 1.5 * 0.25))[mid]) < 1e-6


def test_ou_2d_anisotropic_degenerate_rejected():
    g = WeightedGrid.tensor([-5.0, -5.0], [5.0, 5.0], 51)
    op = OUOperator(g, np.zeros((2, 2)), [0.0, 0.0], np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(NumericalDegeneracyError):
        op.matrix(0.25)


# ---------------------------------------------------------------------------
# deterministic flow member
# ---------------------------------------------------------------------------

def test_koopman_zero_field(ou_grid):
    op = KoopmanOperator(ou_grid, lambda x: np.zeros_like(x))
    u = probe_function("sin", ou_grid)
    assert np.allclose(op.apply(1.0, u).values, u.values, atol=1e-14)


def test_koopman_linear_flow(ou_grid):
    op = KoopmanOperator(ou_grid, lambda x: -x, 1.0)
    u = probe_function("linear", ou_grid)
    out = op.apply(1.0, u).values
    assert np.max(np.abs(out - ou_grid.points * np.exp(-1.0))) < 1e-8


def test_koopman_translation(ou_grid):
    op = KoopmanOperator(ou_grid, lambda x: np.ones_like(x))
    u = probe_function("linear", ou_grid)
    out = op.apply(0.5, u).values
    mask = ou_grid.window_mask(-7, 7)
    assert np.max(np.abs(out - (ou_grid.points + 0.5))[mask]) < 1e-10


def test_koopman_exit_flagging():
    g = WeightedGrid.uniform(-1.0, 1.0, 0.01)
    op = KoopmanOperator(g, lambda x: np.ones_like(x))
    op.apply(0.5, probe_function("linear", g))
    assert op.exit_counts[0.5] > 0


def test_koopman_lipschitz_flow(ou_grid):
    beta = 1.3   # max |-1 + 0.3 cos x|
    op = KoopmanOperator(ou_grid, lambda x: -x + 0.3 * np.sin(x), beta)
    u = probe_function("sin", ou_grid)
    for t in (0.25, 1.0):
        assert lip_seminorm(op.apply(t, u)) <= np.exp(beta * t) * lip_seminorm(u) + 1e-9


# ---------------------------------------------------------------------------
# spectral jump member
# ---------------------------------------------------------------------------

def test_stable_single_mode(periodic_grid):
    op = StableOperator(periodic_grid, 0.5)
    u = GridFunction(np.cos(2.0 * periodic_grid.points), periodic_grid)
    out = op.apply(1.0, u).values
    oracle = np.exp(-2.0) * np.cos(2.0 * periodic_grid.points)
    assert np.max(np.abs(out - oracle)) < 1e-6


def test_stable_zero_time_identity(periodic_grid):
    op = StableOperator(periodic_grid, 0.9)
    u = probe_function("sin", periodic_grid)
    assert op.apply(0.0, u) is u


def test_stable_requires_periodic(ou_grid):
    with pytest.raises(ConfigurationError):
        StableOperator(ou_grid, 0.5)


def test_stable_alpha_range(periodic_grid):
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(ConfigurationError):
            StableOperator(periodic_grid, bad)


# ---------------------------------------------------------------------------
# finite-state member
# ---------------------------------------------------------------------------

def test_chain_zero_rate():
    g = WeightedGrid.labels(3)
    op = ChainOperator(g, np.zeros((3, 3)))
    u = GridFunction(np.array([1.0, 2.0, 3.0]), g)
    assert np.array_equal(op.apply(1.0, u).values, u.values)


def test_chain_two_state_closed_form():
    g = WeightedGrid.labels(2)
    op = ChainOperator(g, np.array([[-1.0, 1.0], [1.0, -1.0]]))
    u = GridFunction(np.array([1.0, 0.0]), g)
    for t in (0.1, 0.7, 2.5):
        out = op.apply(t, u).values
        oracle = np.array([(1 + np.exp(-2 * t)) / 2, (1 - np.exp(-2 * t)) / 2])
        assert np.allclose(out, oracle, atol=1e-12)


def test_chain_rejects_bad_rates():
    g = WeightedGrid.labels(2)
    with pytest.raises(ConfigurationError):
        ChainOperator(g, np.array([[1.0, -1.0], [0.0, 0.0]]))
    with pytest.raises(ConfigurationError):
        ChainOperator(g, np.array([[-1.0, 0.5], [0.0, 0.0]]))  # not conservative
    op = ChainOperator(g, np.array([[-1.0, 0.5], [0.0, 0.0]]),
                       allow_nonconservative=True)
    assert not op.conservative


# ---------------------------------------------------------------------------
# time dilation
# ---------------------------------------------------------------------------

def test_scaled_member(heat_grid):
    base = HeatOperator(heat_grid, 1.0)
    u = probe_function("quadratic", heat_grid)
    assert ScaledOperator(base, 0.0).apply(5.0, u) is not None
    assert np.array_equal(ScaledOperator(base, 0.0).apply_values(5.0, u.values), u.values)
    assert np.array_equal(ScaledOperator(base, 1.0).apply(0.3, u).values,
                          base.apply(0.3, u).values)
    out = ScaledOperator(base, 4.0).apply(0.25, u).values
    assert winmax(heat_grid, out - (heat_grid.points ** 2 + 1.0), -2, 2) < 1e-6


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def test_generator_heat(heat_grid):
    res = generator_apply(HeatOperator(heat_grid, 1.0), probe_function("quadratic", heat_grid))
    assert np.max(np.abs(res.values[res.valid] - 1.0)) < 1e-9


def test_generator_koopman(ou_grid):
    res = generator_apply(KoopmanOperator(ou_grid, lambda x: -x),
                          probe_function("linear", ou_grid))
    assert np.max(np.abs(res.values[res.valid] + ou_grid.points[res.valid])) < 1e-10


def test_generator_chain(label_grid):
    u = GridFunction(np.array([0.0, 1.0, 4.0, 9.0]), label_grid)
    res = generator_apply(ChainOperator(label_grid, Q_BD), u)
    assert np.array_equal(res.values, Q_BD @ u.values)
    assert res.valid.all()


def test_generator_gbm_matches_form(log_grid):
    mu, sigma = 0.1, 0.2
    res = generator_apply(GBMOperator(log_grid, mu, sigma),
                          probe_function("quadratic", log_grid))
    x = log_grid.points
    oracle = 2.0 * mu * x ** 2 + sigma ** 2 * x ** 2
    err = np.abs(res.values - oracle)[res.valid] * log_grid.kappa[res.valid]
    assert np.max(err) < 1e-4


def test_generator_stable_single_mode(periodic_grid):
    op = StableOperator(periodic_grid, 0.5)
    u = GridFunction(np.cos(2.0 * periodic_grid.points), periodic_grid)
    res = generator_apply(op, u)
    assert np.allclose(res.values, -2.0 * u.values, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(arrays(np.float64, 81, elements=st.floats(-5, 5)))
def test_heat_monotone_random(vals):
    g = WeightedGrid.uniform(-4.0, 4.0, 0.1, boundary="reflect")
    op = HeatOperator(g, 1.0)
    lo = op.apply_values(0.3, vals)
    hi = op.apply_values(0.3, vals + 1.0)
    assert np.all(hi - lo >= 1.0 - 1e-12)


def test_koopman_lipschitz_hint_validated(ou_grid):
    with pytest.raises(ConfigurationError):
        KoopmanOperator(ou_grid, lambda x: -3.0 * x, lipschitz_hint=1.0)
