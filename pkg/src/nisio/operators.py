"""Transition operators: the members a semigroup envelope is built from.

Every operator realizes one linear Markov semigroup ``S(t)`` on a grid as a
row-stochastic quadrature matrix (or an FFT multiplier), so that

* ``apply(0, u) == u`` exactly,
* ``apply(t, 1) == 1`` exactly after row renormalization,
* ``u <= v`` implies ``apply(t, u) <= apply(t, v)`` (nonnegative rows),
* ``apply`` is linear in ``u``.

Matrices are cached per duration, which makes repeated composition over a
time partition cheap.  ``generator(u)`` evaluates the corresponding
infinitesimal generator with second-order stencils; rows whose stencil
leaves the grid are flagged invalid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.stats

from .errors import ConfigurationError, InvalidInputError, NumericalDegeneracyError
from .grids import WeightedGrid

# kernel support radius in standard deviations; tail mass beyond is ~1e-23
KERNEL_RADIUS = 10.0


# ---------------------------------------------------------------------------
# lattice kernel builders (shared by heat / GBM / OU)
# ---------------------------------------------------------------------------

def _reflect_indices(j, n):
    """Mirror indices about the end nodes of 0..n-1 (period 2(n-1))."""
    if n == 1:
        return np.zeros_like(j)
    m = 2 * (n - 1)
    j = np.mod(j, m)
    return np.where(j >= n, m - j, j)


def _assemble_rows(n, cols_raw, weights, mode):
    """COO assembly of banded rows with boundary handling.

    cols_raw has shape (n, bandwidth); out-of-range columns are folded back
    (``reflect``), wrapped (``wrap``), or dropped (``renormalize``).  Rows are
    rescaled to sum to exactly one.
    """
    if mode == "reflect":
        cols = _reflect_indices(cols_raw, n)
    elif mode == "wrap":
        cols = np.mod(cols_raw, n)
    elif mode == "renormalize":
        inside = (cols_raw >= 0) & (cols_raw < n)
        weights = np.where(inside, weights, 0.0)
        cols = np.clip(cols_raw, 0, n - 1)
    else:
        raise ConfigurationError(f"unknown boundary mode {mode!r}")
    rows = np.repeat(np.arange(n), cols_raw.shape[1])
    mat = sp.coo_matrix((weights.ravel(), (rows, cols.ravel())), shape=(n, n)).tocsr()
    sums = np.asarray(mat.sum(axis=1)).ravel()
    if np.any(sums <= 0.0):
        raise NumericalDegeneracyError("kernel row lost all mass")
    return sp.diags(1.0 / sums) @ mat


def gaussian_lattice_matrix(n, dx, means_offset, std, mode):
    """Row-stochastic Gaussian kernel on a uniform lattice.

    Row i targets mean ``i*dx + means_offset[i]`` (offsets need not be lattice
    aligned).  Requires ``std > 0``; callers switch to the stencil kernel when
    the standard deviation is below one cell.
    """
    offsets = np.broadcast_to(np.asarray(means_offset, dtype=float), (n,))
    k_half = int(math.ceil(KERNEL_RADIUS * std / dx)) + 1
    # targets far outside the lattice keep their in-domain tail (clamped center)
    j_center = np.clip(np.rint(offsets / dx).astype(int) + np.arange(n), 0, n - 1)
    band = np.arange(-k_half, k_half + 1)
    cols_raw = j_center[:, None] + band[None, :]
    dist = cols_raw * dx - (np.arange(n) * dx + offsets)[:, None]
    weights = np.exp(-0.5 * (dist / std) ** 2)
    return _assemble_rows(n, cols_raw, weights, mode)


def stencil_lattice_matrix(n, dx, means_offset, var, mode):
    """Monotone 3-point kernel matching the first two moments.

    Used when the kernel width is at or below one cell.  The mean offset is
    split into a whole-cell shift plus a remainder; the remainder and the
    variance go into the stencil.  Nonnegativity is enforced by clamping,
    which biases the variance by at most one under-resolved cell.
    """
    offsets = np.broadcast_to(np.asarray(means_offset, dtype=float), (n,)).copy()
    var = np.broadcast_to(np.asarray(var, dtype=float), (n,))
    k0 = np.rint(offsets / dx).astype(int)
    rem = offsets - k0 * dx
    w_plus = (var + rem ** 2 + rem * dx) / (2.0 * dx * dx)
    w_minus = (var + rem ** 2 - rem * dx) / (2.0 * dx * dx)
    # clamp: keep the mean exact, give up variance below the resolvable floor
    neg = w_minus < 0.0
    w_plus = np.where(neg, rem / dx, w_plus)
    w_minus = np.where(neg, 0.0, w_minus)
    neg = w_plus < 0.0
    w_minus = np.where(neg, -rem / dx, w_minus)
    w_plus = np.where(neg, 0.0, w_plus)
    w_mid = 1.0 - w_plus - w_minus
    if np.any(w_mid < -1e-12):
        raise NumericalDegeneracyError("stencil kernel not monotone; step too large")
    w_mid = np.maximum(w_mid, 0.0)
    cols_raw = (np.arange(n) + k0)[:, None] + np.array([-1, 0, 1])[None, :]
    weights = np.column_stack([w_minus, w_mid, w_plus])
    return _assemble_rows(n, cols_raw, weights, mode)


def interp_stencil_matrix(n, dx, means_index, var, mode):
    """Kernel for arbitrary (non-lattice) target means on a uniform lattice.

    The mean is placed by monotone linear interpolation; variance is added by
    a centered 3-point stencil corrected for the spurious spread of the
    interpolation itself.  ``means_index`` is the target position in index
    units (may lie outside [0, n-1]; boundary handling per ``mode``).
    """
    mi = np.clip(np.asarray(means_index, dtype=float), 0.0, n - 1.0)
    var = np.broadcast_to(np.asarray(var, dtype=float), (n,))
    j = np.minimum(np.floor(mi).astype(int), n - 2)
    theta = mi - j
    spread = theta * (1.0 - theta) * dx * dx
    a = np.maximum(var - spread, 0.0) / (2.0 * dx * dx)
    if np.any(a > 0.5 + 1e-12):
        raise NumericalDegeneracyError("variance too large for the interp stencil")
    a = np.minimum(a, 0.5)
    cols_raw = j[:, None] + np.array([-1, 0, 1, 2])[None, :]
    weights = np.column_stack([
        (1.0 - theta) * a,
        (1.0 - theta) * (1.0 - 2.0 * a) + theta * a,
        (1.0 - theta) * a + theta * (1.0 - 2.0 * a),
        theta * a,
    ])
    return _assemble_rows(n, cols_raw, weights, mode)


def _boundary_mode(grid):
    if grid.kind == "periodic":
        return "wrap"
    return grid.boundary


# ---------------------------------------------------------------------------
# generator stencils
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorResult:
    """Generator applied to a grid function; ``valid`` masks usable rows."""

    values: np.ndarray
    valid: np.ndarray
    grid: WeightedGrid

    def norm(self, window=None):
        mask = self.valid.copy()
        if window is not None:
            mask &= np.asarray(window, dtype=bool)
        if not np.any(mask):
            raise InvalidInputError("no valid rows in window")
        return float(np.max(np.abs(self.values[mask]) * self.grid.kappa[mask]))


def _central_d1(v, dx):
    out = np.zeros_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * dx)
    return out

def _central_d2(v, dx):
    out = np.zeros_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (dx * dx)
    return out

def _interior_mask(n):
    m = np.zeros(n, dtype=bool)
    m[1:-1] = True
    return m


# ---------------------------------------------------------------------------
# operator base
# ---------------------------------------------------------------------------

class TransitionOperator:
    """One member semigroup: a pure map (duration, function) -> function."""

    translation_invariant = False
    lipschitz_exact = False
    name = "operator"

    def __init__(self, grid):
        self.grid = grid
        self._cache = {}

    def _check(self, t, u):
        if not np.isfinite(t) or t < 0.0:
            raise InvalidInputError(f"duration must be finite and >= 0, got {t}")
        if u.grid is not self.grid and not (
            u.grid.kind == self.grid.kind and np.array_equal(u.grid.points, self.grid.points)
        ):
            raise InvalidInputError("function lives on a different grid")

    def apply(self, t, u):
        """Evaluate S(t)u.  t == 0 returns u unchanged."""
        self._check(t, u)
        if t == 0.0:
            return u
        return u.with_values(self.apply_values(t, u.values))

    def apply_values(self, t, values):
        if t == 0.0:
            return values
        return self.matrix(t) @ values

    def matrix(self, t):
        mat = self._cache.get(t)
        if mat is None:
            mat = self._build_matrix(t)
            self._cache[t] = mat
        return mat

    def _build_matrix(self, t):
        raise NotImplementedError

    def generator(self, u):
        raise NotImplementedError


class HeatOperator(TransitionOperator):
    """Brownian member with volatility sigma: Gaussian kernel of variance sigma^2 t."""

    translation_invariant = True

    def __init__(self, grid, sigma):
        if grid.kind not in ("uniform", "periodic"):
            raise ConfigurationError("heat member needs a uniform grid")
        if sigma < 0.0:
            raise ConfigurationError("sigma must be >= 0")
        super().__init__(grid)
        self.sigma = float(sigma)
        self.name = f"heat(sigma={sigma:g})"
        self.lipschitz_exact = grid.kind == "periodic" or grid.boundary == "reflect"

    def _build_matrix(self, t):
        n, dx = self.grid.size, self.grid.spacing
        var = self.sigma ** 2 * t
        if var == 0.0:
            return sp.identity(n, format="csr")
        mode = _boundary_mode(self.grid)
        # Gaussian quadrature is alias-free only when the kernel resolves the
        # grid; below one cell the moment-matched stencil is strictly better.
        if var <= dx * dx:
            return stencil_lattice_matrix(n, dx, 0.0, var, mode)
        return gaussian_lattice_matrix(n, dx, 0.0, math.sqrt(var), mode)

    def generator(self, u):
        dx = self.grid.spacing
        vals = 0.5 * self.sigma ** 2 * _central_d2(u.values, dx)
        valid = _interior_mask(self.grid.size)
        if self.grid.kind == "periodic":
            v = u.values
            vals[0] = 0.5 * self.sigma ** 2 * (v[1] - 2 * v[0] + v[-1]) / dx ** 2
            vals[-1] = 0.5 * self.sigma ** 2 * (v[0] - 2 * v[-1] + v[-2]) / dx ** 2
            valid[:] = True
        return GeneratorResult(vals, valid, self.grid)


class GBMOperator(TransitionOperator):
    """Geometric Brownian member on the sign-glued log grid.

    In log coordinates the transition is a Gaussian with mean shift
    ``(mu - sigma^2/2) t`` and variance ``sigma^2 t``; the kernel lands on
    lattice nodes, so no interpolation enters.  ``x = 0`` is an exact fixed
    point and the negative branch mirrors the positive one.
    """

    def __init__(self, grid, mu, sigma):
        if grid.kind != "log":
            raise ConfigurationError("GBM member needs a log grid")
        if sigma < 0.0:
            raise ConfigurationError("sigma must be >= 0")
        super().__init__(grid)
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.name = f"gbm(mu={mu:g},sigma={sigma:g})"
        self._n_side = (grid.size - 1) // 2

    def _build_matrix(self, t):
        n, ds = self._n_side, self.grid.spacing
        shift = (self.mu - 0.5 * self.sigma ** 2) * t
        var = self.sigma ** 2 * t
        if shift == 0.0 and var == 0.0:
            return sp.identity(self.grid.size, format="csr")
        if var > ds * ds:
            block = gaussian_lattice_matrix(n, ds, shift, math.sqrt(var), self.grid.boundary)
        else:
            block = stencil_lattice_matrix(n, ds, shift, var, self.grid.boundary)
        block = block.tocsr()
        neg = block[::-1, ::-1]
        return sp.block_diag([neg, sp.identity(1), block], format="csr")

    def generator(self, u):
        n, ds = self._n_side, self.grid.spacing
        drift = self.mu - 0.5 * self.sigma ** 2
        vals = np.zeros(self.grid.size)
        valid = np.zeros(self.grid.size, dtype=bool)
        # negative branch is stored in descending log|x|, so d/ds flips sign there
        for block, sgn in ((slice(0, n), -1.0), (slice(n + 1, 2 * n + 1), 1.0)):
            v = u.values[block]
            vals[block] = sgn * drift * _central_d1(v, ds) \
                + 0.5 * self.sigma ** 2 * _central_d2(v, ds)
            interior = np.zeros(n, dtype=bool)
            interior[1:-1] = True
            valid[block] = interior
        vals[n] = 0.0   # x = 0 is a fixed point
        valid[n] = True
        return GeneratorResult(vals, valid, self.grid)


def _adaptive_simpson(f, a, b, tol):
    """Adaptive Simpson quadrature for array-valued integrands."""

    def simpson(xa, fa, xb, fb):
        xm = 0.5 * (xa + xb)
        fm = f(xm)
        return xm, fm, (xb - xa) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(xa, fa, xb, fb, whole, xm, fm, depth):
        lm, flm, left = simpson(xa, fa, xm, fm)
        rm, frm, right = simpson(xm, fm, xb, fb)
        err = np.max(np.abs(left + right - whole))
        if err < 15.0 * tol * max(1.0, float(np.max(np.abs(whole)))) or depth > 40:
            return left + right + (left + right - whole) / 15.0
        return (recurse(xa, fa, xm, fm, left, lm, flm, depth + 1)
                + recurse(xm, fm, xb, fb, right, rm, frm, depth + 1))

    fa, fb = f(a), f(b)
    xm, fm, whole = simpson(a, fa, b, fb)
    return recurse(a, fa, b, fb, whole, xm, fm, 0)


class OUOperator(TransitionOperator):
    """Linear-drift Gaussian member: mean exp(tB)x + int_0^t exp(sB)m ds,
    covariance int_0^t exp(sB) C exp(sB)^T ds."""

    def __init__(self, grid, B, m, C):
        B = np.atleast_2d(np.asarray(B, dtype=float))
        m = np.atleast_1d(np.asarray(m, dtype=float))
        C = np.atleast_2d(np.asarray(C, dtype=float))
        d = B.shape[0]
        if d not in (1, 2):
            raise ConfigurationError("OU member supports d in {1, 2}")
        if B.shape != (d, d) or m.shape != (d,) or C.shape != (d, d):
            raise ConfigurationError("inconsistent OU dimensions")
        if not np.allclose(C, C.T, atol=1e-12):
            raise ConfigurationError("C must be symmetric")
        if np.min(scipy.linalg.eigvalsh(C)) < -1e-12:
            raise ConfigurationError("C must be positive semidefinite")
        if d == 1 and grid.kind != "uniform":
            raise ConfigurationError("1D OU member needs a uniform grid")
        if d == 2 and grid.kind != "tensor":
            raise ConfigurationError("2D OU member needs a tensor grid")
        super().__init__(grid)
        self.B, self.m, self.C, self.d = B, m, C, d
        self.name = f"ou(d={d})"

    def moments(self, t):
        """(exp(tB), drift integral, covariance integral) at duration t."""
        M = scipy.linalg.expm(t * self.B)
        drift = _adaptive_simpson(lambda s: scipy.linalg.expm(s * self.B) @ self.m,
                                  0.0, t, 1e-10)
        cov = _adaptive_simpson(
            lambda s: scipy.linalg.expm(s * self.B) @ self.C @ scipy.linalg.expm(s * self.B).T,
            0.0, t, 1e-10)
        cov = 0.5 * (cov + cov.T)
        if np.min(scipy.linalg.eigvalsh(cov)) < -1e-10 * max(1.0, np.max(np.abs(cov))):
            raise NumericalDegeneracyError("integrated covariance not PSD")
        return M, drift, cov

    def _build_matrix(self, t):
        M, drift, cov = self.moments(t)
        if self.d == 1:
            return self._matrix_1d(M[0, 0], drift[0], max(cov[0, 0], 0.0))
        return self._matrix_2d(M, drift, cov)

    def _matrix_1d(self, m_lin, drift, var):
        g = self.grid
        n, dx, lo = g.size, g.spacing, g.points[0]
        means = m_lin * g.points + drift
        mode = _boundary_mode(g)
        if var > dx * dx:
            # gaussian_lattice_matrix wants offsets from each row's own node
            return gaussian_lattice_matrix(n, dx, means - g.points, math.sqrt(var), mode)
        return interp_stencil_matrix(n, dx, (means - lo) / dx, var, mode)

    def _matrix_2d(self, M, drift, cov):
        g = self.grid
        pts = g.points
        means = pts @ M.T + drift
        eigs = scipy.linalg.eigvalsh(cov)
        dxmax = max(g.spacing)
        if eigs[1] < (0.05 * dxmax) ** 2:
            return self._interp_2d(means)
        if eigs[0] < (0.8 * dxmax) ** 2:
            raise NumericalDegeneracyError(
                "2D covariance too anisotropic for the tensor-grid kernel")
        prec = scipy.linalg.inv(cov)
        diff = pts[None, :, :] - means[:, None, :]
        q = np.einsum("rjk,kl,rjl->rj", diff, prec, diff)
        w = np.exp(-0.5 * q)
        w /= w.sum(axis=1, keepdims=True)
        return w

    def _interp_2d(self, means):
        g = self.grid
        n0, n1 = g.shape
        ax0 = g.points[::n1, 0]
        ax1 = g.points[:n1, 1]
        rows, cols, vals = [], [], []
        for axis, ax in enumerate((ax0, ax1)):
            xc = np.clip(means[:, axis], ax[0], ax[-1])
            j = np.clip(np.searchsorted(ax, xc, side="right") - 1, 0, len(ax) - 2)
            th = np.clip((xc - ax[j]) / (ax[j + 1] - ax[j]), 0.0, 1.0)
            if axis == 0:
                j0, t0 = j, th
            else:
                j1, t1 = j, th
        r = np.arange(g.size)
        for dj0, w0 in ((0, 1.0 - t0), (1, t0)):
            for dj1, w1 in ((0, 1.0 - t1), (1, t1)):
                rows.append(r)
                cols.append((j0 + dj0) * n1 + (j1 + dj1))
                vals.append(w0 * w1)
        mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(g.size, g.size)).tocsr()
        sums = np.asarray(mat.sum(axis=1)).ravel()
        return sp.diags(1.0 / sums) @ mat

    def generator(self, u):
        g = self.grid
        if self.d == 1:
            dx = g.spacing
            drift_field = self.B[0, 0] * g.points + self.m[0]
            vals = drift_field * _central_d1(u.values, dx) \
                + 0.5 * self.C[0, 0] * _central_d2(u.values, dx)
            return GeneratorResult(vals, _interior_mask(g.size), g)
        n0, n1 = g.shape
        dx0, dx1 = g.spacing
        arr = u.values.reshape(n0, n1)
        d0 = np.zeros_like(arr); d1 = np.zeros_like(arr)
        d00 = np.zeros_like(arr); d11 = np.zeros_like(arr); d01 = np.zeros_like(arr)
        d0[1:-1, :] = (arr[2:, :] - arr[:-2, :]) / (2 * dx0)
        d1[:, 1:-1] = (arr[:, 2:] - arr[:, :-2]) / (2 * dx1)
        d00[1:-1, :] = (arr[2:, :] - 2 * arr[1:-1, :] + arr[:-2, :]) / dx0 ** 2
        d11[:, 1:-1] = (arr[:, 2:] - 2 * arr[:, 1:-1] + arr[:, :-2]) / dx1 ** 2
        d01[1:-1, 1:-1] = (arr[2:, 2:] - arr[2:, :-2] - arr[:-2, 2:] + arr[:-2, :-2]) \
            / (4 * dx0 * dx1)
        drift_field = g.points @ self.B.T + self.m
        vals = drift_field[:, 0] * d0.ravel() + drift_field[:, 1] * d1.ravel() \
            + 0.5 * (self.C[0, 0] * d00 + self.C[1, 1] * d11 + 2 * self.C[0, 1] * d01).ravel()
        valid = np.zeros((n0, n1), dtype=bool)
        valid[1:-1, 1:-1] = True
        return GeneratorResult(vals, valid.ravel(), g)


class KoopmanOperator(TransitionOperator):
    """Deterministic member: u composed with the ODE flow of x' = F(x).

    The flow is integrated per grid point with classical RK4 (step at most
    0.01); the flowed value is read off by monotone linear interpolation.
    States leaving the grid are clamped (constant extrapolation) and counted
    in ``exit_counts``.
    """

    lipschitz_exact = True

    def __init__(self, grid, F, lipschitz_hint=1.0):
        if grid.kind != "uniform":
            raise ConfigurationError("Koopman member needs a uniform grid")
        super().__init__(grid)
        self.F = F
        self.lipschitz_hint = float(lipschitz_hint)
        fx = np.asarray(F(grid.points), dtype=float)
        slopes = np.abs(np.diff(fx)) / grid.spacing
        if slopes.size and float(np.max(slopes)) > self.lipschitz_hint + 1e-9:
            raise ConfigurationError(
                f"field exceeds its Lipschitz hint: {np.max(slopes):.3g} > "
                f"{self.lipschitz_hint:.3g}")
        self.exit_counts = {}
        self.name = "koopman"

    def flow(self, t, x):
        x = np.array(x, dtype=float)
        if t == 0.0:
            return x
        n_steps = max(1, int(math.ceil(t / 0.01)))
        dt = t / n_steps
        for _ in range(n_steps):
            k1 = self.F(x)
            k2 = self.F(x + 0.5 * dt * k1)
            k3 = self.F(x + 0.5 * dt * k2)
            k4 = self.F(x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return x

    def _build_matrix(self, t):
        g = self.grid
        y = self.flow(t, g.points)
        self.exit_counts[t] = int(np.sum((y < g.points[0]) | (y > g.points[-1])))
        j, theta = g.interp_weights(y)
        rows = np.arange(g.size)
        mat = sp.coo_matrix(
            (np.concatenate([1.0 - theta, theta]),
             (np.concatenate([rows, rows]), np.concatenate([j, j + 1]))),
            shape=(g.size, g.size)).tocsr()
        return mat

    def generator(self, u):
        vals = _central_d1(u.values, self.grid.spacing) * self.F(self.grid.points)
        return GeneratorResult(vals, _interior_mask(self.grid.size), self.grid)


class StableOperator(TransitionOperator):
    """Symmetric jump member of order alpha: Fourier multiplier exp(-t |xi|^(2 alpha)).

    Periodic uniform grids only; the zero-frequency multiplier is pinned to 1
    so constants are preserved exactly.
    """

    translation_invariant = True
    lipschitz_exact = True

    def __init__(self, grid, alpha):
        if grid.kind != "periodic":
            raise ConfigurationError("stable member needs a uniform periodic grid")
        if not 0.0 < alpha < 1.0:
            raise ConfigurationError("alpha must lie in (0, 1)")
        super().__init__(grid)
        self.alpha = float(alpha)
        self.name = f"stable(alpha={alpha:g})"
        self._xi = 2.0 * np.pi * np.fft.rfftfreq(grid.size, grid.spacing)

    def symbol(self, t=1.0):
        mult = np.exp(-t * np.abs(self._xi) ** (2.0 * self.alpha))
        mult[0] = 1.0
        return mult

    def apply_values(self, t, values):
        if t == 0.0:
            return values
        mult = self._cache.get(t)
        if mult is None:
            mult = self.symbol(t)
            self._cache[t] = mult
        return np.fft.irfft(np.fft.rfft(values) * mult, n=self.grid.size)

    def matrix(self, t):
        raise ConfigurationError("spectral member has no materialized matrix")

    def generator(self, u):
        mult = -np.abs(self._xi) ** (2.0 * self.alpha)
        vals = np.fft.irfft(np.fft.rfft(u.values) * mult, n=self.grid.size)
        return GeneratorResult(vals, np.ones(self.grid.size, dtype=bool), self.grid)


class ChainOperator(TransitionOperator):
    """Finite-state member exp(tQ), computed by uniformization.

    Q must have nonnegative off-diagonal and nonpositive diagonal entries.
    Conservative rows (Q 1 = 0) are required unless ``allow_nonconservative``;
    only conservative chains admit the path sampler.
    """

    lipschitz_exact = True

    def __init__(self, grid, Q, allow_nonconservative=False):
        if grid.kind != "labels":
            raise ConfigurationError("chain member needs a label grid")
        Q = np.asarray(Q, dtype=float)
        if Q.shape != (grid.size, grid.size):
            raise ConfigurationError("rate matrix shape mismatch")
        off = Q - np.diag(np.diag(Q))
        if np.min(off) < -1e-12 or np.max(np.diag(Q)) > 1e-12:
            raise ConfigurationError("need Q_ij >= 0 off-diagonal and Q_ii <= 0")
        self.conservative = bool(np.max(np.abs(Q.sum(axis=1))) <= 1e-10)
        if not self.conservative and not allow_nonconservative:
            raise ConfigurationError("non-conservative rate matrix (rows must sum to 0)")
        super().__init__(grid)
        self.Q = Q
        self.rate = float(np.max(-np.diag(Q)))
        self.name = f"chain(n={grid.size})"
        if self.rate > 0.0:
            P = np.eye(grid.size) + Q / self.rate
            self.jump_matrix = np.maximum(P, 0.0)
        else:
            self.jump_matrix = np.eye(grid.size)

    def _build_matrix(self, t):
        n = self.grid.size
        gt = self.rate * t
        if gt == 0.0:
            return np.eye(n)
        k_max = int(gt + 12.0 * math.sqrt(gt) + 30.0)
        pmf = scipy.stats.poisson.pmf(np.arange(k_max + 1), gt)
        acc = pmf[0] * np.eye(n)
        power = np.eye(n)
        for k in range(1, k_max + 1):
            power = power @ self.jump_matrix
            acc += pmf[k] * power
        if self.conservative:
            acc /= acc.sum(axis=1, keepdims=True)
        return acc

    def generator(self, u):
        return GeneratorResult(self.Q @ u.values, np.ones(self.grid.size, dtype=bool),
                               self.grid)


class ScaledOperator(TransitionOperator):
    """Time dilation of a base member: S_lambda(t) = S(lambda t)."""

    def __init__(self, base, scale):
        if scale < 0.0:
            raise ConfigurationError("scale must be >= 0")
        super().__init__(base.grid)
        self.base = base
        self.scale = float(scale)
        self.translation_invariant = base.translation_invariant
        self.lipschitz_exact = base.lipschitz_exact
        self.name = f"scaled({base.name},{scale:g})"

    def apply_values(self, t, values):
        return self.base.apply_values(self.scale * t, values)

    def matrix(self, t):
        return self.base.matrix(self.scale * t)

    def generator(self, u):
        res = self.base.generator(u)
        return GeneratorResult(self.scale * res.values, res.valid, res.grid)


def generator_apply(member, u):
    """Infinitesimal generator of one member applied to u."""
    member._check(0.0, u)
    return member.generator(u)


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FamilyBounds:
    """Growth rates of the weighted norm (alpha) and Lipschitz seminorm (beta)
    per unit time.  Used only inside tolerance formulas, never to clamp."""

    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise ConfigurationError("family bounds must be finite")


class SemigroupFamily:
    """Nonempty finite collection of members sharing one grid."""

    def __init__(self, members, bounds=None):
        members = list(members)
        if not members:
            raise ConfigurationError("family needs at least one member")
        grid = members[0].grid
        for m in members[1:]:
            if m.grid is not grid:
                raise ConfigurationError("all members must share one grid")
        self.members = members
        self.grid = grid
        self.bounds = bounds if bounds is not None else FamilyBounds()

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def apply_all(self, t, values):
        """Stack of member applications, shape (n_members, n_points)."""
        return np.stack([m.apply_values(t, values) for m in self.members])
