"""Upper envelope of a family of transition operators.

The one-step envelope takes the pointwise maximum of the members applied for
a duration ``h``; composing it over a time partition and refining dyadically
yields the least upper bound of the family (the worst-case value under
adapted switching between members).  The refinement is monotone, so the
dyadic iterates increase pointwise up to the members' own quadrature defect.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvalidInputError
from .grids import GridFunction, weighted_norm


@dataclass(frozen=True)
class Partition:
    """Finite time partition: 0 = t_0 < t_1 < ... < t_m."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.ndim != 1 or t.size == 0:
            raise ConfigurationError("partition must be a nonempty 1D sequence")
        if t[0] != 0.0:
            raise ConfigurationError("partition must start at 0")
        if t.size > 1 and not np.all(np.diff(t) > 0.0):
            raise ConfigurationError("partition times must be strictly increasing")
        self.times.setflags(write=False)

    @classmethod
    def uniform(cls, t, m):
        if m < 1:
            raise ConfigurationError("need at least one step")
        return cls(np.linspace(0.0, t, m + 1))

    @classmethod
    def dyadic(cls, t, level):
        return cls.uniform(t, 2 ** level)

    @property
    def endpoint(self):
        return float(self.times[-1])

    @property
    def mesh(self):
        if self.times.size == 1:
            return 0.0
        return float(np.max(np.diff(self.times)))

    @property
    def gaps(self):
        return np.diff(self.times)

    def refines(self, other):
        """True if this partition contains every time of ``other``."""
        return np.all(np.isin(other.times, self.times))


def _stack(family, h, values, threads=1):
    if threads > 1 and len(family) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda m: m.apply_values(h, values), family.members))
        return np.stack(rows)
    return family.apply_all(h, values)


def envelope_step(family, h, u, threads=1):
    """One-step envelope: pointwise max over members of S_member(h) u."""
    if not np.isfinite(h) or h < 0.0:
        raise InvalidInputError(f"duration must be finite and >= 0, got {h}")
    if h == 0.0:
        return u
    return u.with_values(np.max(_stack(family, h, u.values, threads), axis=0))


def envelope_step_argmax(family, h, u, threads=1):
    """One-step envelope together with the per-point maximizing member index.

    Ties resolve to the lowest index (np.argmax keeps the first maximum).
    """
    stacked = _stack(family, h, u.values, threads)
    idx = np.argmax(stacked, axis=0)
    return u.with_values(stacked[idx, np.arange(stacked.shape[1])]), idx


def partition_apply(family, pi, u, threads=1):
    """Compose the one-step envelope over the gaps of a partition.

    Right-to-left composition; the trivial partition {0} returns u.
    """
    if pi.endpoint == 0.0:
        return u
    v = u
    for h in pi.gaps[::-1]:
        v = envelope_step(family, h, v, threads)
    return v


@dataclass
class NisioResult:
    """Dyadic refinement of the envelope value.

    ``levels[n]`` holds the iterate on the 2^n-step uniform partition;
    ``diffs[n]`` the weighted norm of ``levels[n+1] - levels[n]``.
    """

    value: GridFunction
    levels: list
    diffs: list
    converged: bool

    @property
    def final_level(self):
        return len(self.levels) - 1


def nisio_value(family, t, u, max_level=12, tol=1e-6, threads=1):
    """Envelope value S(t)u by dyadic partition refinement.

    Refines until the successive weighted-norm difference drops below
    ``tol`` or ``max_level`` is reached; non-convergence is reported through
    the flag, not raised.
    """
    if tol <= 0.0:
        raise InvalidInputError("tol must be positive")
    if max_level < 1:
        raise InvalidInputError("max_level must be >= 1")
    if not np.isfinite(t) or t < 0.0:
        raise InvalidInputError(f"horizon must be finite and >= 0, got {t}")
    if t == 0.0:
        return NisioResult(u, [u], [], True)
    levels = [partition_apply(family, Partition.dyadic(t, 0), u, threads)]
    diffs = []
    converged = False
    for level in range(1, max_level + 1):
        v = partition_apply(family, Partition.dyadic(t, level), u, threads)
        diffs.append(weighted_norm(v.with_values(v.values - levels[-1].values)))
        levels.append(v)
        if diffs[-1] <= tol:
            converged = True
            break
    return NisioResult(levels[-1], levels, diffs, converged)


def dpp_check(family, s, t, u, max_level=12, tol=1e-6, window=None, threads=1):
    """Dynamic-programming defect: || S(s+t)u - S(s) S(t) u || in the weighted norm.

    Reported, not asserted.  ``window`` restricts the norm to a mask of grid
    points (useful to keep boundary-layer artifacts out of the comparison).
    """
    if s == 0.0 or t == 0.0:
        return {"defect": 0.0}
    joint = nisio_value(family, s + t, u, max_level, tol, threads)
    inner = nisio_value(family, t, u, max_level, tol, threads)
    outer = nisio_value(family, s, inner.value, max_level, tol, threads)
    diff = joint.value.with_values(joint.value.values - outer.value.values)
    return {"defect": weighted_norm(diff, window=window)}


def upper_bound_check(family, t, u, max_level=12, tol=1e-6, threads=1):
    """Least-upper-bound slack: min over members and points of S(t)u - S_member(t)u.

    The gap is weighted by kappa so the slack is commensurate with the
    composition tolerance eps_q (which is measured in the weighted norm).
    """
    res = nisio_value(family, t, u, max_level, tol, threads)
    slack = np.inf
    for member in family:
        gap = (res.value.values - member.apply(t, u).values) * family.grid.kappa
        slack = min(slack, float(np.min(gap)))
    return {"min_slack": slack, "result": res}


PROBE_EPS_NAMES = ("const", "linear", "sin")


def _eps_probes(grid):
    pts = grid.points if grid.points.ndim == 1 else grid.points[:, 0]
    return [
        GridFunction(np.ones(grid.size), grid),
        GridFunction(pts.copy(), grid),
        GridFunction(np.sin(pts), grid),
    ]


def quadrature_tolerance(family, t_ref=0.1, floor=1e-12):
    """Measured composition defect of the discretized members.

    Maximum over members, probe functions {1, x, sin x} and two splittings of
    ``t_ref`` of  || S(h1) S(h2) u - S(h1+h2) u ||  in the weighted norm,
    floored at ``floor`` to absorb plain floating-point noise.  This is the
    only inexactness the envelope inherits, so every inequality check reads
    its slack tolerance from here.
    """
    if t_ref <= 0.0:
        raise InvalidInputError("t_ref must be positive")
    worst = 0.0
    splits = [(0.5 * t_ref, 0.5 * t_ref), (0.25 * t_ref, 0.75 * t_ref)]
    for u in _eps_probes(family.grid):
        for member in family:
            direct = member.apply(t_ref, u)
            for h1, h2 in splits:
                two_step = member.apply(h1, member.apply(h2, u))
                defect = weighted_norm(direct.with_values(two_step.values - direct.values))
                worst = max(worst, defect)
    return max(worst, floor)
