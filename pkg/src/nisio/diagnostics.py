"""Diagnostics: strong-continuity probes, cutoff decay, HJB residuals, and
the structural property suite every configuration is expected to satisfy."""

from __future__ import annotations

import numpy as np

from .envelope import (Partition, envelope_step, nisio_value, partition_apply,
                       quadrature_tolerance, upper_bound_check)
from .errors import InvalidInputError, ResolutionError
from .grids import GridFunction, lip_seminorm, weighted_norm
from .operators import generator_apply
from .probes import bump, smootherstep


def strong_continuity_probe(family, u, h_list, window=None):
    """Rate of the members' small-time displacement.

    r(h) = max over members of ||S(h)u - u|| in the weighted norm; a linear
    model r ~ L h is fitted through the origin on the three smallest h.
    A small relative residual certifies first-order displacement (membership
    in the good class for strong continuity of the envelope).
    """
    h_arr = np.asarray(sorted(h_list, reverse=True), dtype=float)
    if np.any(h_arr <= 0.0):
        raise InvalidInputError("h values must be positive")
    rates = []
    for h in h_arr:
        worst = 0.0
        for member in family:
            diff = member.apply(h, u).values - u.values
            worst = max(worst, weighted_norm(u.with_values(diff), window=window))
        rates.append(worst)
    rates = np.asarray(rates)
    hs = h_arr[-3:] if len(h_arr) >= 3 else h_arr
    rs = rates[-3:] if len(h_arr) >= 3 else rates
    slope = float(np.sum(rs * hs) / np.sum(hs * hs))
    resid = rs - slope * hs
    rel = float(np.sqrt(np.sum(resid ** 2) / max(np.sum(rs ** 2), 1e-300)))
    return {"h": h_arr.tolist(), "rates": rates.tolist(),
            "slope": slope, "relative_residual": rel}


def cutoff_family(grid, x0, delta):
    """Cut-off test function: 0 at x0 (and within delta/2), 1 beyond distance delta."""
    if grid.points.ndim == 1:
        if grid.kind == "labels":
            dist = np.where(grid.points == x0, 0.0, 1.0) * delta
        else:
            dist = np.abs(grid.points - x0)
    else:
        dist = np.linalg.norm(grid.points - np.asarray(x0), axis=1)
    return GridFunction(smootherstep(2.0 * dist / delta - 1.0), grid)


def cutoff_decay_probe(family, delta, x_list, h_list, level=3, tol=1e-9):
    """Mass the envelope moves away from each center within small times.

    Reports, per h, the max over centers of kappa(x) (S(h) phi_x)(x) for the
    cut-off functions phi_x; the quantity must decrease to 0 with h.  When
    generator bounds exist, the linear slope bound L e^{alpha h0} h is
    attached (L = max generator norm over the cut-offs).
    """
    grid = family.grid
    if grid.points.ndim == 1 and grid.kind != "labels":
        min_gap = float(np.min(np.diff(grid.points)))
        if delta < 2.0 * min_gap:
            raise ResolutionError(f"delta={delta} below twice the grid spacing")
    cutoffs, centers_idx = [], []
    for x0 in x_list:
        idx = int(grid.nearest_index(np.asarray([x0]))[0]) if grid.points.ndim == 1 \
            else int(np.argmin(np.linalg.norm(grid.points - np.asarray(x0), axis=1)))
        center = grid.points[idx]
        cutoffs.append(cutoff_family(grid, center, delta))
        centers_idx.append(idx)
    L = 0.0
    for phi in cutoffs:
        for member in family:
            L = max(L, generator_apply(member, phi).norm())
    values = []
    for h in h_list:
        worst = 0.0
        for phi, idx in zip(cutoffs, centers_idx):
            sh = nisio_value(family, h, phi, max_level=level, tol=tol).value
            worst = max(worst, grid.kappa[idx] * sh.values[idx])
        values.append(float(worst))
    h0 = max(h_list)
    alpha = family.bounds.alpha
    bound = [float(L * np.exp(alpha * h0) * h) for h in h_list]
    return {"h": list(map(float, h_list)), "values": values,
            "generator_bound_L": float(L), "slope_bound": bound}


def viscosity_residual(family, snapshots, dt, window=None):
    """Classical residual of the nonlinear evolution on smooth regions.

    residual(t, x) = d/dt u(t, x) - max over members of (A_member u(t))(x),
    with a central time difference at interior snapshots and generator
    stencils in space.  End snapshots and invalid stencil rows are excluded.
    This is a necessary check where the envelope is smooth, not a full
    sub/supersolution verification.
    """
    if len(snapshots) < 3:
        raise InvalidInputError("need at least three snapshots")
    if dt <= 0.0:
        raise InvalidInputError("dt must be positive")
    grid = snapshots[0].grid
    n = grid.size
    k_interior = range(1, len(snapshots) - 1)
    field = np.full((len(snapshots) - 2, n), np.nan)
    worst = 0.0
    mask_window = np.ones(n, dtype=bool) if window is None else np.asarray(window, bool)
    for row, k in enumerate(k_interior):
        du_dt = (snapshots[k + 1].values - snapshots[k - 1].values) / (2.0 * dt)
        ham = np.full(n, -np.inf)
        valid = np.ones(n, dtype=bool)
        for member in family:
            res = generator_apply(member, snapshots[k])
            ham = np.maximum(ham, res.values)
            valid &= res.valid
        resid = du_dt - ham
        field[row, valid] = resid[valid]
        sel = valid & mask_window
        if np.any(sel):
            worst = max(worst, float(np.max(np.abs(resid[sel]))))
    return {"residual_field": field, "max_interior_residual": worst}


def _nested_partition_pair(t, rng, quantum=16):
    """Random nested pair pi1 subset pi2 with endpoint t, on a 1/quantum lattice."""
    k2 = rng.integers(2, 7)
    interior = rng.choice(np.arange(1, quantum), size=min(k2, quantum - 1), replace=False)
    times2 = np.concatenate([[0.0], np.sort(interior) * (t / quantum), [t]])
    times2 = np.unique(times2)
    keep = rng.random(len(times2) - 2) < 0.5
    times1 = np.concatenate([[0.0], times2[1:-1][keep], [t]])
    return Partition(np.unique(times1)), Partition(times2)


def property_suite(family, probes, t_list, eps=None, seed=0, partition_pairs=5,
                   nisio_level=4, threads=1):
    """Structural invariants of the one-step envelope, with measured slacks.

    Every inequality is tested with tolerance eps_q (the members' measured
    composition defect); identities that only suffer floating point use a
    scale-aware machine tolerance instead.  Returns a JSON-shaped report.
    """
    if not probes:
        raise InvalidInputError("need at least one probe")
    if eps is None:
        eps = quadrature_tolerance(family)
    rng = np.random.default_rng(seed)
    grid = family.grid
    checks = []

    def record(name, worst_slack, tol):
        checks.append({"name": name, "worst_slack": float(worst_slack),
                       "tolerance": float(tol), "passed": bool(worst_slack >= -tol)})

    scale = max(1.0, max(float(np.max(np.abs(u.values))) for u in probes))
    fp_tol = 1e-11 * scale

    # constants preserved
    one = GridFunction(np.ones(grid.size), grid)
    worst = min(-float(np.max(np.abs(envelope_step(family, t, one, threads).values - 1.0)))
                for t in t_list)
    record("constants_preserved", worst, fp_tol)

    # monotonicity: u <= u + nonnegative perturbation
    pts = grid.points if grid.points.ndim == 1 else grid.points[:, 0]
    lift = bump(pts, center=float(np.median(pts)),
                width=max(1.0, 0.25 * (pts.max() - pts.min())))
    worst = np.inf
    for u in probes:
        v = u.with_values(u.values + lift)
        for t in t_list:
            gap = envelope_step(family, t, v, threads).values \
                - envelope_step(family, t, u, threads).values
            worst = min(worst, float(np.min(gap)))
    record("monotone", worst, eps)

    # sublinearity and positive homogeneity
    worst = np.inf
    for i, u in enumerate(probes):
        for v in probes[i:]:
            s = u.with_values(u.values + v.values)
            for t in t_list:
                gap = envelope_step(family, t, u, threads).values \
                    + envelope_step(family, t, v, threads).values \
                    - envelope_step(family, t, s, threads).values
                worst = min(worst, float(np.min(gap)))
    record("subadditive", worst, max(eps, fp_tol))
    worst = np.inf
    for u in probes:
        for c in (0.0, 0.5, 2.0):
            cu = u.with_values(c * u.values)
            for t in t_list:
                diff = envelope_step(family, t, cu, threads).values \
                    - c * envelope_step(family, t, u, threads).values
                worst = min(worst, -float(np.max(np.abs(diff))))
    record("positively_homogeneous", worst, fp_tol)

    # weighted-norm contraction at rate alpha
    alpha = family.bounds.alpha
    worst = np.inf
    for i, u in enumerate(probes):
        for v in probes[i + 1:]:
            du = weighted_norm(u.with_values(u.values - v.values))
            for t in t_list:
                d_after = weighted_norm(u.with_values(
                    envelope_step(family, t, u, threads).values
                    - envelope_step(family, t, v, threads).values))
                worst = min(worst, np.exp(alpha * t) * du - d_after)
    record("kappa_contraction", worst, eps)

    # Lipschitz propagation (only meaningful when members preserve it exactly)
    if all(m.lipschitz_exact for m in family) and grid.size > 1:
        beta = family.bounds.beta
        gap_min = float(np.min(np.diff(pts))) if grid.kind != "labels" else 1.0
        worst = np.inf
        for u in probes:
            lu = lip_seminorm(u)
            for t in t_list:
                worst = min(worst, np.exp(beta * t) * lu
                            - lip_seminorm(envelope_step(family, t, u, threads)))
        record("lipschitz_propagation", worst, eps / gap_min + 1e-9)

    # partition refinement and dyadic monotonicity: the exact inequality
    # telescopes over composition splits, so the tolerance carries one eps_q
    # per split (members with exactly composing kernels keep it at eps_q)
    worst = np.inf
    t_ref = max(t_list)
    quantum = 16
    for _ in range(partition_pairs):
        p1, p2 = _nested_partition_pair(t_ref, rng, quantum=quantum)
        for u in probes:
            gap = partition_apply(family, p2, u, threads).values \
                - partition_apply(family, p1, u, threads).values
            worst = min(worst, float(np.min(gap)))
    record("partition_refinement", worst, quantum * eps)
    worst = np.inf
    for u in probes:
        res = nisio_value(family, t_ref, u, max_level=nisio_level, tol=1e-12,
                          threads=threads)
        for a, b in zip(res.levels, res.levels[1:]):
            worst = min(worst, float(np.min(b.values - a.values)))
    record("dyadic_levels_nondecreasing", worst, 2 ** nisio_level * eps)

    # envelope dominates every member
    worst = min(upper_bound_check(family, t, probes[0], max_level=nisio_level,
                                  tol=1e-10, threads=threads)["min_slack"]
                for t in t_list)
    record("envelope_dominates_members", worst, eps)

    return {"eps_q": float(eps), "checks": checks,
            "passed": bool(all(c["passed"] for c in checks))}
