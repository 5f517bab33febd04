"""Named initial-condition library shared by the CLI, tests and demos."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .grids import GridFunction

PROBE_NAMES = ("const", "linear", "quadratic", "neg-quadratic", "sin", "cos",
               "bump", "call-payoff")


def smootherstep(z):
    """C^2 monotone ramp: 0 below 0, 1 above 1."""
    z = np.clip(z, 0.0, 1.0)
    return z ** 3 * (z * (6.0 * z - 15.0) + 10.0)


def bump(x, center=0.0, width=1.0):
    """C^2 bump supported on |x - center| <= width, equal to 1 at the center."""
    r = np.abs(np.asarray(x, dtype=float) - center) / width
    return 1.0 - smootherstep(2.0 * r - 1.0)


def probe_function(name, grid, **params):
    """Build a named probe on a grid.

    Supported names: const (value), linear, quadratic, neg-quadratic, sin,
    cos (frequency), bump (center, width), call-payoff (strike).
    """
    x = grid.points if grid.points.ndim == 1 else grid.points[:, 0]
    if name == "const":
        vals = np.full(grid.size, float(params.get("value", 1.0)))
    elif name == "linear":
        vals = x.copy()
    elif name == "quadratic":
        vals = x ** 2
    elif name == "neg-quadratic":
        vals = -(x ** 2)
    elif name == "sin":
        vals = np.sin(float(params.get("frequency", 1.0)) * x)
    elif name == "cos":
        vals = np.cos(float(params.get("frequency", 1.0)) * x)
    elif name == "bump":
        vals = bump(x, float(params.get("center", 0.0)), float(params.get("width", 1.0)))
    elif name == "call-payoff":
        vals = np.maximum(x - float(params.get("strike", 1.0)), 0.0)
    else:
        raise ConfigurationError(f"unknown probe {name!r}; choose from {PROBE_NAMES}")
    return GridFunction(vals, grid)
