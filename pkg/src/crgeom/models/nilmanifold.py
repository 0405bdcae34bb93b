"""Compact Heisenberg nilmanifolds Gamma \\ H^n.

Gamma is generated by left translations by L e_k (real and imaginary
directions of each z_k) and by the central period T along t.  A function on
the quotient is a function F on R^(2n+1) with

    F(x + L e_k, y, t) = F(x, y, t + 2 L y_k)
    F(x, y + L e_k, t) = F(x, y, t - 2 L x_k)
    F(x, y, t + T)     = F(x, y, t)

so a Fourier mode exp(2 pi i m t / T) picks up Bloch phases along x and y.
"""

from __future__ import annotations

import numpy as np

from ..core import ANALYTIC, Chart, CRManifold, Derivative, total_volume
from ..errors import IncompatibleLattice
from .heisenberg import box_grid, heisenberg_form, heisenberg_frame


def nilmanifold(
    n: int = 1,
    scale: float = 1.0,
    grid: tuple | None = None,
    t_period: float | None = None,
    normalize: bool = True,
    derivative: Derivative = ANALYTIC,
) -> CRManifold:
    """Flat nilmanifold with theta = c * theta0, c chosen for unit volume."""
    if scale <= 0:
        raise IncompatibleLattice("lattice scale must be positive")
    L = float(scale)
    T = float(t_period) if t_period is not None else L * L
    ratio = 2 * L * L / T
    if T <= 0 or abs(ratio - round(ratio)) > 1e-12:
        raise IncompatibleLattice("t-period must divide 2 L^2 for the lattice to close")
    dim = 2 * n + 1
    if grid is None:
        grid = (32,) * dim
    if len(grid) != dim:
        raise IncompatibleLattice("grid must have 2n+1 axes")
    lower = (0.0,) * dim
    upper = (L,) * (2 * n) + (T,)
    chart = Chart("nilmanifold", n, lower, upper, (True,) * dim)
    g = box_grid(lower, upper, grid, periodic=True)
    g.meta.update(scale=L, t_period=T)
    base = CRManifold(
        chart, heisenberg_frame(n), heisenberg_form(n), g, derivative,
        name=f"nilmanifold{n}", meta={"model": "nilmanifold"},
    )
    if not normalize:
        return base
    vol = total_volume(base)
    c = vol ** (-1.0 / (n + 1))
    return base.replace(theta=heisenberg_form(n).scaled(c), meta={"model": "nilmanifold", "theta_scale": c})
