"""Heisenberg normal coordinates Theta_xi on the model manifolds.

On every supported model theta = phi * theta0 in chart coordinates (phi
constant on Heisenberg and the nilmanifold, the Cayley factor on sphere
charts).  We use

    Theta_xi(eta) = delta_s(xi^{-1} . eta),   s = sqrt(phi(xi)),

so that (Theta_xi^{-1})^* theta = (phi(xi . delta_{1/s} y) / phi(xi)) theta0,
equal to theta0 at y = 0.  With phi constant, Theta(xi, eta) = -Theta(eta, xi).
"""

from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from ..core import CRManifold
from ..errors import UnsupportedManifold
from .heisenberg import dilate, group_law, group_law_jnp, heisenberg_form, heisenberg_norm, inverse

SUPPORTED = ("heisenberg", "nilmanifold", "sphere")


def _require_model(m: CRManifold, xi=None) -> None:
    if m.meta.get("model") not in SUPPORTED or m.meta.get("chart_kind") == "hopf":
        raise UnsupportedManifold(f"normal coordinates need a Heisenberg-type chart, got {m.name}")
    if xi is not None:
        th = np.asarray(m.theta(jnp.asarray(xi, dtype=float)))
        ref = th[-1] * np.asarray(heisenberg_form(m.n)(jnp.asarray(xi, dtype=float)))
        if np.max(np.abs(th - ref)) > 1e-9 * (1 + np.max(np.abs(th))):
            raise UnsupportedManifold("theta is not a multiple of theta0 on this chart")


def _phi(m: CRManifold, x) -> float:
    # theta = phi * theta0 and theta0(d/dt) = 1
    return float(np.asarray(m.theta(jnp.asarray(x, dtype=float)))[-1])


@dataclass
class NormalCoordinates:
    m: CRManifold
    center: np.ndarray
    scale: float

    def __call__(self, eta):
        return self.forward(eta)

    def forward(self, eta):
        """Theta_xi(eta)."""
        return dilate(self.scale, group_law(inverse(self.center), np.asarray(eta, dtype=float)))

    def inverse(self, y):
        return group_law(self.center, dilate(1.0 / self.scale, np.asarray(y, dtype=float)))

    def _inverse_jnp(self, y):
        n = self.m.n
        s = 1.0 / self.scale
        yd = jnp.concatenate([s * y[: 2 * n], s * s * y[2 * n :]])
        return group_law_jnp(jnp.asarray(self.center), yd)

    def pullback(self, y):
        """Coefficients of (Theta_xi^{-1})^* theta at y (real coordinates)."""
        y = jnp.asarray(y, dtype=float)
        J = jax.jacfwd(self._inverse_jnp)(y)
        return np.asarray(self.m.theta(self._inverse_jnp(y)) @ J)

    def pullback_defect(self, y):
        """(max dz-type coefficient, dt coefficient) of pullback minus theta0."""
        d = self.pullback(y) - np.asarray(heisenberg_form(self.m.n)(jnp.asarray(y, dtype=float)))
        n = self.m.n
        return float(np.max(np.abs(d[: 2 * n]))), float(abs(d[-1]))


def normal_coordinates(m: CRManifold, xi) -> NormalCoordinates:
    xi = np.asarray(xi, dtype=float)
    _require_model(m, xi)
    return NormalCoordinates(m, xi, float(np.sqrt(_phi(m, xi))))


def theta_pair(m: CRManifold, xi, eta) -> np.ndarray:
    """Theta(xi, eta) = Theta_xi(eta)."""
    return normal_coordinates(m, xi).forward(eta)


def rho(m: CRManifold, x, y) -> float:
    """Quasi-distance |Theta(x, y)|."""
    return float(heisenberg_norm(theta_pair(m, x, y)))


def rho_pairs(m: CRManifold, X, Y) -> np.ndarray:
    """rho(x_i, y_i) for arrays of pairs (no per-pair proportionality check)."""
    _require_model(m)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    phi = np.asarray(m.geometry.batched("theta")(jnp.asarray(X)))[:, -1]
    d = group_law(inverse(X), Y)
    s = np.sqrt(phi)
    n = m.n
    d[:, : 2 * n] *= s[:, None]
    d[:, -1] *= phi
    return heisenberg_norm(d)


def _unit_sphere_points(n: int, count: int, rng) -> np.ndarray:
    v = rng.normal(size=(count, 2 * n + 1))
    return v / heisenberg_norm(v)[:, None]


def expansion_slopes(nc: NormalCoordinates, radii=None, directions: int = 16, seed: int = 0) -> dict:
    """Log-log slopes of the pullback defect against |y| on shrinking Heisenberg spheres.

    A component that vanishes identically (defect below 1e-13 at every
    radius) gets slope inf.
    """
    radii = np.geomspace(0.02, 0.0025, 6) if radii is None else np.asarray(radii, dtype=float)
    rng = np.random.default_rng(seed)
    dirs = _unit_sphere_points(nc.m.n, directions, rng)
    dz, dt = [], []
    for r in radii:
        vals = np.array([nc.pullback_defect(dilate(r, d)) for d in dirs])
        dz.append(vals[:, 0].max())
        dt.append(vals[:, 1].max())

    def slope(v):
        v = np.asarray(v)
        if np.all(v < 1e-13):
            return float("inf")
        return float(np.polyfit(np.log(radii), np.log(np.maximum(v, 1e-300)), 1)[0])

    return {"radii": radii.tolist(), "dz": dz, "dt": dt, "slope_dz": slope(dz), "slope_dt": slope(dt)}
