"""The standard sphere S^{2n+1} in C^{n+1}.

Two Cayley charts in Heisenberg coordinates cover the sphere: chart "A"
misses the point -e_{n+1}, chart "B" (the antipodal copy) misses +e_{n+1}.
For n = 1 a global Hopf chart (eta, xi1, xi2) carries the grid used by the
discrete operators.
"""

from __future__ import annotations

import math

import jax
import jax.numpy as jnp
import numpy as np

from ..core import (
    ANALYTIC,
    Chart,
    ComplexFrame,
    ContactForm,
    CRManifold,
    Derivative,
    Grid,
    total_volume,
)
from ..errors import CapExclusion, UnsupportedManifold
from .heisenberg import box_grid, heisenberg_frame, heisenberg_norm

CAP_RADIUS = 0.15


def sphere_volume(n: int) -> float:
    """Volume of S^{2n+1} for theta = Im(sum zbar dz): (2 pi)^(n+1)."""
    return (2 * math.pi) ** (n + 1)


def cayley(x):
    """Heisenberg point (x, y, t) -> point of S^{2n+1} (complex n+1 vector)."""
    n = (x.shape[-1] - 1) // 2
    z = x[..., :n] + 1j * x[..., n : 2 * n]
    w = x[..., -1] + 1j * jnp.sum(z.real**2 + z.imag**2, axis=-1)
    d = 1j + w
    return jnp.concatenate([2j * z / d[..., None], ((1j - w) / d)[..., None]], axis=-1)


def inverse_cayley(zeta):
    """Point of the sphere (not -e_{n+1}) -> Heisenberg coordinates."""
    zeta = jnp.asarray(zeta)
    n = zeta.shape[-1] - 1
    zn = zeta[..., -1]
    w = 1j * (1 - zn) / (1 + zn)
    z = zeta[..., :n] * (1j + w)[..., None] / 2j
    return jnp.concatenate([z.real, z.imag, w.real[..., None]], axis=-1)


def _theta_pullback(x):
    zeta = cayley(x)
    J = jax.jacfwd(lambda p: cayley(p).real)(x) + 1j * jax.jacfwd(lambda p: cayley(p).imag)(x)
    return jnp.imag(jnp.einsum("k,ki->i", zeta.conj(), J))


def chart_point(zeta, cap_radius: float = CAP_RADIUS):
    """(chart id, coordinates) for a sphere point, preferring the chart where it sits deeper."""
    zeta = np.asarray(zeta, dtype=complex)
    xa = np.asarray(inverse_cayley(zeta)) if abs(1 + zeta[-1]) > 1e-14 else None
    xb = np.asarray(inverse_cayley(-zeta)) if abs(1 - zeta[-1]) > 1e-14 else None
    if xb is None or (xa is not None and heisenberg_norm(xa) <= 1.0):
        return "A", xa
    return "B", xb


def check_cap(x, cap_radius: float = CAP_RADIUS) -> None:
    """Raise CapExclusion if x lies in the cap around the chart pole.

    Chart transition inverts the Heisenberg norm, so the cap of radius r
    around the pole is {|x| > 1/r}.
    """
    if np.any(heisenberg_norm(np.atleast_2d(x)) > 1.0 / cap_radius):
        raise CapExclusion(f"point within cap of radius {cap_radius} around the chart pole")


def sphere(
    n: int = 1,
    chart: str = "A",
    half_width: float = 1.0,
    grid: tuple | None = None,
    normalize: bool = True,
    cap_radius: float = CAP_RADIUS,
    derivative: Derivative = ANALYTIC,
) -> CRManifold:
    """Standard sphere on one Cayley chart, with contact form scaled to unit volume.

    The two charts carry identical coordinate formulas (chart B is chart A
    composed with zeta -> -zeta); ``meta["cayley_sign"]`` records which.
    """
    if chart not in ("A", "B"):
        raise ValueError("chart must be 'A' or 'B'")
    dim = 2 * n + 1
    R = 1.0 / cap_radius
    c = 1.0 / (2 * math.pi) if normalize else 1.0
    lower, upper = (-R,) * dim, (R,) * dim
    g = None
    if grid is not None:
        g = box_grid((-half_width,) * dim, (half_width,) * dim, grid)
    theta = ContactForm(lambda x: c * _theta_pullback(x), name="cayley*theta_std")
    return CRManifold(
        Chart(f"cayley-{chart}", n, lower, upper),
        heisenberg_frame(n),
        theta,
        g,
        derivative,
        name=f"sphere{n}{chart}",
        meta={
            "model": "sphere",
            "cayley_sign": 1.0 if chart == "A" else -1.0,
            "theta_scale": c,
            "cap_radius": cap_radius,
        },
    )


def to_sphere(m: CRManifold, x):
    """Chart coordinates -> point of S^{2n+1}."""
    return m.meta.get("cayley_sign", 1.0) * np.asarray(cayley(jnp.asarray(x)))


def transition(x, cap_radius: float = CAP_RADIUS):
    """Coordinates in chart A -> coordinates of the same point in chart B."""
    check_cap(x, cap_radius)
    return np.asarray(inverse_cayley(-cayley(jnp.asarray(x))))


# -- Hopf chart (n = 1) -----------------------------------------------------------


def hopf_point(x):
    """(eta, xi1, xi2) -> (cos eta e^{i xi1}, sin eta e^{i xi2})."""
    e, a, b = x[..., 0], x[..., 1], x[..., 2]
    return jnp.stack([jnp.cos(e) * jnp.exp(1j * a), jnp.sin(e) * jnp.exp(1j * b)], axis=-1)


def hopf_grid(shape=(16, 32, 32)) -> Grid:
    """Midpoint nodes in eta, uniform nodes in xi1, xi2, all with uniform weights.

    Continued across eta = 0 and eta = pi/2 (where xi2, resp. xi1, is shifted
    by pi) the eta nodes form a uniform 4N-point circle grid, so midpoint
    weights are the circle trapezoid rule.  Weights are coordinate measures
    (d eta d xi1 d xi2); the contact volume density supplies sin(2 eta).
    """
    ne, n1, n2 = shape
    eta = (np.arange(ne) + 0.5) * np.pi / (2 * ne)
    xi1 = 2 * np.pi * np.arange(n1) / n1
    xi2 = 2 * np.pi * np.arange(n2) / n2
    E, A, B = np.meshgrid(eta, xi1, xi2, indexing="ij")
    pts = np.stack([E.ravel(), A.ravel(), B.ravel()], axis=-1)
    W = np.full(len(pts), (np.pi / (2 * ne)) * (2 * np.pi) ** 2 / (n1 * n2))
    return Grid(pts, W, tuple(shape), "hopf", (eta, xi1, xi2))


def hopf_frame():
    def fn(x):
        e = x[0]
        return jnp.array([[1.0, 1j * jnp.tan(e), -1j / jnp.tan(e)]])

    return ComplexFrame(fn, 1, name="hopf")


def hopf_form(c: float = 1.0):
    def fn(x):
        e = x[0]
        return c * jnp.array([0.0, jnp.cos(e) ** 2, jnp.sin(e) ** 2])

    return ContactForm(fn, name="hopf")


def sphere_hopf(
    grid=(16, 32, 32), normalize: bool = True, derivative: Derivative = ANALYTIC
) -> CRManifold:
    """S^3 on the global Hopf chart; the chart degenerates only on eta in {0, pi/2}."""
    c = 1.0 / (2 * math.pi) if normalize else 1.0
    g = hopf_grid(tuple(grid)) if grid is not None else None
    chart = Chart("hopf", 1, (0.0, 0.0, 0.0), (math.pi / 2, 2 * math.pi, 2 * math.pi),
                  (False, True, True))
    m = CRManifold(chart, hopf_frame(), hopf_form(c), g, derivative, name="sphere1hopf",
                   meta={"model": "sphere", "chart_kind": "hopf", "theta_scale": c})
    return m


def hopf_to_cayley(x):
    """Hopf coordinates -> (chart id, Cayley coordinates)."""
    zeta = np.asarray(hopf_point(jnp.asarray(x)))
    return chart_point(zeta)


def unitary_map(U, m: CRManifold | None = None):
    """The rotation zeta -> U zeta as a map of Cayley chart A to itself."""
    from ..conformal import SmoothMap

    U = jnp.asarray(U, dtype=complex)
    return SmoothMap(lambda x: inverse_cayley(U @ cayley(x)), name="rotation")


def random_unitary(k: int, rng) -> np.ndarray:
    Z = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def require_hopf(m: CRManifold) -> None:
    if m.grid is None or m.grid.kind != "hopf":
        raise UnsupportedManifold("operation needs the Hopf grid of S^3")
