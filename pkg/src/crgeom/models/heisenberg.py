"""The Heisenberg group H^n: frame, contact form, group law, norm, dilations.

Group law (the one making Z_a and the standard form left-invariant)::

    (a, s) . (w, t) = (a + w, s + t + 2 Im sum_k a_k conj(w_k))
"""

from __future__ import annotations

from dataclasses import dataclass

import jax.numpy as jnp
import numpy as np

from ..core import Chart, ComplexFrame, ContactForm, CRManifold, Derivative, ANALYTIC, Grid
from ..errors import NonPositiveDilation


def heisenberg_frame(n: int) -> ComplexFrame:
    """Z_a = d/dz_a + i conj(z_a) d/dt in real coordinates."""

    def fn(x):
        xs, ys = x[:n], x[n : 2 * n]
        eye = jnp.eye(n)
        return jnp.concatenate(
            [0.5 * eye + 0j, -0.5j * eye, (ys + 1j * xs)[:, None]], axis=1
        )

    return ComplexFrame(fn, n, "Z")


def heisenberg_form(n: int) -> ContactForm:
    """dt - i conj(z) dz + i z dzbar = dt + 2 sum (x dy - y dx)."""

    def fn(x):
        xs, ys = x[:n], x[n : 2 * n]
        return jnp.concatenate([-2 * ys, 2 * xs, jnp.ones(1)])

    return ContactForm(fn, "theta0")


@dataclass(frozen=True)
class HeisenbergPoint:
    z: tuple
    t: float

    @property
    def n(self) -> int:
        return len(self.z)

    def as_real(self) -> np.ndarray:
        z = np.asarray(self.z, dtype=complex)
        return np.concatenate([z.real, z.imag, [self.t]])

    @classmethod
    def from_real(cls, x) -> "HeisenbergPoint":
        x = np.asarray(x, dtype=float)
        n = (len(x) - 1) // 2
        return cls(tuple(x[:n] + 1j * x[n : 2 * n]), float(x[-1]))


def _split(x):
    x = np.asarray(x, dtype=float)
    n = (x.shape[-1] - 1) // 2
    return x[..., :n] + 1j * x[..., n : 2 * n], x[..., -1], n


def _join(z, t):
    return np.concatenate([z.real, z.imag, np.asarray(t)[..., None]], axis=-1)


def group_law(a, b):
    """Product of Heisenberg points (real-coordinate arrays or HeisenbergPoint)."""
    if isinstance(a, HeisenbergPoint):
        return HeisenbergPoint.from_real(group_law(a.as_real(), b.as_real()))
    za, ta, _ = _split(a)
    zb, tb, _ = _split(b)
    # Im(a conj b) in real arithmetic, so that a . a^{-1} is exactly 0
    im = za.imag * zb.real - za.real * zb.imag
    return _join(za + zb, ta + tb + 2 * np.sum(im, axis=-1))


def group_law_jnp(a, b):
    n = (a.shape[-1] - 1) // 2
    za = a[:n] + 1j * a[n : 2 * n]
    zb = b[:n] + 1j * b[n : 2 * n]
    z = za + zb
    t = a[-1] + b[-1] + 2 * jnp.sum(za.imag * zb.real - za.real * zb.imag)
    return jnp.concatenate([z.real, z.imag, t[None]])


def inverse(a):
    if isinstance(a, HeisenbergPoint):
        return HeisenbergPoint.from_real(inverse(a.as_real()))
    return -np.asarray(a, dtype=float)


def heisenberg_norm(a):
    """(|z|^4 + t^2)^(1/4)."""
    if isinstance(a, HeisenbergPoint):
        a = a.as_real()
    z, t, _ = _split(a)
    return (np.sum(np.abs(z) ** 2, axis=-1) ** 2 + t**2) ** 0.25


def dilate(lam: float, a):
    if lam <= 0:
        raise NonPositiveDilation(f"dilation factor must be positive, got {lam}")
    if isinstance(a, HeisenbergPoint):
        return HeisenbergPoint.from_real(dilate(lam, a.as_real()))
    z, t, _ = _split(a)
    return _join(lam * z, lam**2 * t)


def box_grid(lower, upper, shape, periodic=False) -> Grid:
    """Uniform tensor grid; endpoint-free along periodic axes, midpoint cells otherwise."""
    axes = []
    cell = 1.0
    for lo, hi, m in zip(lower, upper, shape):
        h = (hi - lo) / m
        if periodic:
            axes.append(lo + h * np.arange(m))
        else:
            axes.append(lo + h * (np.arange(m) + 0.5))
        cell *= h
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    weights = np.full(len(pts), cell)
    return Grid(pts, weights, tuple(shape), "nilmanifold" if periodic else "box", tuple(axes))


def heisenberg(
    n: int = 1,
    half_width: float = 1.0,
    grid: tuple | None = None,
    derivative: Derivative = ANALYTIC,
) -> CRManifold:
    """(H^n, theta0) on the box [-w, w]^(2n+1)."""
    dim = 2 * n + 1
    lower = (-half_width,) * dim
    upper = (half_width,) * dim
    chart = Chart("heisenberg", n, lower, upper)
    g = box_grid(lower, upper, grid) if grid is not None else None
    return CRManifold(
        chart,
        heisenberg_frame(n),
        heisenberg_form(n),
        g,
        derivative,
        name=f"heisenberg{n}",
        meta={"model": "heisenberg"},
    )
