"""Charts, fields, frames, contact forms and the pointwise CR-structure calculus.

Coordinates on a chart of a (2n+1)-manifold are real and ordered as
``(x_1..x_n, y_1..y_n, t)`` with ``z_a = x_a + i y_a``.  Vector fields are
stored as coefficient vectors on ``(d/dx, d/dy, d/dt)``; 1-forms as
coefficient vectors on ``(dx, dy, dt)``.  The wedge convention is
``(a ^ b)(X, Y) = a(X) b(Y) - a(Y) b(X)``, so for a 1-form with coefficient
vector ``w`` the exterior derivative has components
``dw[i, j] = d_i w_j - d_j w_i``.

All pointwise formulas are written with ``jax.numpy`` so that the analytic
derivative strategy is forward-mode autodiff of the closed-form evaluators;
the finite-difference strategy swaps in central stencils with the same
composition structure.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .errors import DegenerateContact, NonFiniteField, SingularFrame, StencilOutOfDomain

Array = np.ndarray

# 4th-order central stencil offsets and weights for the first derivative
_FD_STENCILS = {
    2: ((-1, 1), (-0.5, 0.5)),
    4: ((-2, -1, 1, 2), (1 / 12, -8 / 12, 8 / 12, -1 / 12)),
    6: ((-3, -2, -1, 1, 2, 3), (-1 / 60, 9 / 60, -45 / 60, 45 / 60, -9 / 60, 1 / 60)),
}

DEFAULT_CHUNK = 8192


# ---------------------------------------------------------------------------
# derivative strategies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Derivative:
    """How chart-coordinate derivatives are taken.

    ``kind="analytic"`` differentiates the closed-form evaluators exactly
    (forward-mode autodiff); ``kind="fd"`` uses central differences of the
    given ``order`` with step ``h``.
    """

    kind: str = "analytic"
    h: float = 1e-3
    order: int = 4

    def __post_init__(self):
        if self.kind not in ("analytic", "fd"):
            raise ValueError(f"unknown derivative strategy {self.kind!r}")
        if self.kind == "fd" and self.order not in _FD_STENCILS:
            raise ValueError(f"unsupported FD order {self.order}")

    def jacobian(self, fn: Callable) -> Callable:
        """Return ``x -> d fn / dx`` with the derivative axis appended last."""
        if self.kind == "analytic":
            return jax.jacfwd(fn)
        offsets, weights = _FD_STENCILS[self.order]
        h = self.h

        offsets = np.asarray(offsets, dtype=float)
        weights = np.asarray(weights, dtype=float)

        def jac(x):
            # one vmapped call over all stencil nodes keeps nested FD graphs small
            dim = x.shape[-1]
            shifts = (offsets[None, :, None] * h * np.eye(dim)[:, None, :]).reshape(-1, dim)
            vals = jax.vmap(fn)(x + shifts)
            vals = vals.reshape((dim, len(offsets)) + vals.shape[1:])
            acc = jnp.tensordot(weights, jnp.moveaxis(vals, 1, 0), axes=1) / h
            return jnp.moveaxis(acc, 0, -1)

        return jac

    @property
    def reach(self) -> float:
        """Half-width of one stencil application in chart units."""
        if self.kind == "analytic":
            return 0.0
        return max(_FD_STENCILS[self.order][0]) * self.h


ANALYTIC = Derivative("analytic")


def exterior_derivative(form: Callable, deriv: Derivative) -> Callable:
    """d of a (stack of) 1-form(s): returns ``x -> dw`` with trailing (i, j) axes."""
    jac = deriv.jacobian(form)

    def d(x):
        j = jac(x)
        return jnp.swapaxes(j, -1, -2) - j

    return d


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Chart:
    id: str
    n: int
    lower: tuple
    upper: tuple
    periodic: tuple = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("chart requires n >= 1")
        if len(self.lower) != self.dim or len(self.upper) != self.dim:
            raise ValueError("chart box must have 2n+1 axes")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("chart domain is empty")
        if not self.periodic:
            object.__setattr__(self, "periodic", (False,) * self.dim)

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    def contains(self, x, margin: float = 0.0) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ok = np.ones(len(x), dtype=bool)
        for i in range(self.dim):
            if self.periodic[i]:
                continue
            ok &= (x[:, i] >= self.lower[i] + margin) & (x[:, i] <= self.upper[i] - margin)
        return ok


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A real (or complex) function on a chart, ``fn: jnp (2n+1,) -> scalar``."""

    fn: Callable
    name: str = "f"
    derivative: Derivative | None = None

    def __call__(self, x):
        return self.fn(x)

    def values(self, points) -> Array:
        pts = jnp.asarray(np.atleast_2d(points), dtype=float)
        return np.asarray(jax.jit(jax.vmap(self.fn))(pts))

    def __add__(self, other):
        other = _as_field(other)
        return ScalarField(lambda x: self.fn(x) + other.fn(x), f"({self.name}+{other.name})")

    def __mul__(self, other):
        other = _as_field(other)
        return ScalarField(lambda x: self.fn(x) * other.fn(x), f"({self.name}*{other.name})")

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(lambda x: -self.fn(x), f"-{self.name}")

    @classmethod
    def constant(cls, c: float, name: str | None = None) -> "ScalarField":
        return cls(lambda x: c + 0.0 * x[0], name or f"{c:g}")

    @classmethod
    def trig(cls, terms: Sequence[tuple], name: str = "trig") -> "ScalarField":
        """Sum of ``amp * cos(2 pi k.x + phase)`` over ``(amp, k, phase)`` terms."""
        amps = jnp.asarray([t[0] for t in terms], dtype=float)
        ks = jnp.asarray([t[1] for t in terms], dtype=float)
        phases = jnp.asarray([t[2] for t in terms], dtype=float)

        def fn(x):
            return jnp.sum(amps * jnp.cos(2 * jnp.pi * (ks @ x) + phases))

        return cls(fn, name)


def _as_field(obj) -> ScalarField:
    if isinstance(obj, ScalarField):
        return obj
    return ScalarField.constant(float(obj))


@dataclass(frozen=True, eq=False)
class ComplexFrame:
    """n complex vector fields spanning H^{1,0}; ``fn(x)`` has shape (n, 2n+1)."""

    fn: Callable
    n: int
    name: str = "W"

    def __call__(self, x):
        return self.fn(x)


@dataclass(frozen=True, eq=False)
class ContactForm:
    """A real 1-form ``fn(x) -> (2n+1,)`` coefficient vector."""

    fn: Callable
    name: str = "theta"

    def __call__(self, x):
        return self.fn(x)

    def scaled(self, c: float) -> "ContactForm":
        return ContactForm(lambda x: c * self.fn(x), f"{c:g}*{self.name}")


@dataclass(frozen=True, eq=False)
class Grid:
    """Quadrature nodes on one chart.

    ``weights`` are coordinate-measure weights; the pseudohermitian density
    is applied separately by :func:`integrate`.  ``kind`` names the discrete
    operator family able to act on the grid (``"nilmanifold"``, ``"hopf"``
    or ``"box"``).
    """

    points: Array
    weights: Array
    shape: tuple
    kind: str = "box"
    axes: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.asarray(self.weights) <= 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def size(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class CRManifold:
    """A pseudohermitian structure (H^{1,0} frame and contact form) on a chart."""

    chart: Chart
    frame: ComplexFrame
    theta: ContactForm
    grid: Grid | None = None
    derivative: Derivative = ANALYTIC
    name: str = "M"
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.chart.n

    @property
    def dim(self) -> int:
        return self.chart.dim

    @cached_property
    def geometry(self) -> "PointwiseGeometry":
        return PointwiseGeometry(self.theta.fn, self.frame.fn, self.n, self.derivative)

    def replace(self, **changes) -> "CRManifold":
        fields = dict(
            chart=self.chart,
            frame=self.frame,
            theta=self.theta,
            grid=self.grid,
            derivative=self.derivative,
            name=self.name,
            # cached grid data (keys starting with "_") belong to this structure only
            meta={k: v for k, v in self.meta.items() if not k.startswith("_")},
        )
        fields.update(changes)
        return CRManifold(**fields)

    def with_derivative(self, derivative: Derivative) -> "CRManifold":
        return self.replace(derivative=derivative)

    def check_stencil(self, x, levels: int = 3) -> None:
        reach = self.derivative.reach * levels
        if reach and not np.all(self.chart.contains(x, margin=reach)):
            raise StencilOutOfDomain(f"stencil of reach {reach:g} leaves chart {self.chart.id}")


# ---------------------------------------------------------------------------
# pointwise engine
# ---------------------------------------------------------------------------


def basis_maps(n: int):
    """Selection matrices for the basis {T, W_1..W_n, Wbar_1..Wbar_n}.

    Returns ``(p0, P, Pbar, sigma)``: ``p0[a]`` is theta(e_a), ``P[b, a]`` is
    theta^b(e_a), ``Pbar[b, a]`` is theta^bbar(e_a), and ``sigma`` is the
    index permutation induced by complex conjugation of basis vectors.
    """
    N = 2 * n + 1
    p0 = np.zeros(N)
    p0[0] = 1.0
    P = np.zeros((n, N))
    Pbar = np.zeros((n, N))
    for b in range(n):
        P[b, 1 + b] = 1.0
        Pbar[b, 1 + n + b] = 1.0
    sigma = np.array([0] + [1 + n + k for k in range(n)] + [1 + k for k in range(n)])
    return p0, P, Pbar, sigma


def _normal_solve(M, b):
    # lstsq through the normal equations keeps forward-mode derivatives finite
    return jnp.linalg.solve(M.T @ M, M.T @ b)


class PointwiseGeometry:
    """Closed-form pointwise pipeline for one pseudohermitian structure.

    Every method maps a single point ``x`` (shape (2n+1,)) to jax arrays and
    is composable with the derivative strategy; :meth:`batched` returns a
    jitted, vmapped version for grids.
    """

    def __init__(self, theta: Callable, frame: Callable, n: int, deriv: Derivative):
        self.theta = theta
        self.frame = frame
        self.n = n
        self.N = 2 * n + 1
        self.deriv = deriv
        self.dtheta = exterior_derivative(theta, deriv)
        self._cache: dict = {}
        self._p0, self._P, self._Pbar, self._sigma = basis_maps(n)

    # -- first-order structure -------------------------------------------------
    def levi(self, x):
        W = self.frame(x)
        return jnp.einsum("ai,ij,bj->ab", W, self.dtheta(x), W.conj()) / 2j

    def levi_pairing(self, x):
        W = self.frame(x)
        return -1j * jnp.einsum("ai,ij,bj->ab", W, self.dtheta(x), W.conj())

    def reeb_system(self, x):
        M = jnp.vstack([self.theta(x)[None, :], self.dtheta(x)])
        b = jnp.zeros(self.N + 1).at[0].set(1.0)
        return M, b

    def reeb(self, x):
        M, b = self.reeb_system(x)
        return _normal_solve(M, b)

    def reeb_residual(self, x):
        M, b = self.reeb_system(x)
        T = _normal_solve(M, b)
        return jnp.max(jnp.abs(M @ T - b)), jnp.linalg.svd(M, compute_uv=False)[-1]

    def basis(self, x):
        """Columns e_a = [T, W_1..W_n, Wbar_1..Wbar_n] in chart coordinates."""
        W = self.frame(x)
        T = self.reeb(x).astype(complex)
        return jnp.concatenate([T[:, None], W.T, W.conj().T], axis=1)

    def coframe(self, x):
        """Rows [theta_hat, theta^1..theta^n, theta^1bar..] dual to :meth:`basis`."""
        return jnp.linalg.inv(self.basis(x))

    def basis_singular_values(self, x):
        return jnp.linalg.svd(self.basis(x), compute_uv=False)

    def volume_density(self, x):
        """|theta ^ (d theta)^n| in chart coordinates."""
        n = self.n
        C = self.coframe(x)
        order = [0]
        for a in range(n):
            order += [1 + a, 1 + n + a]
        detC = jnp.linalg.det(C[jnp.array(order)])
        return jnp.abs(math.factorial(n) * 2.0**n * jnp.linalg.det(self.levi(x)) * detC)

    def bracket_defect(self, x):
        """Max norm of the part of [W_a, W_b] outside span{W}."""
        n = self.n
        if n < 2:
            return jnp.asarray(0.0)
        W = self.frame(x)
        DW = self.deriv.jacobian(self.frame)(x)  # [a, i, j] = d_j W_a^i
        br = jnp.einsum("aj,bij->abi", W, DW) - jnp.einsum("bj,aij->abi", W, DW)
        E = self.basis(x)
        coef = jnp.einsum("ki,abi->abk", self.coframe(x), br)
        mask = jnp.asarray(1.0 - self._P.sum(axis=0))
        outside = jnp.einsum("ik,abk->abi", E, coef * mask)
        return jnp.max(jnp.linalg.norm(outside, axis=-1))

    # -- Webster connection ----------------------------------------------------
    def connection(self, x):
        """Solve the structure equations for (omega, A) at x.

        ``omega[b, a, c]`` is the coefficient of omega_b^a on the c-th basis
        covector of {theta, theta^g, theta^gbar}; ``A[a, g]`` is A^a_gbar.
        """
        n, N = self.n, self.N
        P, Pbar, p0, sig = self._P, self._Pbar, self._p0, self._sigma
        E = self.basis(x)
        dC = exterior_derivative(self.coframe, self.deriv)(x)
        Om = jnp.einsum("ia,kij,jb->kab", E, dC[1 : 1 + n], E)
        G = self.levi(x)
        dG = jnp.einsum("abi,ic->abc", self.deriv.jacobian(self.levi)(x), E)
        K = n * n * N
        iu = np.triu_indices(N, 1)

        def unpack(v):
            w = (v[:K] + 1j * v[K : 2 * K]).reshape(n, n, N)
            A = (v[2 * K : 2 * K + n * n] + 1j * v[2 * K + n * n :]).reshape(n, n)
            return w, A

        def residual(v):
            w, A = unpack(v)
            t1 = jnp.einsum("ba,bkc->kac", P, w) - jnp.einsum("bc,bka->kac", P, w)
            t2 = jnp.einsum("kg,a,gc->kac", A, p0, Pbar) - jnp.einsum("kg,c,ga->kac", A, p0, Pbar)
            r1 = (Om - t1 - t2)[:, iu[0], iu[1]].ravel()
            wbar = w.conj()[:, :, sig]
            r2 = (dG - jnp.einsum("agc,gb->abc", w, G) - jnp.einsum("bgc,ag->abc", wbar, G)).ravel()
            Alow = jnp.einsum("ag,ab->gb", G, A)
            r3 = (Alow - Alow.T).ravel()
            r = jnp.concatenate([r1, r2, r3])
            return jnp.concatenate([r.real, r.imag])

        nv = 2 * K + 2 * n * n
        zero = jnp.zeros(nv)
        M = jax.jacfwd(residual)(zero)
        b = residual(zero)
        v = _normal_solve(M, -b)
        w, A = unpack(v)
        return w, A, jnp.linalg.norm(M @ v + b)

    def omega_form(self, x):
        """omega_b^a as coordinate 1-forms, shape (n, n, 2n+1)."""
        w, _, _ = self.connection(x)
        return jnp.einsum("bac,ci->bai", w, self.coframe(x))

    def curvature_form(self, x):
        """d omega - omega ^ omega as coordinate 2-forms [a, b, i, j]."""
        om = self.omega_form(x)
        dom = exterior_derivative(self.omega_form, self.deriv)(x)
        wedge = jnp.einsum("agi,gbj->abij", om, om)
        return dom - (wedge - jnp.swapaxes(wedge, -1, -2))

    def webster(self, x):
        """Full pointwise Webster data as a dict of jax arrays."""
        n = self.n
        w, A, res = self.connection(x)
        Pi = self.curvature_form(x)
        E = self.basis(x)
        Pib = jnp.einsum("abij,ic,jd->abcd", Pi, E, E)
        W = E[:, 1 : 1 + n]
        Wb = E[:, 1 + n :]
        R = jnp.einsum("abij,ig,js->abgs", Pi, W, Wb)
        # components discarded by the reduction mod theta, theta^g^theta^s, conj
        mask = np.ones((2 * n + 1, 2 * n + 1))
        mask[1 : 1 + n, 1 + n :] = 0
        mask[1 + n :, 1 : 1 + n] = 0
        G = self.levi(x)
        Ric = jnp.einsum("ggab->ab", R)
        ginv = jnp.linalg.inv(G.T)
        S = jnp.sum(Ric * ginv)
        return dict(
            g=G,
            omega=w,
            A=A,
            R=R,
            Ric=Ric,
            S=S,
            residual=res,
            discarded=jnp.max(jnp.abs(Pib * mask)),
        )

    # -- functions ---------------------------------------------------------------
    def frame_derivatives(self, f: Callable):
        """x -> (F1, F2): F1[a] = e_a f, F2[a, b] = e_b(e_a f) on the basis."""
        grad = self.deriv.jacobian(f)

        def first(x):
            return self.basis(x).T @ grad(x).astype(complex)

        jac_first = self.deriv.jacobian(first)

        def both(x):
            E = self.basis(x)
            return first(x), jac_first(x) @ E

        return both

    def jet(self, f: Callable):
        """x -> (F1, F2) with F2 the second covariant derivative f_{ab}.

        ``F2[a, b]`` differentiates first along e_a then along e_b:
        f_{ab} = e_b e_a f - Gamma_a^c(e_b) f_c, with nabla W = omega W,
        nabla Wbar = conj(omega) Wbar and nabla T = 0.
        """
        n, N = self.n, self.N
        sig = self._sigma
        both = self.frame_derivatives(f)

        def jet(x):
            F1, D2 = both(x)
            w, _, _ = self.connection(x)
            Gam = jnp.zeros((N, N, N), dtype=complex)  # [a, c, b]
            Gam = Gam.at[1 : 1 + n, 1 : 1 + n, :].set(w)
            Gam = Gam.at[1 + n :, 1 + n :, :].set(w.conj()[:, :, sig])
            F2 = D2 - jnp.einsum("acb,c->ab", Gam, F1)
            return F1, F2

        return jet

    def batched(self, name: str, chunk: int = DEFAULT_CHUNK):
        key = (name, chunk)
        if key not in self._cache:
            self._cache[key] = jax.jit(jax.vmap(getattr(self, name)))
        return self._cache[key]

    def batched_fn(self, key, fn):
        if key not in self._cache:
            self._cache[key] = jax.jit(jax.vmap(fn))
        return self._cache[key]


def evaluate(fn, points, chunk: int = DEFAULT_CHUNK):
    """Apply a vmapped jitted ``fn`` over ``points`` in chunks; returns numpy pytrees."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    outs = []
    for s in range(0, len(pts), chunk):
        outs.append(jax.tree_util.tree_map(np.asarray, fn(jnp.asarray(pts[s : s + chunk]))))
    if len(outs) == 1:
        return outs[0]
    return jax.tree_util.tree_map(lambda *a: np.concatenate(a, axis=0), *outs)


def _pointwise(m: CRManifold, name: str, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    out = evaluate(m.geometry.batched(name), np.atleast_2d(x))
    if single:
        out = jax.tree_util.tree_map(lambda a: a[0], out)
    return out


def _check_frame(m: CRManifold, x, tol: float = 1e-10):
    sv = np.atleast_2d(_pointwise(m, "basis_singular_values", x))
    if np.any(sv[:, -1] <= tol * np.maximum(sv[:, 0], 1.0)):
        raise SingularFrame("frame vectors (with the Reeb field) are dependent")


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def levi_form(m: CRManifold, x) -> Array:
    """Levi matrix g_{a bbar} with d theta = 2i g theta^a ^ theta^bbar."""
    _check_frame(m, x)
    return _pointwise(m, "levi", x)


def levi_pairing(m: CRManifold, x) -> Array:
    """-i d theta(W_a, Wbar_b); equals twice :func:`levi_form`."""
    return _pointwise(m, "levi_pairing", x)


def is_pseudoconvex(m: CRManifold, x) -> np.ndarray:
    g = np.atleast_3d(levi_form(m, x)) if np.ndim(x) > 1 else levi_form(m, x)[None]
    g = 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))
    return np.linalg.eigvalsh(g)[..., 0] > 0


def reeb_field(m: CRManifold, x, tol: float = 1e-8) -> Array:
    """Characteristic field T with theta(T) = 1 and T -| d theta = 0."""
    res, smin = _pointwise(m, "reeb_residual", x)
    if np.any(np.asarray(smin) < tol) or np.any(np.asarray(res) > 1e-6):
        raise DegenerateContact("Reeb system is rank-deficient")
    return _pointwise(m, "reeb", x)


def admissible_coframe(m: CRManifold, x) -> Array:
    """theta^a rows (shape (..., n, 2n+1)) dual to the frame and killing T."""
    _check_frame(m, x)
    C = _pointwise(m, "coframe", x)
    return C[..., 1 : 1 + m.n, :]


def integrability_residual(m: CRManifold, x) -> np.ndarray:
    """Size of the component of [W_a, W_b] outside span{W}; 0 by convention for n = 1."""
    if m.n < 2:
        return np.zeros(np.atleast_2d(x).shape[0]) if np.ndim(x) > 1 else 0.0
    return _pointwise(m, "bracket_defect", x)


def volume_density(m: CRManifold, x) -> Array:
    return _pointwise(m, "volume_density", x)


def grid_density(m: CRManifold) -> Array:
    """Volume density at every grid node (cached on the manifold)."""
    if "_density" not in m.meta:
        m.meta["_density"] = np.asarray(volume_density(m, m.grid.points), dtype=float)
    return m.meta["_density"]


def integrate(m: CRManifold, s) -> float:
    """Quadrature of ``s`` against theta ^ (d theta)^n over the grid.

    ``s`` is a :class:`ScalarField`, a callable, or an array of nodal values.
    """
    if isinstance(s, ScalarField):
        vals = s.values(m.grid.points)
    elif callable(s):
        vals = ScalarField(s).values(m.grid.points)
    else:
        vals = np.asarray(s)
    vals = np.ravel(vals)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteField("field has non-finite values on the grid")
    return float(np.sum(m.grid.weights * grid_density(m) * vals))


def total_volume(m: CRManifold) -> float:
    return float(np.sum(m.grid.weights * grid_density(m)))


# ---------------------------------------------------------------------------
# coordinate helpers and export
# ---------------------------------------------------------------------------


def vector_from_complex(c, n: int):
    """Coefficients on (d/dz, d/dzbar, d/dt) -> real chart coordinates."""
    c = jnp.asarray(c)
    a, b, t = c[..., :n], c[..., n : 2 * n], c[..., 2 * n :]
    return jnp.concatenate([a + b, -1j * (a - b), t], axis=-1)


def vector_to_complex(v, n: int):
    """Real chart coordinates -> coefficients on (d/dz, d/dzbar, d/dt)."""
    v = np.asarray(v)
    vx, vy, t = v[..., :n], v[..., n : 2 * n], v[..., 2 * n :]
    return np.concatenate([(vx + 1j * vy) / 2, (vx - 1j * vy) / 2, t], axis=-1)


def covector_to_complex(w, n: int):
    """Coefficients on (dx, dy, dt) -> coefficients on (dz, dzbar, dt)."""
    w = np.asarray(w)
    wx, wy, t = w[..., :n], w[..., n : 2 * n], w[..., 2 * n :]
    return np.concatenate([(wx - 1j * wy) / 2, (wx + 1j * wy) / 2, t], axis=-1)


def export_csv(path, points, columns: dict) -> None:
    """Write point coordinates plus named value columns; '.' decimal, repr floats."""
    points = np.atleast_2d(points)
    names = [f"x{i}" for i in range(points.shape[1])]
    flat = {}
    for key, val in columns.items():
        val = np.asarray(val).reshape(len(points), -1)
        if val.shape[1] == 1:
            flat[key] = val[:, 0]
        else:
            for j in range(val.shape[1]):
                flat[f"{key}_{j}"] = val[:, j]
    expanded = {}
    for key, val in flat.items():
        if np.iscomplexobj(val):
            expanded[f"{key}_re"] = val.real
            expanded[f"{key}_im"] = val.imag
        else:
            expanded[key] = val
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(names + list(expanded))
        for i in range(len(points)):
            row = [repr(float(v)) for v in points[i]]
            row += [repr(float(expanded[k][i])) for k in expanded]
            wr.writerow(row)
