"""Folland-Stein norms S^p_k and Gamma_s, Euclidean Hoelder norms, and
subelliptic-inequality probes.

Horizontal fields are X_a = Re W_a and X_{a+n} = Im W_a (coordinate
vectors), and X^A f = X_{a_1}(X_{a_2}(... X_{a_k} f)).  Integrals use the grid
quadrature with the volume density of theta; a domain U is a boolean mask of
grid nodes.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np

from .core import CRManifold, ScalarField, _as_field, evaluate, grid_density
from .errors import OrderTooHigh
from .models.normal_coords import rho_pairs
from .webster import sublaplacian

MAX_ORDER = 3
PAIR_CAP = 100_000


@dataclass(frozen=True)
class MultiIndex:
    indices: tuple = ()
    n: int = 1

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(a) for a in self.indices))
        if any(a < 1 or a > 2 * self.n for a in self.indices):
            raise ValueError(f"multi-index entries must lie in 1..{2 * self.n}")

    def __len__(self):
        return len(self.indices)

    @property
    def length(self) -> int:
        return len(self.indices)

    @classmethod
    def all(cls, n: int, k: int) -> list:
        """Every multi-index of length <= k, shortest first."""
        out = []
        for ell in range(k + 1):
            out += [cls(A, n) for A in itertools.product(range(1, 2 * n + 1), repeat=ell)]
        return out


@dataclass
class NormReport:
    kind: str
    value: float
    params: dict = field(default_factory=dict)
    domain: str = "grid"
    diagnostics: dict = field(default_factory=dict)

    def row(self) -> list:
        params = ";".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        diag = ";".join(f"{k}={v!r}" for k, v in sorted(self.diagnostics.items()))
        return [self.kind, params, repr(float(self.value)), self.domain, diag]


def write_reports(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "params", "value", "domain", "diagnostics"])
        for r in reports:
            w.writerow(r.row())


# -- horizontal derivatives ----------------------------------------------------------


def horizontal_field(m: CRManifold, a: int):
    """Coordinate vector of X_a (1-based)."""
    n = m.n
    W = m.frame.fn

    def X(x):
        w = W(x)
        return jnp.real(w[a - 1]) if a <= n else jnp.imag(w[a - 1 - n])

    return X


def _compose(m: CRManifold, f, A: MultiIndex):
    fn = _as_field(f).fn
    jac = m.derivative.jacobian
    for a in reversed(A.indices):
        X = horizontal_field(m, a)
        fn = (lambda g, X: (lambda x: jnp.dot(jac(g)(x), X(x))))(fn, X)
    return fn


def horizontal_derivative(m: CRManifold, f, A, x, max_order: int = MAX_ORDER):
    """X^A f at x (single point or batch)."""
    if not isinstance(A, MultiIndex):
        A = MultiIndex(tuple(A), m.n)
    if A.length > max_order:
        raise OrderTooHigh(f"multi-index length {A.length} exceeds the maximum order {max_order}")
    x = np.asarray(x, dtype=float)
    m.check_stencil(np.atleast_2d(x), levels=max(A.length, 1))
    fn = _compose(m, f, A)
    if x.ndim == 1:
        return float(np.real(fn(jnp.asarray(x))))
    return np.real(evaluate(jax.jit(jax.vmap(fn)), x))


def horizontal_derivative_field(m: CRManifold, f, A) -> ScalarField:
    if not isinstance(A, MultiIndex):
        A = MultiIndex(tuple(A), m.n)
    return ScalarField(_compose(m, f, A), name=f"X{A.indices}{_as_field(f).name}")


# -- domains and L^p -----------------------------------------------------------------


@dataclass
class Domain:
    mask: np.ndarray
    label: str = "grid"

    @classmethod
    def whole(cls, m: CRManifold) -> "Domain":
        return cls(np.ones(m.grid.size, dtype=bool), "grid")

    @classmethod
    def box(cls, m: CRManifold, lower, upper) -> "Domain":
        p = m.grid.points
        mask = np.all((p >= np.asarray(lower)) & (p <= np.asarray(upper)), axis=1)
        lo = ",".join(f"{float(v):g}" for v in lower)
        hi = ",".join(f"{float(v):g}" for v in upper)
        return cls(mask, f"box[{lo}]-[{hi}]")


def _domain(m, U) -> Domain:
    if U is None:
        return Domain.whole(m)
    if isinstance(U, Domain):
        return U
    return Domain(np.asarray(U, dtype=bool), "mask")


def _lp(m, U: Domain, vals, p) -> float:
    w = (m.grid.weights * np.asarray(grid_density(m)))[U.mask]
    v = np.abs(np.asarray(vals))
    if math.isinf(p):
        return float(np.max(v))
    return float(np.sum(w * v**p) ** (1.0 / p))


def lp_norm(m: CRManifold, f, p: float, U=None) -> NormReport:
    U = _domain(m, U)
    vals = _as_field(f).values(m.grid.points[U.mask])
    return NormReport("L^p", _lp(m, U, vals, p), {"p": p}, U.label)


def sobolev_norm(m: CRManifold, f, p: float, k: int, U=None, max_order: int = MAX_ORDER) -> NormReport:
    """sup over l(A) <= k of ||X^A f||_{L^p(U)}."""
    if not p > 1:
        raise ValueError("S^p_k needs p > 1")
    if k > max_order:
        raise OrderTooHigh(f"order {k} exceeds the maximum order {max_order}")
    U = _domain(m, U)
    pts = m.grid.points[U.mask]
    best, arg = 0.0, ()
    for A in MultiIndex.all(m.n, k):
        val = _lp(m, U, horizontal_derivative(m, f, A, pts, max_order), p)
        if val > best:
            best, arg = val, A.indices
    return NormReport("S^p_k", best, {"p": p, "k": k}, U.label, {"argmax": arg})


# -- Hoelder-type norms --------------------------------------------------------------


def sample_pairs(count: int, cap: int = PAIR_CAP, seed: int = 0):
    """Index pairs i < j: all of them up to the cap, else a seeded subsample."""
    total = count * (count - 1) // 2
    if total <= cap:
        i, j = np.triu_indices(count, 1)
        return i, j
    rng = np.random.default_rng(seed)
    i = rng.integers(0, count, size=cap)
    j = rng.integers(0, count - 1, size=cap)
    j = j + (j >= i)
    return i, j


def _quotient_sup(vals, dist, expo, i, j) -> float:
    d = dist
    ok = d > 0
    q = np.abs(vals[i] - vals[j])[ok] / d[ok] ** expo
    return float(np.max(q)) if q.size else 0.0


def _holder(m, f, s, U, distance, derivs, cap, seed, label, max_order) -> NormReport:
    if s <= 0 or float(s).is_integer():
        raise ValueError("Hoelder exponent must be positive and non-integer")
    U = _domain(m, U)
    k = int(math.floor(s))
    pts = m.grid.points[U.mask]
    i, j = sample_pairs(len(pts), cap, seed)
    dist = distance(pts[i], pts[j])
    f = _as_field(f)
    sup0 = float(np.max(np.abs(f.values(pts))))
    best = 0.0
    half = len(i) // 2
    best_half = 0.0
    for A in derivs(k):
        vals = np.asarray(A(pts))
        best = max(best, _quotient_sup(vals, dist, s - k, i, j))
        best_half = max(best_half, _quotient_sup(vals, dist[:half], s - k, i[:half], j[:half]))
    value = sup0 + best
    half_value = sup0 + best_half
    sat = abs(value - half_value) / value if value > 0 else 0.0
    return NormReport(label, value, {"s": s, "pairs": len(i)}, U.label, {"saturation": sat})


def gamma_norm(m: CRManifold, f, s: float, U=None, cap: int = PAIR_CAP, seed: int = 0,
               max_order: int = MAX_ORDER) -> NormReport:
    """sup |f| + sup over l(A) <= k of |X^A f(x) - X^A f(y)| / rho(x, y)^(s-k), k = floor(s)."""

    def derivs(k):
        if k > max_order:
            raise OrderTooHigh(f"order {k} exceeds the maximum order {max_order}")
        return [(lambda P, A=A: horizontal_derivative(m, f, A, P, max_order)) for A in MultiIndex.all(m.n, k)]

    return _holder(m, f, s, U, lambda X, Y: rho_pairs(m, X, Y), derivs, cap, seed, "Gamma_s", max_order)


def holder_norm(m: CRManifold, f, s: float, U=None, cap: int = PAIR_CAP, seed: int = 0,
                max_order: int = MAX_ORDER) -> NormReport:
    """Euclidean Lambda_s in chart coordinates (coordinate partial derivatives)."""
    f = _as_field(f)

    def derivs(k):
        out = []
        for ell in range(k + 1):
            for idx in itertools.product(range(m.dim), repeat=ell):
                fn = f.fn
                for a in idx:
                    fn = (lambda g, a: (lambda x: jax.grad(g)(x)[a]))(fn, a)
                out.append(lambda P, fn=fn: np.real(evaluate(jax.jit(jax.vmap(fn)), P)))
        return out

    def euclid(X, Y):
        return np.linalg.norm(X - Y, axis=1)

    return _holder(m, f, s, U, euclid, derivs, cap, seed, "Lambda_s", max_order)


# -- subelliptic probes --------------------------------------------------------------


def _gamma_grid(m, vals, s, U: Domain, cap, seed) -> float:
    """Gamma_s norm (0 < s < 1) of grid values on U."""
    pts = m.grid.points[U.mask]
    v = np.asarray(vals)[U.mask]
    i, j = sample_pairs(len(pts), cap, seed)
    return float(np.max(np.abs(v))) + _quotient_sup(v, rho_pairs(m, pts[i], pts[j]), s, i, j)


def subelliptic_probe(m: CRManifold, battery, r: float = 2.0, s: float = 0.5, k: int = 1, U=None,
                      cap: int = 20_000, seed: int = 0) -> dict:
    """Max over the battery of LHS/RHS for the four Folland-Stein inequalities.

    (a) Gamma_s <= C S^{r_a}_k, 1/r_a = (k - s)/(2n + 2) (r_a = r if that is not > 1)
    (b) Lambda_{s/2} <= C Gamma_s
    (c) S^r_2 <= C (||Delta f||_r + ||f||_r)
    (d) Gamma_{s+2} <= C (Gamma_s(Delta f) + Gamma_s(f))

    Restricted to 0 < s < 1, so Delta f is needed at the nodes only.
    """
    if not 0 < s < 1:
        raise ValueError("probe supports 0 < s < 1")
    U = _domain(m, U)
    n = m.n
    ra = (2 * n + 2) / (k - s) if k > s else r
    ra = ra if ra > 1 else r
    out = {"a": [], "b": [], "c": [], "d": []}
    pts_all = m.grid.points
    for f in battery:
        f = _as_field(f)
        g_s = gamma_norm(m, f, s, U, cap, seed).value
        lap = np.real(np.asarray(sublaplacian(m, f, pts_all))).reshape(-1)
        fv = np.asarray(f.values(pts_all))
        out["a"].append(g_s / sobolev_norm(m, f, ra, k, U).value)
        out["b"].append(holder_norm(m, f, s / 2, U, cap, seed).value / g_s)
        rhs_c = _lp(m, U, lap[U.mask], r) + _lp(m, U, fv[U.mask], r)
        out["c"].append(sobolev_norm(m, f, r, 2, U).value / rhs_c)
        rhs_d = _gamma_grid(m, lap, s, U, cap, seed) + _gamma_grid(m, fv, s, U, cap, seed)
        out["d"].append(gamma_norm(m, f, s + 2, U, cap, seed).value / rhs_d)
    return {key: float(np.max(v)) for key, v in out.items()} | {"r_a": ra, "count": len(battery)}


def bump_battery(m: CRManifold, lower, upper, count: int = 4, seed: int = 0, margin_cells: int = 4):
    """Smooth bumps supported in the box shrunk by ``margin_cells`` grid cells, times random trig factors."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    cell = np.array([ax[1] - ax[0] for ax in m.grid.axes])
    lo = lower + margin_cells * cell
    hi = upper - margin_cells * cell
    c = jnp.asarray(0.5 * (lo + hi))
    rad = jnp.asarray(0.5 * (hi - lo))
    rng = np.random.default_rng(seed)
    out = []
    for idx in range(count):
        k = jnp.asarray(rng.integers(-1, 2, size=m.dim).astype(float))
        ph = float(rng.uniform(0, 2 * np.pi))
        amp = float(rng.uniform(0.2, 0.5))

        def fn(x, k=k, ph=ph, amp=amp):
            u = (x - c) / rad
            u2 = u * u
            inside = u2 < 1.0
            safe = jnp.where(inside, u2, 0.0)
            b = jnp.prod(jnp.where(inside, jnp.exp(1.0 - 1.0 / (1.0 - safe)), 0.0))
            return b * (1.0 + amp * jnp.cos(jnp.dot(k, u) * jnp.pi + ph))

        out.append(ScalarField(fn, name=f"bump{idx}"))
    return out
