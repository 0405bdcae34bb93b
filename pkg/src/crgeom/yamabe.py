"""CR Laplacian, Yamabe functionals, constrained minimisation and Green functions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conformal import ConformalChange, predicted_scalar, rescale, yamabe_exponent
from .core import CRManifold, ScalarField, _as_field, grid_density
from .discrete import SpectralLaplacian, b_n, discrete_laplacian
from .errors import IndefiniteOperator, NonConvergence, NonFiniteField, PositivityLoss
from .webster import covariant_jet, horizontal_gradient_sq, sublaplacian_from_jet, webster


@dataclass
class GridDensity:
    values: np.ndarray
    positive: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteField("grid density has non-finite values")
        if self.positive and np.min(self.values) <= 0:
            raise PositivityLoss("grid density flagged positive has non-positive values")


@dataclass
class YamabeSolution:
    u: GridDensity
    Y_est: float
    EL_residual: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    clip_events: int = 0

    def summary(self) -> dict:
        return {
            "Y_est": float(self.Y_est),
            "EL_residual": float(self.EL_residual),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }


@dataclass
class YamabeOptions:
    tol: float = 1e-8
    max_iter: int = 200
    step: float = 1.0
    armijo: float = 0.5
    c1: float = 1e-4
    clip_floor: float = 1e-8
    max_clip_fraction: float = 0.05
    shift: float | None = None
    raise_on_failure: bool = False


@dataclass
class GreenFunction:
    pole: int
    values: np.ndarray
    normalization: float
    residual: float
    offset: bool
    positive: bool
    raw: np.ndarray | None = None

    def summary(self) -> dict:
        return {
            "pole": int(self.pole),
            "min": float(np.min(self.values)),
            "max": float(np.max(self.values)),
            "residual": float(self.residual),
            "offset": bool(self.offset),
            "positive": bool(self.positive),
        }


def _op(m: CRManifold, w=None) -> SpectralLaplacian:
    return w if isinstance(w, SpectralLaplacian) else discrete_laplacian(m)


def _values(op, u):
    if isinstance(u, GridDensity):
        return u.values.reshape(op.shape)
    if isinstance(u, ScalarField) or callable(u):
        return np.asarray(_as_field(u).values(op.m.grid.points)).reshape(op.shape)
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        return np.full(op.shape, float(arr))
    return arr.reshape(op.shape)


def cr_laplacian_apply(m: CRManifold, w, u) -> GridDensity:
    """L_theta u = (b_n Delta_theta + S) u on the grid."""
    op = _op(m, w)
    return GridDensity(op.apply(_values(op, u)).reshape(-1))


@dataclass
class AReport:
    value: float  # gradient form
    operator_form: float
    defect: float


def functional_A(m: CRManifold, w, u) -> AReport:
    """A(theta; u) in gradient form and as integral of u L u.

    For a :class:`ScalarField` both forms use pointwise derivatives and the
    grid quadrature, so the defect measures discrete integration by parts.
    For grid values both use the discrete operator.
    """
    if isinstance(u, ScalarField):
        pts = m.grid.points
        jet = covariant_jet(m, u, pts)
        uv = np.asarray(u.values(pts))
        S = np.asarray(_op(m, w).S).reshape(-1)
        bn = b_n(m.n)
        dens = m.grid.weights * np.asarray(grid_density(m))
        g_form = float(np.sum(dens * (bn * horizontal_gradient_sq(jet) + S * uv * uv)))
        lap = np.real(sublaplacian_from_jet(jet))
        o_form = float(np.sum(dens * uv * (bn * lap + S * uv)))
    else:
        op = _op(m, w)
        g_form, o_form = op.quadratic_forms(_values(op, u))
    return AReport(g_form, o_form, abs(g_form - o_form))


def functional_B(m: CRManifold, u, w=None) -> float:
    op = _op(m, w)
    v = _values(op, u)
    return float(np.sum(op.omega * np.abs(v) ** yamabe_exponent(m.n)))


def el_residual(op: SpectralLaplacian, u: np.ndarray, p: float) -> tuple[float, float]:
    """(A(u), ||L u - A u^{p-1}|| / ||u||) for u on the constraint B = 1."""
    Lu = op.apply(u)
    A = op.inner(u, Lu)
    r = Lu - A * np.abs(u) ** (p - 2) * u
    return A, float(np.sqrt(op.inner(r, r) / op.inner(u, u)))


def _normalize(op, u, p):
    B = float(np.sum(op.omega * np.abs(u) ** p))
    return u / B ** (1.0 / p)


def yamabe_minimize(m: CRManifold, w, init, opts: YamabeOptions | None = None) -> YamabeSolution:
    """Preconditioned projected descent for inf A(u) subject to B(u) = 1.

    The search direction is (L + mu)^{-1} applied to the L^2 gradient
    L u - A u^{p-1} (a Sobolev gradient); steps are backtracked until the
    Yamabe quotient, evaluated after clipping and renormalisation, drops.
    """
    opts = opts or YamabeOptions()
    op = _op(m, w)
    p = yamabe_exponent(m.n)
    u = _values(op, init).copy()
    if np.min(u) <= 0:
        raise PositivityLoss("initial density must be positive")
    u = _normalize(op, u, p)
    mu = opts.shift if opts.shift is not None else 1.0 + max(0.0, -float(np.min(op.S)))
    A, res = el_residual(op, u, p)
    history = [A]
    clip_events = 0
    it = 0
    converged = res <= opts.tol
    while not converged and it < opts.max_iter:
        it += 1
        g = op.apply(u) - A * u ** (p - 1)
        s = op.solve(g, shift=mu, exact=False)
        slope = op.inner(g, s)
        alpha = opts.step
        accepted = False
        while alpha > 1e-12:
            trial = u - alpha * s
            floor = opts.clip_floor * np.max(trial)
            clipped = trial < floor
            if np.mean(clipped) > opts.max_clip_fraction:
                alpha *= opts.armijo
                continue
            trial = _normalize(op, np.where(clipped, floor, trial), p)
            At = op.inner(trial, op.apply(trial))
            if At <= A - 2 * opts.c1 * alpha * slope:
                accepted = True
                clip_events += int(np.any(clipped))
                break
            alpha *= opts.armijo
        if not accepted:
            if np.mean(u - s < opts.clip_floor * np.max(u)) > opts.max_clip_fraction:
                raise PositivityLoss("line search keeps clipping more than the allowed fraction")
            break
        u = trial
        A, res = el_residual(op, u, p)
        history.append(A)
        converged = res <= opts.tol
    sol = YamabeSolution(GridDensity(u.reshape(-1), positive=True), A, res, it, converged, history, clip_events)
    if not converged and opts.raise_on_failure:
        raise NonConvergence(f"EL residual {res:.3e} after {it} iterations", sol)
    return sol


def scalar_of_rescaled(op: SpectralLaplacian, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scalar curvature of u^{p-2} theta on the grid, two ways.

    * from the CR Yamabe equation: u^{1-p} L u,
    * from the scalar transformation law with f = log(u)/n, using the
      discrete sublaplacian and gradient of f.
    """
    n = op.n
    p = yamabe_exponent(n)
    via_u = op.apply(u) / u ** (p - 1)
    f = np.log(u) / n
    grad2 = op.dirichlet_density(f)  # = 2 f^l f_l
    via_f = np.exp(-2 * f) * (op.S + 2 * (n + 1) * op.sublaplacian(f) - 2 * n * (n + 1) * grad2)
    return via_u, via_f


def constant_curvature_residual(m: CRManifold, w, u) -> float:
    """Max over two computations of the std-dev of the rescaled scalar curvature."""
    if isinstance(u, ScalarField):
        c = ConformalChange.from_u(u, m.n)
        pts = m.grid.points
        direct = np.real(webster(rescale(m, c), pts).S)
        pred = predicted_scalar(m, webster(m, pts), c, pts)
        return float(max(np.std(direct), np.std(pred)))
    op = _op(m, w)
    v = _values(op, u)
    if np.min(v) <= 0:
        raise PositivityLoss("u must be positive")
    a, b = scalar_of_rescaled(op, v)
    return float(max(np.std(a), np.std(b)))


def _pole_neighborhood(shape, pole, periodic, radius=2):
    idx = np.unravel_index(pole, shape)
    grids = np.meshgrid(*[np.arange(s) for s in shape], indexing="ij")
    mask = np.ones(shape, dtype=bool)
    for ax, (g, c) in enumerate(zip(grids, idx)):
        d = np.abs(g - c)
        if periodic[ax]:
            d = np.minimum(d, shape[ax] - d)
        mask &= d <= radius
    return mask


def green_function(m: CRManifold, w, pole_index: int, strength: float = 1.0, tol: float = 1e-9) -> GreenFunction:
    """Discrete Green function of L_theta with pole at a grid node, normalised by min G = 1.

    With a kernel (S = 0 on the flat nilmanifold) the source is projected on
    the mean-zero complement and the result offset to min 1 instead of scaled.
    """
    op = _op(m, w)
    lam0 = op.min_eigenvalue()
    scale = max(1.0, float(np.max(np.abs(op.S))))
    if lam0 < -tol * scale:
        raise IndefiniteOperator(f"smallest eigenvalue of L is {lam0:.3e}")
    kernel = abs(lam0) <= tol * scale
    b = np.zeros(op.shape)
    b.flat[pole_index] = strength / op.omega.flat[pole_index]
    if kernel:
        b = b - np.sum(op.omega * b) / np.sum(op.omega)
    G = op.solve(b, allow_kernel=kernel)
    if kernel:
        G = G - np.sum(op.omega * G) / np.sum(op.omega)
        s, Gn = 1.0, G - np.min(G) + 1.0
        src = b
    else:
        s = 1.0 / np.min(G) if np.min(G) > 0 else 1.0
        Gn = G * s
        src = b * s
    periodic = m.chart.periodic
    far = ~_pole_neighborhood(op.shape, pole_index, periodic)
    r = op.apply(Gn) - src
    resid = float(np.max(np.abs(r[far])))
    positive = bool(np.min(G) > 0) or kernel
    return GreenFunction(pole_index, Gn.reshape(-1), s, resid, kernel, positive, raw=G.reshape(-1))


def uniqueness_experiment(m: CRManifold, w, n_inits: int = 5, seed: int = 0, opts=None, amplitude: float = 0.3) -> dict:
    """Minimise from random positive starts and compare the unit-volume solutions."""
    op = _op(m, w)
    rng = np.random.default_rng(seed)
    p = yamabe_exponent(m.n)
    sols = []
    for _ in range(n_inits):
        init = random_positive_field(op, rng, amplitude)
        sol = yamabe_minimize(m, op, init, opts)
        v = sol.u.values.reshape(op.shape)
        vol = np.sum(op.omega)
        sols.append((sol, v / (np.sum(op.omega * v**p) / vol) ** (1 / p)))
    dev = 0.0
    for i in range(len(sols)):
        for j in range(i + 1, len(sols)):
            dev = max(dev, float(np.max(np.abs(sols[i][1] - sols[j][1]))))
    return {
        "n_inits": n_inits,
        "max_pairwise_deviation": dev,
        "Y_est": [float(s.Y_est) for s, _ in sols],
        "EL_residual": [float(s.EL_residual) for s, _ in sols],
        "converged": [bool(s.converged) for s, _ in sols],
        "solutions": [v for _, v in sols],
    }


def random_positive_field(op: SpectralLaplacian, rng, amplitude: float = 0.3, modes: int = 3) -> np.ndarray:
    """1 + amplitude * (random low-order trig polynomial in the chart coordinates), kept positive.

    Only coordinates along which functions are plain-periodic are used
    (x, y on the nilmanifold; xi1, xi2 and cos(2 eta) on the Hopf grid).
    """
    pts = op.m.grid.points
    out = np.zeros(len(pts))
    for _ in range(modes):
        if op.m.grid.kind == "hopf":
            k = rng.integers(-2, 3, size=2)
            arg = k[0] * pts[:, 1] + k[1] * pts[:, 2] + rng.uniform(0, 2 * np.pi)
            env = np.cos(pts[:, 0]) ** abs(k[0]) * np.sin(pts[:, 0]) ** abs(k[1])
            out += rng.normal() * env * np.cos(arg)
        else:
            L = op.L
            k = rng.integers(-2, 3, size=2)
            arg = 2 * np.pi * (k[0] * pts[:, 0] + k[1] * pts[:, 1]) / L + rng.uniform(0, 2 * np.pi)
            out += rng.normal() * np.cos(arg)
    out = out / max(1e-12, np.max(np.abs(out)))
    return (1.0 + amplitude * out).reshape(op.shape)


def sobolev_probe(m: CRManifold, w, battery) -> dict:
    """max over the battery of int |v|^p / int (|dv|^2 + v^2), with pointwise derivatives."""
    p = yamabe_exponent(m.n)
    pts = m.grid.points
    dens = m.grid.weights * np.asarray(grid_density(m))
    ratios = []
    for v in battery:
        v = _as_field(v)
        vals = np.asarray(v.values(pts))
        jet = covariant_jet(m, v, pts)
        num = float(np.sum(dens * np.abs(vals) ** p))
        den = float(np.sum(dens * (horizontal_gradient_sq(jet) + vals**2)))
        ratios.append(num / den)
    return {"worst": float(np.max(ratios)), "ratios": [float(r) for r in ratios]}


def random_trig_battery(m: CRManifold, count: int, seed: int = 0, max_k: int = 2):
    """Random trig fields in the plain-periodic coordinates of the model."""
    rng = np.random.default_rng(seed)
    out = []
    L = float(m.grid.meta.get("scale", 1.0)) if m.grid is not None else 1.0
    for i in range(count):
        terms = []
        for _ in range(3):
            k = np.zeros(m.dim)
            k[: 2 * m.n] = rng.integers(-max_k, max_k + 1, size=2 * m.n) / L
            terms.append((float(rng.normal()), tuple(k), float(rng.uniform(0, 2 * np.pi))))
        terms.append((float(1.0 + rng.uniform()), (0.0,) * m.dim, 0.0))
        out.append(ScalarField.trig(terms, name=f"battery{i}"))
    return out
