"""Pseudoconformal rescaling theta -> e^{2f} theta and its transformation laws."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from .core import (
    ComplexFrame,
    ContactForm,
    CRManifold,
    ScalarField,
    _as_field,
    _pointwise,
    evaluate,
)
from .errors import MapOutOfDomain, NonPositiveDensity, NotPositiveDefinite, SingularFrame
from .webster import CovariantJet, WebsterData, covariant_jet, sublaplacian_from_jet, webster


def yamabe_exponent(n: int) -> float:
    return 2.0 + 2.0 / n


@dataclass
class ConformalChange:
    """A rescaling given either by f (theta~ = e^{2f} theta) or by u > 0 with u^{p-2} = e^{2f}."""

    n: int
    f: ScalarField
    u: ScalarField
    given: str = "f"

    @property
    def p(self) -> float:
        return yamabe_exponent(self.n)

    @classmethod
    def from_f(cls, f, n: int) -> "ConformalChange":
        f = _as_field(f)
        u = ScalarField(lambda x: jnp.exp(n * f.fn(x)), name=f"exp({n}*{f.name})")
        return cls(n, f, u, "f")

    @classmethod
    def from_u(cls, u, n: int) -> "ConformalChange":
        u = _as_field(u)
        # u^{2/n} = e^{2f}
        f = ScalarField(lambda x: jnp.log(u.fn(x)) / n, name=f"log({u.name})/{n}")
        return cls(n, f, u, "u")

    def check(self, points, tol: float = 1e-10) -> None:
        """Raise NonPositiveDensity unless u > 0 and u^{p-2} matches e^{2f} on points."""
        pts = np.atleast_2d(points)
        uv = np.asarray(self.u.values(pts))
        if not np.all(np.isfinite(uv)) or np.any(uv <= 0):
            raise NonPositiveDensity("conformal factor u must be positive")
        fv = np.asarray(self.f.values(pts))
        e2f = np.exp(2 * fv)
        if np.max(np.abs(uv ** (self.p - 2) - e2f) / e2f) > tol:
            raise NonPositiveDensity("u^{p-2} and e^{2f} disagree")


def _change(m: CRManifold, c) -> ConformalChange:
    if isinstance(c, ConformalChange):
        return c
    return ConformalChange.from_f(c, m.n)


def rescale(m: CRManifold, c, adapt_frame: bool = False) -> CRManifold:
    """The manifold with contact form e^{2f} theta.

    By default the frame is shared, so g~ = e^{2f} g.  With ``adapt_frame``
    the frame becomes e^{-f} W, whose dual admissible coframe is
    e^f(theta^a + i f^a theta) and whose Levi matrix equals g; this is the
    frame in which the transformation laws below are stated.
    """
    c = _change(m, c)
    if m.grid is not None:
        c.check(m.grid.points)
    f = c.f.fn
    th = m.theta.fn
    theta = ContactForm(lambda x: jnp.exp(2 * f(x)) * th(x), name=f"e^2f*{m.theta.name}")
    frame = m.frame
    if adapt_frame:
        W = m.frame.fn
        frame = ComplexFrame(lambda x: jnp.exp(-f(x)) * W(x), m.n, name=f"e^-f*{m.frame.name}")
    meta = dict(m.meta)
    for k in ("_density", "_scalar", "_laplacian"):
        meta.pop(k, None)
    meta["rescaled_by"] = c.f.name
    return m.replace(theta=theta, frame=frame, name=f"{m.name}~", meta=meta)


# -- index gymnastics on a jet -----------------------------------------------------


def _raised(j: CovariantJet):
    n = j.n
    gi = j.ginv
    F2 = j.second
    up = j.raised_first()  # f^a
    lam = np.einsum("...a,...a->...", up, j.f_a)  # f^l f_l
    # f^b_g = g^{b mbar} f_{mbar g}
    f_up_low = np.einsum("...bm,...mg->...bg", gi, F2[..., 1 + n :, 1 : 1 + n])
    # f_a^b = g^{b mbar} f_{a mbar}
    f_low_up = np.einsum("...bm,...am->...ab", gi, F2[..., 1 : 1 + n, 1 + n :])
    # f^a_bbar = g^{a mbar} f_{mbar bbar}
    f_up_bar = np.einsum("...am,...mb->...ab", gi, F2[..., 1 + n :, 1 + n :])
    return up, lam, f_up_low, f_low_up, f_up_bar


def _f_and_jet(m, c, x, jet):
    c = _change(m, c)
    if jet is None:
        jet = covariant_jet(m, c.f, x)
    fv = np.asarray(c.f.values(np.atleast_2d(x)))
    if np.ndim(x) == 1:
        fv = fv[0]
    return c, fv, jet


def predicted_scalar(m, w, c, x, jet: CovariantJet | None = None):
    """e^{-2f}{S + 2(n+1) Delta f - 4n(n+1) f^l f_l} (real part)."""
    n = m.n
    w = webster(m, x) if w is None else w
    c, fv, jet = _f_and_jet(m, c, x, jet)
    S = np.asarray(w.S)
    if np.ndim(x) == 1:
        S = S.reshape(-1)[0]
    lap = sublaplacian_from_jet(jet)
    _, lam, *_ = _raised(jet)
    out = np.exp(-2 * fv) * (S + 2 * (n + 1) * lap - 4 * n * (n + 1) * lam)
    return np.real(out)


def predicted_curvature(m, w, c, x, jet: CovariantJet | None = None):
    """Curvature of e^{2f} theta in the coframe e^f(theta^a + i f^a theta)."""
    n = m.n
    w = webster(m, x) if w is None else w
    c, fv, jet = _f_and_jet(m, c, x, jet)
    R, g = w.R, w.g
    if np.ndim(x) == 1:
        R, g = R.reshape(R.shape[-4:]), g.reshape(g.shape[-2:])
    I = np.eye(n)
    _, lam, f_up_low, f_low_up, _ = _raised(jet)
    fgs = jet.f_abbar + np.swapaxes(jet.f_bbara, -1, -2)  # f_{g sbar} + f_{sbar g}
    lam = np.asarray(lam)[..., None, None, None, None]
    out = (
        R
        - np.einsum("ab,...gs->...abgs", I, fgs)
        - 2 * np.einsum("...as,...bg->...abgs", g, f_up_low)
        - 2 * np.einsum("...as,bg->...abgs", jet.f_abbar, I)
        - np.einsum("...ba,...gs->...abgs", f_up_low + np.swapaxes(f_low_up, -1, -2), g)
        - 4 * lam * (np.einsum("ab,...gs->...abgs", I, g) + np.einsum("...as,bg->...abgs", g, I))
    )
    return np.exp(-2 * np.asarray(fv))[..., None, None, None, None] * out


def predicted_torsion(m, w, c, x, jet: CovariantJet | None = None):
    """e^{-2f}(A^a_bbar - i f^a_bbar + 2i f^a f_bbar)."""
    w = webster(m, x) if w is None else w
    c, fv, jet = _f_and_jet(m, c, x, jet)
    A = w.A if np.ndim(x) != 1 else w.A.reshape(w.A.shape[-2:])
    up, _, _, _, f_up_bar = _raised(jet)
    out = A - 1j * f_up_bar + 2j * np.einsum("...a,...b->...ab", up, jet.f_abar)
    return np.exp(-2 * np.asarray(fv))[..., None, None] * out


def contract_curvature(R, g):
    """S from R_a^b_{g sbar}: Ric_{g sbar} = R_a^a_{g sbar}, S = Ric_{g sbar} g^{g sbar}."""
    Ric = np.einsum("...aags->...gs", R)
    ginv = np.linalg.inv(np.swapaxes(g, -1, -2))
    return np.real(np.einsum("...gs,...gs->...", Ric, ginv))


def predicted_coframe(m: CRManifold, c, x, jet: CovariantJet | None = None):
    """Rows e^f(theta^a + i f^a theta) as complex coordinate covectors."""
    c, fv, jet = _f_and_jet(m, c, x, jet)
    pts = np.atleast_2d(x)
    C = np.asarray(_pointwise(m, "coframe", pts))
    n = m.n
    th = C[:, 0, :]
    tha = C[:, 1 : 1 + n, :]
    up = np.asarray(jet.raised_first()).reshape(len(pts), n)
    out = np.exp(np.reshape(fv, (-1, 1, 1))) * (tha + 1j * up[:, :, None] * th[:, None, :])
    return out[0] if np.ndim(x) == 1 else out


# -- maps ---------------------------------------------------------------------


@dataclass
class SmoothMap:
    """A map between chart domains with its real differential.

    ``forward`` must be jax-traceable when ``differential`` is omitted.
    """

    forward: Callable
    differential: Callable | None = None
    name: str = "map"

    def __post_init__(self):
        if self.differential is None:
            self.differential = jax.jacfwd(self.forward)

    def __call__(self, x):
        return self.forward(x)

    def compose(self, other: "SmoothMap") -> "SmoothMap":
        """self o other."""
        f, g = self.forward, other.forward
        df, dg = self.differential, other.differential
        return SmoothMap(lambda x: f(g(x)), lambda x: df(g(x)) @ dg(x), f"{self.name}o{other.name}")


def _target_point(F: SmoothMap, target: CRManifold, x):
    y = np.asarray(F.forward(jnp.asarray(x, dtype=float)), dtype=float)
    if not np.all(target.chart.contains(y)):
        raise MapOutOfDomain(f"F(x) = {y} lies outside chart {target.chart.id}")
    return y


def pseudoconformal_factor(F: SmoothMap, source: CRManifold, target: CRManifold, x):
    """(lambda, residual) with F* theta~ = lambda theta + residual-sized error at x."""
    x = np.asarray(x, dtype=float)
    y = _target_point(F, target, x)
    DF = np.asarray(F.differential(jnp.asarray(x)))
    pull = np.asarray(target.theta(jnp.asarray(y))) @ DF
    T = np.asarray(_pointwise(source, "reeb", x))
    th = np.asarray(source.theta(jnp.asarray(x)))
    lam = float(pull @ T / (th @ T))
    return lam, float(np.max(np.abs(pull - lam * th)))


def cr_automorphism_residual(F: SmoothMap, m: CRManifold, x, target: CRManifold | None = None):
    """Relative size of the part of F_* W_a(x) outside span{W_b(F(x))}, max over a."""
    target = m if target is None else target
    x = np.asarray(x, dtype=float)
    y = _target_point(F, target, x)
    DF = np.asarray(F.differential(jnp.asarray(x)))
    # frame rows are the W_a; columns here
    push = DF @ np.asarray(m.frame(jnp.asarray(x))).T
    Wy = np.asarray(target.frame(jnp.asarray(y))).T
    coef, *_ = np.linalg.lstsq(Wy, push, rcond=None)
    out = push - Wy @ coef
    nrm = np.linalg.norm(push, axis=0)
    if np.any(nrm == 0):
        raise SingularFrame("pushforward of a frame vector vanishes")
    return float(np.max(np.linalg.norm(out, axis=0) / nrm))


def extended_J(m: CRManifold, x):
    """Real (2n+1)x(2n+1) matrix of J^ (J^ T = 0) in coordinates."""
    n = m.n
    E = np.asarray(_pointwise(m, "basis", x))
    d = np.concatenate([[0.0], np.full(n, 1j), np.full(n, -1j)])
    return np.real((E * d) @ np.linalg.inv(E))


def adapted_metric(m: CRManifold, x, check: bool = True):
    """theta (x) theta + d theta(., J^ .) as a real symmetric matrix."""
    x = np.asarray(x, dtype=float)
    th = np.asarray(m.theta(jnp.asarray(x)))
    dth = np.asarray(_pointwise(m, "dtheta", x))
    J = extended_J(m, x)
    G = np.outer(th, th) + dth @ J
    if check:
        ev = np.linalg.eigvalsh(0.5 * (G + G.T))
        if ev[0] <= 0:
            raise NotPositiveDefinite("adapted metric is not positive definite")
    return G


# -- named map families -----------------------------------------------------------


def heisenberg_dilation(lam: float, n: int = 1) -> SmoothMap:
    from .errors import NonPositiveDilation

    if lam <= 0:
        raise NonPositiveDilation(f"dilation factor must be positive, got {lam}")
    s = jnp.concatenate([jnp.full(2 * n, lam), jnp.array([lam**2])])
    return SmoothMap(lambda x: s * x, lambda x: jnp.diag(s), f"dilation({lam})")


def heisenberg_translation(a, n: int = 1) -> SmoothMap:
    """Left translation y -> a . y."""
    from .models.heisenberg import group_law_jnp

    a = jnp.asarray(a, dtype=float)
    return SmoothMap(lambda x: group_law_jnp(a, x), name="translation")


def heisenberg_conjugation(n: int = 1) -> SmoothMap:
    """(z, t) -> (zbar, t): not CR."""
    s = jnp.concatenate([jnp.ones(n), -jnp.ones(n), jnp.ones(1)])
    return SmoothMap(lambda x: s * x, lambda x: jnp.diag(s), "conjugation")


def identity_map(dim: int) -> SmoothMap:
    return SmoothMap(lambda x: x, lambda x: jnp.eye(dim), "identity")


def transformation_check(m: CRManifold, c, x) -> dict:
    """Predicted vs directly recomputed S, R, A of e^{2f} theta at x.

    The rescaled structure uses the adapted frame e^{-f} W, in which the
    predictions are stated.  Deviations are max |pred - direct| divided by
    max(1, max |direct|).
    """
    c = _change(m, c)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    w = webster(m, x)
    wt = webster(rescale(m, c, adapt_frame=True), x)
    jet = covariant_jet(m, c.f, x)
    pred = {
        "S": predicted_scalar(m, w, c, x, jet),
        "R": predicted_curvature(m, w, c, x, jet),
        "A": predicted_torsion(m, w, c, x, jet),
    }
    direct = {"S": np.real(np.asarray(wt.S)), "R": np.asarray(wt.R), "A": np.asarray(wt.A)}
    out = {}
    for key in pred:
        scale = max(1.0, float(np.max(np.abs(direct[key]))))
        out[key] = float(np.max(np.abs(np.asarray(pred[key]) - direct[key]))) / scale
    return out
