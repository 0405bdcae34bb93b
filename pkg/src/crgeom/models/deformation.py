"""Deformation families (J_k, theta_k) -> (J_0, theta_0) of a base structure.

Two recipes, both linear in eps:

* ``"contact"``: theta_eps = (1 + eps mu) theta_0, frame unchanged;
* ``"frame"``:   W_eps = Z + eps mu Zbar (n = 1), theta unchanged.

with mu = cos(2 pi x_1 / L) by default (L the lattice scale on the
nilmanifold, 1 otherwise).  Together they move both halves of the data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from ..conformal import extended_J
from ..core import ComplexFrame, ContactForm, CRManifold, _pointwise, evaluate
from ..errors import PseudoconvexityLost, UnsupportedManifold

RECIPES = ("contact", "frame")


def default_mu(m: CRManifold) -> Callable:
    L = float(m.grid.meta.get("scale", 1.0)) if m.grid is not None else 1.0
    return lambda x: jnp.cos(2 * jnp.pi * x[0] / L)


def deform(base: CRManifold, recipe: str, eps: float, mu: Callable | None = None) -> CRManifold:
    """The member with parameter eps (no pseudoconvexity check)."""
    mu = mu or default_mu(base)
    if recipe == "contact":
        th = base.theta.fn
        theta = ContactForm(lambda x: (1.0 + eps * mu(x)) * th(x), name=f"(1+{eps:g}mu){base.theta.name}")
        return base.replace(theta=theta, name=f"{base.name}[contact {eps:g}]", meta={**base.meta, "deformed": recipe})
    if recipe == "frame":
        if base.n != 1:
            raise UnsupportedManifold("frame-mixing recipe is implemented for n = 1")
        W = base.frame.fn
        frame = ComplexFrame(lambda x: W(x) + eps * mu(x) * jnp.conj(W(x)), 1, name=f"{base.frame.name}+{eps:g}mu*conj")
        return base.replace(frame=frame, name=f"{base.name}[frame {eps:g}]", meta={**base.meta, "deformed": recipe})
    raise ValueError(f"unknown recipe {recipe!r}; expected one of {RECIPES}")


def _levi_min(m: CRManifold, pts) -> float:
    g = np.asarray(_pointwise(m, "levi", pts))
    g = 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))
    return float(np.min(np.linalg.eigvalsh(g)[..., 0]))


@dataclass
class DeformationFamily:
    base: CRManifold
    recipe: str
    schedule: Sequence[float]
    mu: Callable | None = None
    sample: np.ndarray | None = None
    _members: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.recipe not in RECIPES:
            raise ValueError(f"unknown recipe {self.recipe!r}; expected one of {RECIPES}")
        self.schedule = [float(e) for e in self.schedule]
        if self.sample is None:
            self.sample = np.asarray(self.base.grid.points)
        for k in range(len(self.schedule)):
            self.member(k)

    def __len__(self):
        return len(self.schedule)

    def member(self, k: int) -> CRManifold:
        if k not in self._members:
            m = deform(self.base, self.recipe, self.schedule[k], self.mu)
            if not _levi_min(m, self.sample) > 0:
                raise PseudoconvexityLost(k)
            self._members[k] = m
        return self._members[k]

    def levi_min(self, k: int) -> float:
        return _levi_min(self.member(k), self.sample)

    def deviation(self, k: int, order: int = 0) -> float:
        """C^0 (order 0) or C^1 (order 1) distance of (theta_k, J^_k) from the base on the sample."""
        return deviation(self.base, self.member(k), self.sample, order)

    def deviations(self, order: int = 0) -> list:
        return [self.deviation(k, order) for k in range(len(self))]

    def monotone(self, order: int = 0) -> bool:
        d = self.deviations(order)
        return all(b <= a * (1 + 1e-12) for a, b in zip(d, d[1:]))


def _data(m: CRManifold):
    def th(x):
        return m.theta.fn(x)

    def J(x):
        E = m.geometry.basis(x)
        d = jnp.concatenate([jnp.zeros(1), jnp.full(m.n, 1j), jnp.full(m.n, -1j)])
        return jnp.real((E * d) @ jnp.linalg.inv(E))

    return th, J


def deviation(base: CRManifold, other: CRManifold, pts, order: int = 0) -> float:
    """max |theta - theta_0| + max |J^ - J^_0| (plus first derivatives for order 1)."""
    th0, J0 = _data(base)
    th1, J1 = _data(other)

    def diff(x):
        return jnp.concatenate([(th1(x) - th0(x)).ravel(), (J1(x) - J0(x)).ravel()])

    fns = [diff]
    if order >= 1:
        fns.append(jax.jacfwd(diff))
    out = 0.0
    pts = np.atleast_2d(pts)
    for fn in fns:
        vals = evaluate(jax.jit(jax.vmap(fn)), pts)
        out += float(np.max(np.abs(vals)))
    return out


def deformation_family(base: CRManifold, recipe: str, schedule, mu=None, sample=None) -> DeformationFamily:
    return DeformationFamily(base, recipe, schedule, mu, sample)


def webster_scalars(m: CRManifold, pts) -> dict:
    """Pointwise scalar invariants compared across a family."""
    from ..webster import tensor_norms_fast, webster

    w = webster(m, pts)
    R, A = tensor_norms_fast(w)
    return {"S": np.real(np.asarray(w.S)), "|R|": np.asarray(R), "|A|": np.asarray(A)}


def convergence_ratios(fam: DeformationFamily, pts=None) -> dict:
    """Successive ratios of max |scalar_k - scalar_0| along the schedule."""
    pts = fam.sample if pts is None else pts
    base = webster_scalars(fam.base, pts)
    devs = {key: [] for key in base}
    for k in range(len(fam)):
        sk = webster_scalars(fam.member(k), pts)
        for key in base:
            devs[key].append(float(np.max(np.abs(sk[key] - base[key]))))
    ratios = {key: [b / a if a > 0 else float("nan") for a, b in zip(d, d[1:])] for key, d in devs.items()}
    return {"deviation": devs, "ratio": ratios}
