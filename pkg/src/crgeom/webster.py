"""Webster connection, torsion, curvature, norms, covariant jets and the sublaplacian.

Index layout of the stored arrays (all per point):

* ``g[a, b]``          g_{a bbar}
* ``omega[b, a, c]``   coefficient of omega_b^a on the c-th covector of
  {theta, theta^1..theta^n, theta^1bar..theta^nbar}
* ``A[a, b]``          A^a_{bbar}
* ``R[a, b, g, s]``    R_a^b_{g sbar}
* ``Ric[a, b]``        R_{a bbar}
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import jax.numpy as jnp
import numpy as np

from .core import CRManifold, ScalarField, _pointwise, evaluate
from .errors import NotPositiveDefinite, UnderdeterminedSystem

CONNECTION_TOL = 1e-8


@dataclass
class WebsterData:
    points: np.ndarray
    g: np.ndarray
    omega: np.ndarray
    A: np.ndarray
    residual: np.ndarray
    R: np.ndarray | None = None
    Ric: np.ndarray | None = None
    S: np.ndarray | None = None
    discarded: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.g.shape[-1]

    def metric_compatibility_residual(self, m: CRManifold) -> np.ndarray:
        """Max |dg - omega_{a bbar} - omega_{bbar a}| evaluated on the basis."""
        geo = m.geometry

        def fn(x):
            w, _, _ = geo.connection(x)
            G = geo.levi(x)
            dG = jnp.einsum("abi,ic->abc", geo.deriv.jacobian(geo.levi)(x), geo.basis(x))
            wbar = w.conj()[:, :, geo._sigma]
            r = dG - jnp.einsum("agc,gb->abc", w, G) - jnp.einsum("bgc,ag->abc", wbar, G)
            return jnp.max(jnp.abs(r))

        return evaluate(geo.batched_fn(("metric_res",), fn), self.points)

    def torsion_symmetry_residual(self) -> np.ndarray:
        Alow = np.einsum("...ag,...ab->...gb", self.g, self.A)
        return np.max(np.abs(Alow - np.swapaxes(Alow, -1, -2)), axis=(-1, -2))

    def to_csv(self, path) -> None:
        """One row per point; tensor entries flattened row-major (a, b, g, sbar)."""
        pts = np.atleast_2d(self.points)
        cols = {"S": self.S, "g": self.g, "A": self.A, "R": self.R, "Ric": self.Ric}
        header = [f"x{i}" for i in range(pts.shape[1])]
        data = []
        for key, val in cols.items():
            if val is None:
                continue
            flat = np.asarray(val).reshape(len(pts), -1)
            for j in range(flat.shape[1]):
                if np.iscomplexobj(flat):
                    header += [f"{key}_{j}_re", f"{key}_{j}_im"]
                    data += [flat[:, j].real, flat[:, j].imag]
                else:
                    header.append(f"{key}_{j}" if flat.shape[1] > 1 else key)
                    data.append(flat[:, j])
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for i in range(len(pts)):
                wr.writerow([repr(float(v)) for v in pts[i]] + [repr(float(d[i])) for d in data])


def _check_residual(res, tol):
    worst = float(np.max(res))
    if worst > 100 * tol:
        raise UnderdeterminedSystem(
            f"structure-equation least-squares residual {worst:.3e} exceeds {100 * tol:.1e}"
        )


def _check_levi(g, tol: float = 1e-12):
    g = np.asarray(g)
    if not np.all(np.isfinite(g)):
        raise NotPositiveDefinite("Levi form is not finite (singular frame or contact form)")
    gh = 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))
    ev = np.linalg.eigvalsh(gh)
    if np.any(ev[..., 0] <= tol * np.maximum(1.0, np.abs(ev[..., -1]))):
        raise NotPositiveDefinite("Levi form is not positive definite")


def solve_connection(m: CRManifold, x, tol: float = CONNECTION_TOL) -> WebsterData:
    """Connection coefficients and torsion from the structure equations at x."""
    m.check_stencil(x, levels=2)
    geo = m.geometry

    def fn(p):
        w, A, res = geo.connection(p)
        return geo.levi(p), w, A, res

    g, w, A, res = _pointwise_fn(m, ("connection+levi",), fn, x)
    _check_levi(g)
    _check_residual(res, tol if m.derivative.kind == "analytic" else 1e-4)
    return WebsterData(np.atleast_2d(x), g, w, A, res)


def _pointwise_fn(m, key, fn, x):
    # always batched: a single point comes back with a leading axis of 1
    return evaluate(m.geometry.batched_fn(key, fn), np.atleast_2d(np.asarray(x, dtype=float)))


def webster(m: CRManifold, x, tol: float = CONNECTION_TOL) -> WebsterData:
    """Full Webster data (connection, torsion, curvature, Ricci, scalar) at x."""
    m.check_stencil(x, levels=3)
    out = _pointwise_fn(m, ("webster",), m.geometry.webster, x)
    _check_levi(out["g"])
    _check_residual(out["residual"], tol if m.derivative.kind == "analytic" else 1e-4)
    return WebsterData(
        np.atleast_2d(x), out["g"], out["omega"], out["A"], out["residual"],
        out["R"], out["Ric"], np.real_if_close(out["S"], tol=1e6), out["discarded"],
    )


def curvature(m: CRManifold, x, w: WebsterData | None = None) -> np.ndarray:
    """R_a^b_{g sbar} extracted from d omega - omega ^ omega on (W_g, Wbar_s)."""
    if w is not None and w.R is not None:
        return w.R
    return webster(m, x).R


def ricci_scalar(w: WebsterData):
    """(R_{a bbar}, S) by contraction of the stored curvature."""
    if w.R is None:
        raise ValueError("curvature not computed")
    Ric = np.einsum("...ggab->...ab", w.R)
    ginv = np.linalg.inv(np.swapaxes(w.g, -1, -2))
    S = np.einsum("...ab,...ab->...", Ric, ginv)
    return Ric, S


def pivoted_cholesky(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lower-triangular L and permutation p with G[p][:, p] = L L^H.

    Pivot on the largest remaining diagonal entry; ties go to the lower index.
    """
    G = np.array(G, dtype=complex)
    k = G.shape[0]
    perm = np.arange(k)
    L = np.zeros_like(G)
    for j in range(k):
        diag = np.real(np.diag(G))[j:] - np.sum(np.abs(L[j:, :j]) ** 2, axis=1)
        piv = j + int(np.argmax(diag))
        if piv != j:
            G[[j, piv]] = G[[piv, j]]
            G[:, [j, piv]] = G[:, [piv, j]]
            L[[j, piv]] = L[[piv, j]]
            perm[[j, piv]] = perm[[piv, j]]
        d = np.real(G[j, j]) - np.sum(np.abs(L[j, :j]) ** 2)
        if d <= 0:
            raise NotPositiveDefinite("Levi form is not positive definite")
        L[j, j] = np.sqrt(d)
        for i in range(j + 1, k):
            L[i, j] = (G[i, j] - np.sum(L[i, :j] * np.conj(L[j, :j]))) / L[j, j]
    return L, perm


def unitary_change(G: np.ndarray) -> np.ndarray:
    """U with U G U^H = I, so W' = U W is a unitary frame."""
    L, perm = pivoted_cholesky(G)
    Linv = np.linalg.inv(L)
    U = np.zeros_like(Linv)
    U[:, perm] = Linv
    return U


def transform_tensors(R, A, U):
    """Re-express R and A in the frame W' = U W."""
    V = np.linalg.inv(U)
    R2 = np.einsum("ax,yb,cz,dw,xyzw->abcd", U, V, U, np.conj(U), R) if R is not None else None
    A2 = np.einsum("xa,by,xy->ab", V, np.conj(U), A)
    return R2, A2


def tensor_norms(w: WebsterData):
    """(|R|_theta, |T|_theta) per point, computed in a unitary frame."""
    G = np.asarray(w.g).reshape(-1, w.n, w.n)
    As = np.asarray(w.A).reshape(-1, w.n, w.n)
    Rs = None if w.R is None else np.asarray(w.R).reshape(-1, w.n, w.n, w.n, w.n)
    nr, nt = [], []
    for i in range(len(G)):
        U = unitary_change(G[i])
        R2, A2 = transform_tensors(None if Rs is None else Rs[i], As[i], U)
        nr.append(np.nan if R2 is None else np.sqrt(np.sum(np.abs(R2) ** 2)))
        nt.append(np.sqrt(np.sum(np.abs(A2) ** 2)))
    return np.asarray(nr), np.asarray(nt)


def tensor_norms_fast(w: WebsterData):
    """Vectorised norms using the plain Cholesky factor (same values as :func:`tensor_norms`)."""
    G = np.asarray(w.g)
    Gh = 0.5 * (G + np.conj(np.swapaxes(G, -1, -2)))
    try:
        L = np.linalg.cholesky(Gh)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Levi form is not positive definite") from exc
    U = np.linalg.inv(L)
    V = L
    R2 = np.einsum("...ax,...yb,...cz,...dw,...xyzw->...abcd", U, V, U, np.conj(U), w.R)
    A2 = np.einsum("...xa,...by,...xy->...ab", V, np.conj(U), w.A)
    return (
        np.sqrt(np.sum(np.abs(R2) ** 2, axis=(-4, -3, -2, -1))),
        np.sqrt(np.sum(np.abs(A2) ** 2, axis=(-2, -1))),
    )


@dataclass
class CovariantJet:
    """First and second covariant derivatives of a scalar on the basis {T, W, Wbar}.

    ``first[a]`` = e_a f; ``second[a, b]`` = f_{ab} (derivative along e_a
    taken first).  Named accessors return the n x n blocks.
    """

    first: np.ndarray
    second: np.ndarray
    g: np.ndarray

    @property
    def n(self) -> int:
        return self.g.shape[-1]

    def _blk(self, i, j):
        n = self.n
        sl = [slice(1, 1 + n), slice(1 + n, 1 + 2 * n)]
        return self.second[..., sl[i], sl[j]]

    @property
    def f_a(self):
        return self.first[..., 1 : 1 + self.n]

    @property
    def f_abar(self):
        return self.first[..., 1 + self.n :]

    @property
    def f_ab(self):
        return self._blk(0, 0)

    @property
    def f_abbar(self):
        return self._blk(0, 1)

    @property
    def f_bbara(self):
        return self._blk(1, 0)

    @property
    def f_abarbbar(self):
        return self._blk(1, 1)

    @property
    def ginv(self):
        # ginv[a, b] = g^{a bbar}
        return np.linalg.inv(np.swapaxes(self.g, -1, -2))

    def raised_first(self):
        """f^a = g^{a bbar} f_bbar."""
        return np.einsum("...ab,...b->...a", self.ginv, self.f_abar)

    def lowered_first(self, up):
        """Inverse of :meth:`raised_first`: f_bbar = g_{a bbar} f^a."""
        return np.einsum("...ab,...a->...b", self.g, up)

    def commutation_defect(self):
        return self.f_abbar - np.swapaxes(self.f_bbara, -1, -2)


def _jet_fn(m: CRManifold, f: ScalarField):
    geo = m.geometry
    key = ("jet", id(f))
    if key not in geo._cache:
        jet = geo.jet(f.fn)

        def fn(x):
            F1, F2 = jet(x)
            return F1, F2, geo.levi(x)

        geo._cache[("jet_field", id(f))] = f  # keep the field alive for the id key
        geo.batched_fn(key, fn)
    return geo._cache[key]


def covariant_jet(m: CRManifold, f: ScalarField, x) -> CovariantJet:
    m.check_stencil(x, levels=3)
    F1, F2, g = evaluate(_jet_fn(m, f), np.atleast_2d(x))
    if np.ndim(x) == 1:
        return CovariantJet(F1[0], F2[0], g[0])
    return CovariantJet(F1, F2, g)


def sublaplacian_from_jet(j: CovariantJet):
    """-(f_a^a + f_abar^abar)."""
    ginv = j.ginv
    t1 = np.einsum("...ag,...ag->...", ginv, j.f_abbar)
    t2 = np.einsum("...ga,...ag->...", ginv, j.f_bbara)
    return -(t1 + t2)


def sublaplacian(m: CRManifold, f: ScalarField, x, w: WebsterData | None = None):
    """Delta_theta f = -(f_a^a + f_abar^abar); real for real f."""
    val = sublaplacian_from_jet(covariant_jet(m, f, x))
    return np.real_if_close(val, tol=1e6)


def horizontal_gradient_sq(j: CovariantJet):
    """|df|^2_theta = f_a f^a + f_abar f^abar (= 2 g^{a bbar} f_a f_bbar for real f)."""
    ginv = j.ginv
    return np.real(2 * np.einsum("...ab,...a,...b->...", ginv, j.f_a, j.f_abar))


def sample_webster(m: CRManifold, points=None) -> WebsterData:
    """Webster data on the manifold grid (or given points)."""
    return webster(m, m.grid.points if points is None else points)
