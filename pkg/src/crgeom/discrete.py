"""Discrete sublaplacian and CR Laplacian on the periodic model grids.

The operator is assembled variationally.  With ``d = D u`` the coordinate
derivatives of a grid function (complex, so that Nyquist modes are not lost),
the Dirichlet form is

    Q(u) = sum_p w_p rho_p Re[(Du)_p^H M_p (Du)_p],   M = 2 Re(W^T g^{-1} conj W),

and Delta u = (w rho)^{-1} Re(D^H (w rho M D u)).  This is self-adjoint for
the quadrature inner product by construction.

Two grids are supported:

* nilmanifold (n = 1): Fourier in t; in x and y twisted Fourier series
  (each t-mode is a section of a line bundle over the torus, made periodic
  row-by-row by a Bloch phase).
* Hopf grid on S^3: finite volumes in eta (no flux through the poles) and,
  in (xi1, xi2), monotone directional second differences.  The horizontal
  xi-direction is irrational in general, so the differences are taken at
  several distances along it with linearly interpolated values; all weights
  stay nonnegative and the operator is an M-matrix (positive Green functions).

Both decouple into independent blocks ("modes") along the periodic axes,
which carry no coefficient dependence, and this gives exact direct solves.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .core import CRManifold, _pointwise, evaluate, grid_density
from .errors import IndefiniteOperator, StencilNotAssembled, UnsupportedManifold


def b_n(n: int) -> float:
    return 2.0 + 2.0 / n


def horizontal_metric(m: CRManifold, points) -> np.ndarray:
    """M_p with |du|^2_theta = d^T M d for coordinate gradients d, shape (P, N, N)."""
    geo = m.geometry

    def fn(x):
        import jax.numpy as jnp

        W = geo.frame(x)
        G = geo.levi(x)
        ginv = jnp.linalg.inv(G.T)
        Mc = 2 * jnp.einsum("ak,ab,bl->kl", W, ginv, W.conj())
        Mr = jnp.real(Mc)
        return 0.5 * (Mr + Mr.T)

    return evaluate(geo.batched_fn(("hmetric",), fn), points)


def scalar_on_grid(m: CRManifold) -> np.ndarray:
    """Webster scalar curvature at the grid nodes (cached on the manifold)."""
    if "_scalar" not in m.meta:
        from .webster import webster

        m.meta["_scalar"] = np.real(np.asarray(webster(m, m.grid.points).S)).reshape(-1)
    return m.meta["_scalar"]


def _fourier_derivative_matrix(N: int, period: float) -> np.ndarray:
    k = np.fft.fftfreq(N, 1.0 / N) * 2 * np.pi / period
    F = np.fft.fft(np.eye(N), axis=0, norm="ortho")
    return np.fft.ifft(1j * k[:, None] * F, axis=0, norm="ortho")


class SpectralLaplacian:
    """Discrete Delta_theta and L_theta = b_n Delta_theta + S on a model grid."""

    def __init__(self, m: CRManifold, scalar: np.ndarray | None = None):
        if m.grid is None:
            raise StencilNotAssembled("manifold has no grid")
        self.m = m
        self.n = m.n
        self.shape = tuple(m.grid.shape)
        self.size = int(np.prod(self.shape))
        self.bn = b_n(m.n)
        self.omega = (m.grid.weights * np.asarray(grid_density(m))).reshape(self.shape)
        self.M = horizontal_metric(m, m.grid.points).reshape(self.shape + (3, 3))
        self.A = self.omega[..., None, None] * self.M
        S = scalar_on_grid(m) if scalar is None else np.broadcast_to(scalar, (self.size,))
        self.S = np.asarray(S, dtype=float).reshape(self.shape)
        self._factors: dict = {}
        self._blocks: dict | None = None

    # -- to be provided by subclasses -------------------------------------------
    def grad(self, u) -> list:
        raise NotImplementedError

    def grad_adjoint(self, v: list) -> np.ndarray:
        raise NotImplementedError

    # -- operators ---------------------------------------------------------------
    def inner(self, u, v) -> float:
        return float(np.sum(self.omega * u * v))

    def dirichlet_density(self, u) -> np.ndarray:
        """|du|^2_theta at the nodes."""
        d = self.grad(u.reshape(self.shape))
        return np.real(sum(np.conj(d[k]) * self.M[..., k, l] * d[l] for k in range(3) for l in range(3)))

    def sublaplacian(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(self.shape)
        d = self.grad(u)
        v = [sum(self.A[..., k, l] * d[l] for l in range(3)) for k in range(3)]
        return np.real(self.grad_adjoint(v)) / self.omega

    def apply(self, u) -> np.ndarray:
        """L_theta u = b_n Delta u + S u."""
        u = np.asarray(u, dtype=float).reshape(self.shape)
        return self.bn * self.sublaplacian(u) + self.S * u

    def dirichlet_energy(self, u) -> float:
        """Discrete integral of |du|^2_theta."""
        return float(np.sum(self.omega * self.dirichlet_density(np.asarray(u).reshape(self.shape))))

    def quadratic_forms(self, u) -> tuple[float, float]:
        """(integral of b_n |du|^2 + S u^2, <u, L u>)."""
        u = np.asarray(u, dtype=float).reshape(self.shape)
        grad_form = self.bn * self.dirichlet_energy(u) + float(np.sum(self.omega * self.S * u * u))
        return grad_form, self.inner(u, self.apply(u))

    # -- mode blocks -------------------------------------------------------------
    def coefficients_decouple(self, tol: float = 1e-12) -> bool:
        ax = self.mode_axes
        scale = np.max(np.abs(self.A)) + 1e-300
        for arr, s in ((self.A, scale), (self.omega, np.max(self.omega)), (self.S, 1 + np.max(np.abs(self.S)))):
            mean = arr.mean(axis=ax, keepdims=True)
            if np.max(np.abs(arr - mean)) > tol * s:
                return False
        return True

    def _local(self, arr):
        """Average over the decoupled axes, flattened over the local ones."""
        return np.asarray(arr.mean(axis=self.mode_axes)).reshape(self.local_size, *arr.shape[len(self.shape):])

    def block(self, q, shift: float = 0.0) -> np.ndarray:
        """Hermitian matrix of (w rho)(L + shift) restricted to mode q."""
        Hq = self.mode_form(q)
        Hm = self.mode_form(self.partner(q))
        om = self._local(self.omega)
        S = self._local(self.S)
        return 0.5 * self.bn * (Hq + Hm.conj()) + np.diag(om * (S + shift))

    def factor(self, q, shift: float = 0.0, allow_kernel: bool = False, tol: float = 1e-9):
        key = (q, shift)
        if key in self._factors:
            return self._factors[key]
        B = self.block(q, shift)
        B = 0.5 * (B + B.conj().T)
        try:
            f = ("chol", sla.cho_factor(B, lower=True))
        except sla.LinAlgError:
            om = self._local(self.omega)
            lam, V = sla.eigh(B, np.diag(om))
            scale = max(1.0, np.max(np.abs(lam)))
            if lam[0] < -tol * scale:
                raise IndefiniteOperator(f"smallest eigenvalue {lam[0]:.3e} in mode {q}")
            if not allow_kernel:
                raise IndefiniteOperator(f"singular operator in mode {q} (eigenvalue {lam[0]:.3e})")
            keep = lam > tol * scale
            f = ("pinv", (lam, V, keep))
        self._factors[key] = f
        return f

    def min_eigenvalue(self, shift: float = 0.0) -> float:
        """Smallest eigenvalue of L + shift (quadrature inner product), over all modes."""
        om = self._local(self.omega)
        out = np.inf
        for q in self.half_modes():
            lam = sla.eigh(0.5 * (self.block(q, shift) + self.block(q, shift).conj().T),
                           np.diag(om), eigvals_only=True, subset_by_index=[0, 0])
            out = min(out, float(lam[0]))
        return out

    def solve(self, b, shift: float = 0.0, allow_kernel: bool = False, exact: bool = True) -> np.ndarray:
        """x with (L + shift) x = b; with ``allow_kernel`` the minimum-norm solution.

        With ``exact=False`` coefficients varying along the Fourier axes are
        averaged, which still gives a good preconditioner.
        """
        if exact and not self.coefficients_decouple():
            raise StencilNotAssembled("coefficients vary along the Fourier axes; no exact block solve")
        b = np.asarray(b, dtype=float).reshape(self.shape)
        rhs = self.to_modes(self.omega * b)
        out = np.zeros_like(rhs)
        for q in self.half_modes():
            kind, f = self.factor(q, shift, allow_kernel)
            r = self.mode_vector(rhs, q)
            if kind == "chol":
                x = sla.cho_solve(f, r)
            else:
                lam, V, keep = f
                c = V.conj().T @ r
                x = V[:, keep] @ (c[keep] / lam[keep])
            self.set_mode_vector(out, q, x)
            p = self.partner(q)
            if p != q:
                self.set_mode_vector(out, p, x.conj())
        return np.real(self.from_modes(out))

    def half_modes(self):
        seen, out = set(), []
        for q in self.all_modes():
            if q in seen:
                continue
            seen.add(q)
            seen.add(self.partner(q))
            out.append(q)
        return out


class NilmanifoldLaplacian(SpectralLaplacian):
    """Twisted-Fourier operator on the Heisenberg nilmanifold (n = 1)."""

    mode_axes = (2,)

    def __init__(self, m: CRManifold, scalar=None):
        if m.n != 1 or m.grid is None or m.grid.kind != "nilmanifold":
            raise UnsupportedManifold("discrete operator needs the n = 1 nilmanifold grid")
        super().__init__(m, scalar)
        Nx, Ny, Nt = self.shape
        L = float(m.grid.meta.get("scale", 1.0))
        T = float(m.grid.meta.get("t_period", L * L))
        self.L, self.T = L, T
        x, y, _ = m.grid.axes
        self.mt = np.fft.fftfreq(Nt, 1.0 / Nt)
        self.kx = np.fft.fftfreq(Nx, 1.0 / Nx) * 2 * np.pi / L
        self.ky = np.fft.fftfreq(Ny, 1.0 / Ny) * 2 * np.pi / L
        xy = x[:, None, None] * y[None, :, None]
        # F_m(x + L, y) = e^{2 pi i m 2 L y / T} F_m, so e^{-4 pi i m x y / T} F_m is x-periodic
        self.Px = np.exp(-4j * np.pi * self.mt[None, None, :] * xy / T)
        self.Py = np.conj(self.Px)
        self.local_size = Nx * Ny
        self._D0x = _fourier_derivative_matrix(Nx, L)
        self._D0y = _fourier_derivative_matrix(Ny, L)

    def to_modes(self, u):
        return np.fft.fft(u, axis=2, norm="ortho")

    def from_modes(self, uh):
        return np.fft.ifft(uh, axis=2, norm="ortho")

    def all_modes(self):
        return list(range(self.shape[2]))

    def partner(self, q):
        return (-q) % self.shape[2]

    def mode_vector(self, arr, q):
        return arr[:, :, q].reshape(-1)

    def set_mode_vector(self, arr, q, v):
        arr[:, :, q] = v.reshape(self.shape[:2])

    def _dx_modes(self, uh, sign=1):
        G = np.fft.fft(self.Px * uh, axis=0, norm="ortho")
        G *= sign * 1j * self.kx[:, None, None]
        return np.conj(self.Px) * np.fft.ifft(G, axis=0, norm="ortho")

    def _dy_modes(self, uh, sign=1):
        G = np.fft.fft(self.Py * uh, axis=1, norm="ortho")
        G *= sign * 1j * self.ky[None, :, None]
        return np.conj(self.Py) * np.fft.ifft(G, axis=1, norm="ortho")

    def _dt_modes(self, uh, sign=1):
        return sign * 1j * (2 * np.pi / self.T) * self.mt[None, None, :] * uh

    def grad(self, u):
        uh = self.to_modes(u)
        return [self.from_modes(op(uh)) for op in (self._dx_modes, self._dy_modes, self._dt_modes)]

    def grad_adjoint(self, v):
        out = 0
        for op, vk in zip((self._dx_modes, self._dy_modes, self._dt_modes), v):
            out = out + self.from_modes(op(self.to_modes(vk), sign=-1))
        return out

    def _mode_derivatives(self, q):
        Nx, Ny, _ = self.shape
        ph = self.Px[:, :, q]  # (Nx, Ny)
        # Bx[(i,j),(i',j)] = conj(ph[i,j]) D0x[i,i'] ph[i',j]
        I, Ip, J = np.meshgrid(np.arange(Nx), np.arange(Nx), np.arange(Ny), indexing="ij")
        vx = np.conj(ph[I, J]) * self._D0x[I, Ip] * ph[Ip, J]
        Bx = sp.csr_matrix((vx.ravel(), ((I * Ny + J).ravel(), (Ip * Ny + J).ravel())),
                           shape=(Nx * Ny,) * 2)
        phy = self.Py[:, :, q]
        I, J, Jp = np.meshgrid(np.arange(Nx), np.arange(Ny), np.arange(Ny), indexing="ij")
        vy = np.conj(phy[I, J]) * self._D0y[J, Jp] * phy[I, Jp]
        By = sp.csr_matrix((vy.ravel(), ((I * Ny + J).ravel(), (I * Ny + Jp).ravel())),
                           shape=(Nx * Ny,) * 2)
        ct = 1j * (2 * np.pi / self.T) * self.mt[q]
        Bt = sp.identity(Nx * Ny, format="csr") * ct
        return [Bx, By, Bt]

    def mode_form(self, q):
        """sum_kl B_k^H diag(A_kl) B_l for mode q (t-averaged coefficients)."""
        B = self._mode_derivatives(q)
        A = self._local(self.A)
        H = np.zeros((self.local_size,) * 2, dtype=complex)
        for k in range(3):
            for l in range(3):
                prod = B[k].conj().T @ sp.diags(A[:, k, l]) @ B[l]
                H += prod.toarray()
        return H


class HopfLaplacian(SpectralLaplacian):
    """Operator on the Hopf grid of S^3: monotone differences in xi1, xi2, finite volumes in eta.

    The eta fluxes live on the cell faces eta_{i+1/2}; the end faces sit on
    the degenerate circles, where the volume density vanishes, so no
    boundary condition is needed.  Coefficients may depend on eta only and
    the eta-xi blocks of the horizontal metric must vanish (true for the
    standard structure and its eta-dependent rescalings).
    """

    mode_axes = (1, 2)

    def __init__(self, m: CRManifold, scalar=None, reach: float | None = None):
        if m.grid is None or m.grid.kind != "hopf":
            raise UnsupportedManifold("discrete operator needs the Hopf grid")
        super().__init__(m, scalar)
        Ne, N1, N2 = self.shape
        if not self.coefficients_decouple(1e-10):
            raise UnsupportedManifold("Hopf operator needs coefficients depending on eta only")
        if np.max(np.abs(self.M[..., 0, 1:])) > 1e-10 * np.max(np.abs(self.M)):
            raise UnsupportedManifold("Hopf operator needs a block-diagonal horizontal metric")
        eta = m.grid.axes[0]
        self.h = np.pi / (2 * Ne)
        faces = eta[:-1] + 0.5 * self.h
        fp = np.stack([faces, np.zeros_like(faces), np.zeros_like(faces)], axis=-1)
        Mf = horizontal_metric(m, fp)[:, 0, 0]
        rho_f = np.asarray(evaluate(m.geometry.batched("volume_density"), fp))
        wxi = (2 * np.pi) ** 2 / (N1 * N2)
        # face conductances: integral weight / h^2
        self.cond = wxi * self.h * rho_f * Mf / self.h**2
        self.k1 = np.fft.fftfreq(N1, 1.0 / N1)
        self.k2 = np.fft.fftfreq(N2, 1.0 / N2)
        self.local_size = Ne
        self.reach = reach if reach is not None else max(1.0, 0.5 * np.sqrt(min(N1, N2)))
        self.stencils = [self._row_stencil(self._local(self.M)[i, 1:, 1:]) for i in range(Ne)]

    def _row_stencil(self, Mxi):
        """Nonnegative weights c_d with sum_d c_d (u(p) - u(p+d)) ~ -tr(Mxi hess u).

        Each eigendirection v of the metric (in index units) gets second
        differences at distances r_k = k / |v_j| (k = 1..K, v_j the dominant
        component), off-grid values taken by linear interpolation (positive
        weights).  The interpolation adds diffusion of relative size
        O(1/r^2) against O(r^2 h^2) truncation, hence K ~ sqrt(N).  Weights
        proportional to k^2 keep that balance; the short radii couple
        neighbouring nodes, which a single radius K > 1 would leave
        decoupled (odd-even oscillation of the Green function).
        """
        N1, N2 = self.shape[1:]
        h = np.array([2 * np.pi / N1, 2 * np.pi / N2])
        D = Mxi / np.outer(h, h)
        lam, V = np.linalg.eigh(0.5 * (D + D.T))
        out: dict = {}
        for k in range(2):
            if lam[k] <= 1e-14 * max(1.0, lam[-1]):
                continue
            v = V[:, k]
            j = int(np.argmax(np.abs(v)))
            K = max(1, round(self.reach * abs(v[j])))
            alpha = np.arange(1, K + 1, dtype=float) ** 2
            alpha /= alpha.sum()
            for kk in range(1, K + 1):
                r = kk / abs(v[j])
                for sgn in (1.0, -1.0):
                    pos = sgn * r * v
                    lo = np.floor(pos + 1e-12)
                    fr = np.clip(pos - lo, 0.0, 1.0)
                    for a in (0, 1):
                        for b in (0, 1):
                            wgt = (fr[0] if a else 1 - fr[0]) * (fr[1] if b else 1 - fr[1])
                            d = (int(lo[0]) + a, int(lo[1]) + b)
                            if wgt > 1e-14 and d != (0, 0):
                                out[d] = out.get(d, 0.0) + alpha[kk - 1] * lam[k] * wgt / r**2
        return out

    def to_modes(self, u):
        return np.fft.fft2(u, axes=(1, 2), norm="ortho")

    def from_modes(self, uh):
        return np.fft.ifft2(uh, axes=(1, 2), norm="ortho")

    def all_modes(self):
        return [(a, b) for a in range(self.shape[1]) for b in range(self.shape[2])]

    def partner(self, q):
        return ((-q[0]) % self.shape[1], (-q[1]) % self.shape[2])

    def mode_vector(self, arr, q):
        return arr[:, q[0], q[1]]

    def set_mode_vector(self, arr, q, v):
        arr[:, q[0], q[1]] = v

    def _xi_pairs(self, u):
        """Yield (row, c_d, u - shifted u) over the xi stencil."""
        for i, st in enumerate(self.stencils):
            for d, c in st.items():
                yield i, c, u[i] - np.roll(u[i], (-d[0], -d[1]), axis=(0, 1))

    def _xi_energy_density(self, u):
        out = np.zeros(self.shape)
        for i, c, du in self._xi_pairs(u):
            out[i] += 0.5 * c * du * du
        return out

    def _xi_apply(self, u):
        out = np.zeros(self.shape)
        for i, c, du in self._xi_pairs(u):
            out[i] += c * du
        return out

    def dirichlet_energy(self, u) -> float:
        u = np.asarray(u, dtype=float).reshape(self.shape)
        du = np.diff(u, axis=0)
        e_eta = float(np.sum(self.cond[:, None, None] * du * du))
        return e_eta + float(np.sum(self.omega * self._xi_energy_density(u)))

    def dirichlet_density(self, u):
        """|du|^2 at nodes; the eta part is the average of the two adjacent face terms."""
        u = np.asarray(u, dtype=float).reshape(self.shape)
        du = np.diff(u, axis=0)
        face = self.cond[:, None, None] * du * du
        node = np.zeros(self.shape)
        node[:-1] += 0.5 * face
        node[1:] += 0.5 * face
        return node / self.omega + self._xi_energy_density(u)

    def sublaplacian(self, u):
        u = np.asarray(u, dtype=float).reshape(self.shape)
        flux = self.cond[:, None, None] * np.diff(u, axis=0)
        out = np.zeros(self.shape)
        out[:-1] -= flux
        out[1:] += flux
        return out / self.omega + self._xi_apply(u)

    def mode_form(self, q):
        Ne, N1, N2 = self.shape
        om = self._local(self.omega)
        H = np.zeros((Ne, Ne), dtype=complex)
        i = np.arange(Ne - 1)
        H[i, i] += self.cond
        H[i + 1, i + 1] += self.cond
        H[i, i + 1] -= self.cond
        H[i + 1, i] -= self.cond
        th = 2 * np.pi * np.array([self.k1[q[0]] / N1, self.k2[q[1]] / N2])
        for r, st in enumerate(self.stencils):
            H[r, r] += om[r] * sum(c * (1 - np.cos(th[0] * d[0] + th[1] * d[1])) for d, c in st.items())
        return H


def discrete_laplacian(m: CRManifold, scalar=None) -> SpectralLaplacian:
    """Build (and cache on the manifold) the discrete operator for its grid."""
    if m.grid is None:
        raise StencilNotAssembled("manifold has no grid")
    key = "_laplacian"
    if scalar is None and key in m.meta:
        return m.meta[key]
    if m.grid.kind == "nilmanifold":
        op = NilmanifoldLaplacian(m, scalar)
    elif m.grid.kind == "hopf":
        op = HopfLaplacian(m, scalar)
    else:
        raise StencilNotAssembled(f"no discrete operator for grid kind {m.grid.kind!r}")
    if scalar is None:
        m.meta[key] = op
    return op
