"""Carnot-Caratheodory distance by shortest paths on a horizontal lattice graph.

Nodes are the points (a h, b h, 2 h^2 c) (integers a, b, c; n = 1, and the
analogous lattice for n > 1).  This set is closed under right multiplication
by the horizontal group elements (h (da + i db), 0), and s -> p.(s w, 0) is a
horizontal segment, so every edge is an honest horizontal curve.  Its weight
is the Levi length sqrt(v^T M^+ v) at the segment midpoint.  Graph distances
are therefore upper bounds for the CC distance of any structure whose
contact distribution is ker theta0 (Heisenberg, nilmanifold in the universal
cover, Cayley charts of the sphere, and their rescalings and deformations).
Query points are snapped to the nearest node.
"""

from __future__ import annotations

import itertools
import math

import jax.numpy as jnp
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from ..core import CRManifold, evaluate
from ..errors import CRGeometryError, UnsupportedManifold

# horizontal moves (da, db) in one complex direction: king and knight steps
MOVES = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)]
MOVES = MOVES + [(-a, -b) for a, b in MOVES]


class Unreachable(CRGeometryError):
    pass


def _require_horizontal_lattice(m: CRManifold, pts) -> None:
    if m.meta.get("model") not in ("heisenberg", "nilmanifold", "sphere") or m.meta.get("chart_kind") == "hopf":
        raise UnsupportedManifold("cc_distance needs a chart with contact distribution ker theta0")
    # theta proportional to theta0: the t-coefficient carries the whole form
    th = evaluate(m.geometry.batched("theta"), np.atleast_2d(pts))
    n = m.n
    x, y = pts[:, :n], pts[:, n : 2 * n]
    ref = np.concatenate([-2 * y, 2 * x, np.ones((len(pts), 1))], axis=1) * th[:, -1:]
    if np.max(np.abs(th - ref)) > 1e-9 * (1 + np.max(np.abs(th))):
        raise UnsupportedManifold("contact distribution differs from ker theta0")


class HorizontalGraph:
    """Lattice graph on a box [lo, hi] (in lattice indices) of a Heisenberg chart."""

    def __init__(self, m: CRManifold, h: float, lo, hi):
        self.m, self.h = m, float(h)
        self.n = m.n
        self.tau = 2 * self.h**2
        self.lo = np.asarray(lo, dtype=int)
        self.hi = np.asarray(hi, dtype=int)
        self.dims = tuple(int(d) for d in self.hi - self.lo + 1)
        self.size = int(np.prod(self.dims))
        self._build()

    def coords(self, idx) -> np.ndarray:
        idx = np.asarray(idx)
        scale = np.array([self.h] * (2 * self.n) + [self.tau])
        return idx * scale

    def snap(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        scale = np.array([self.h] * (2 * self.n) + [self.tau])
        return np.rint(x / scale).astype(int)

    def node(self, idx) -> int:
        idx = np.asarray(idx) - self.lo
        if np.any(idx < 0) or np.any(idx >= np.array(self.dims)):
            raise Unreachable("point outside the graph box")
        return int(np.ravel_multi_index(tuple(idx), self.dims))

    def _build(self):
        n = self.n
        grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(self.lo, self.hi)], indexing="ij")
        I = np.stack([g.ravel() for g in grids], axis=-1)
        inside = np.ones(len(I), dtype=bool)
        if self.m.meta.get("model") == "sphere":
            inside = self.m.chart.contains(self.coords(I))
        rows, cols, starts, vels = [], [], [], []
        src = np.arange(len(I))
        for j in range(n):
            a, b = I[:, j], I[:, n + j]
            for da, db in MOVES:
                step = np.zeros(2 * n + 1, dtype=int)
                step[j], step[n + j] = da, db
                J = I + step
                # t shift 2 Im(z conj w) / tau = b da - a db
                J[:, -1] += b * da - a * db
                ok = inside & np.all((J >= self.lo) & (J <= self.hi), axis=1)
                tgt = np.ravel_multi_index(tuple((J[ok] - self.lo).T), self.dims)
                ok_idx = src[ok]
                ok &= True
                keep = inside[tgt]
                rows.append(ok_idx[keep])
                cols.append(tgt[keep])
                starts.append(I[ok][keep])
                vels.append(J[ok][keep] - I[ok][keep])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        p0 = self.coords(np.concatenate(starts))
        v = self.coords(np.concatenate(vels))
        wts = self._levi_length(p0 + 0.5 * v, v)
        A = sp.coo_matrix((wts, (rows, cols)), shape=(self.size, self.size)).tocsr()
        self.adj = A.maximum(A.T)

    def _levi_length(self, mid, v):
        """|v|^2 = 2 g_{a bbar} c^a conj(c^b) with c^a = theta^a(v), v horizontal."""
        geo, n, N = self.m.geometry, self.n, 2 * self.n + 1
        key = ("levi_length",)
        if key not in geo._cache:
            import jax

            def fn(pv):
                x, w = pv[:N], pv[N:]
                c = geo.coframe(x)[1 : 1 + n] @ w.astype(complex)
                return jnp.sqrt(jnp.maximum(2 * jnp.real(c @ geo.levi(x) @ c.conj()), 0.0))

            geo._cache[key] = jax.jit(jax.vmap(fn))
        return evaluate(geo._cache[key], np.concatenate([mid, v], axis=1))

    def distances_from(self, x) -> np.ndarray:
        d = dijkstra(self.adj, directed=False, indices=self.node(self.snap(x)))
        return d

    def distance(self, x, y) -> float:
        d = float(self.distances_from(x)[self.node(self.snap(y))])
        if not math.isfinite(d):
            raise Unreachable("no horizontal path inside the graph box")
        return d


def graph_for(m: CRManifold, points, h: float, margin: float = 0.5) -> HorizontalGraph:
    """Graph on a box covering the points with the given margin (chart units; t margin squared)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    _require_horizontal_lattice(m, pts)
    n = m.n
    span = float(np.max(np.ptp(pts[:, : 2 * n], axis=0))) if len(pts) > 1 else 0.0
    mxy = margin + 0.5 * span + 2 * h
    lo = np.floor(np.concatenate([pts[:, : 2 * n].min(0) - mxy, [0]]) / h).astype(int)
    hi = np.ceil(np.concatenate([pts[:, : 2 * n].max(0) + mxy, [0]]) / h).astype(int)
    # t range: enough room for the commutator loops between the points
    tmar = 0.5 * (mxy + span) ** 2
    tau = 2 * h * h
    lo[-1] = int(math.floor((pts[:, -1].min() - tmar) / tau))
    hi[-1] = int(math.ceil((pts[:, -1].max() + tmar) / tau))
    return HorizontalGraph(m, h, lo, hi)


def cc_distance(m: CRManifold, x, y, h: float = 1 / 8, margin: float = 0.5) -> float:
    """Upper-bound estimate of the CC distance between x and y (lattice step h)."""
    g = graph_for(m, np.stack([np.asarray(x, float), np.asarray(y, float)]), h, margin)
    return g.distance(x, y)


def cc_ball_contains(m: CRManifold, x, r: float, y, h: float = 1 / 8, margin: float = 0.5) -> bool:
    return cc_distance(m, x, y, h, margin) <= r


def cc_distances(m: CRManifold, x, targets, h: float = 1 / 8, margin: float = 0.5) -> np.ndarray:
    """Distances from x to each target, one Dijkstra run."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    g = graph_for(m, np.vstack([np.asarray(x, float)[None], targets]), h, margin)
    d = g.distances_from(x)
    return np.array([d[g.node(g.snap(t))] for t in targets])
