"""Acceptance criteria 1-10.

Each test records one line ``[ACCEPT n] PASS|FAIL name: detail``; the lines
are printed in the terminal summary (see conftest.py) and also when the
module is run directly with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import itertools
import json
import time

import jax.numpy as jnp
import numpy as np
import pytest

from crgeom import cli
from crgeom import function_spaces as FS
from crgeom.conformal import (
    cr_automorphism_residual,
    heisenberg_conjugation,
    heisenberg_dilation,
    pseudoconformal_factor,
    rescale,
    transformation_check,
    yamabe_exponent,
)
from crgeom.core import Derivative, ScalarField
from crgeom.discrete import discrete_laplacian
from crgeom.errors import CRGeometryError
from crgeom.models import (
    convergence_ratios,
    deformation_family,
    expansion_slopes,
    heisenberg,
    nilmanifold,
    normal_coordinates,
    sphere,
    sphere_hopf,
    theta_pair,
)
from crgeom.models.sphere import random_unitary, unitary_map
from crgeom.webster import tensor_norms_fast, webster
from crgeom import yamabe as Y

RESULTS: dict[int, list] = {}


def report(idx: int, name: str, ok: bool, detail: str) -> None:
    line = f"[ACCEPT {idx:2d}] {'PASS' if ok else 'FAIL'} {name}: {detail}"
    RESULTS.setdefault(idx, []).append(line)
    print(line)
    assert ok, line


def random_trig(m, rng, name, terms=3, amp=0.1):
    out = []
    for _ in range(terms):
        k = np.zeros(m.dim)
        k[: 2 * m.n] = rng.integers(-2, 3, size=2 * m.n)
        out.append((float(rng.uniform(-amp, amp)), tuple(k), float(rng.uniform(0, 2 * np.pi))))
    return ScalarField.trig(out, name=name)


# 1 ---------------------------------------------------------------------------------


def test_flat_models_certificate():
    t0 = time.time()
    worst = {}
    for m in (heisenberg(1, grid=(32,) * 3), nilmanifold(1, grid=(32,) * 3)):
        w = webster(m, m.grid.points)
        R, T = tensor_norms_fast(w)
        worst[m.name] = (float(R.max()), float(T.max()))
    dt = time.time() - t0
    ok = all(r <= 1e-8 and t <= 1e-8 for r, t in worst.values()) and dt <= 60
    detail = ", ".join(f"{k} |R|={r:.1e} |T|={t:.1e}" for k, (r, t) in worst.items())
    report(1, "flat-model certificate", ok, f"{detail}, {dt:.1f}s")


# 2 ---------------------------------------------------------------------------------


def test_transformation_laws():
    t0 = time.time()
    m = nilmanifold(1, grid=(6, 6, 6))
    pts = m.grid.points[::23]
    rng = np.random.default_rng(2)
    fields = [random_trig(m, rng, f"f{i}") for i in range(5)]
    worst = 0.0
    for f in fields:
        worst = max(worst, max(transformation_check(m, f, pts).values()))
    # FD contraction on the first field
    hs = [0.04, 0.02, 0.01]
    dev = [transformation_check(m.with_derivative(Derivative("fd", h, 4)), fields[0], pts) for h in hs]
    contraction = min(a[k] / b[k] for a, b in zip(dev, dev[1:]) for k in a)
    dt = time.time() - t0
    ok = worst <= 1e-6 and contraction >= 12 and dt <= 300
    report(2, "transformation laws", ok,
           f"analytic rel dev {worst:.1e}, FD contraction min {contraction:.1f}, {dt:.0f}s")


# 3 ---------------------------------------------------------------------------------


def test_yamabe_critical_points():
    t0 = time.time()
    m = nilmanifold(1, grid=(16, 16, 16))
    op = discrete_laplacian(m)
    init = ScalarField(lambda x: 1.0 + 0.2 * jnp.cos(2 * jnp.pi * x[0]), "init")
    sol = Y.yamabe_minimize(m, op, init)
    u = sol.u.values
    spread = float(np.max(np.abs(u / u.mean() - 1)))
    ok_i = abs(sol.Y_est) <= 1e-4 and sol.EL_residual <= 1e-6 and spread <= 1e-3

    s = sphere_hopf((12, 16, 16))
    sop = discrete_laplacian(s)
    one = np.ones(sop.shape)
    _, el = Y.el_residual(sop, Y._normalize(sop, one, yamabe_exponent(1)), yamabe_exponent(1))
    ccr = Y.constant_curvature_residual(s, sop, one)
    ok_ii = el <= 1e-6 and ccr <= 1e-6
    dt = time.time() - t0
    report(3, "Yamabe critical points", ok_i and ok_ii and dt <= 600,
           f"nil Y={sol.Y_est:.1e} EL={sol.EL_residual:.1e} |u/mean-1|={spread:.1e}; "
           f"sphere EL={el:.1e} ccr={ccr:.1e}, {dt:.0f}s")


# 4 ---------------------------------------------------------------------------------


def test_uniqueness_on_rescaled_nilmanifold():
    base = nilmanifold(1, grid=(12, 12, 12))
    f = ScalarField.trig([(0.1, (1.0, 0.0, 0.0), 0.0)], name="f")
    m = rescale(base, f)
    op = discrete_laplacian(m)
    res = Y.uniqueness_experiment(m, op, n_inits=5, seed=4)
    p = yamabe_exponent(1)
    fv = np.asarray(f.values(m.grid.points))
    spreads = []
    for v in res["solutions"]:
        q = v.reshape(-1) ** (p - 2) * np.exp(2 * fv)
        spreads.append(float(q.max() / q.min() - 1))
    ok = res["max_pairwise_deviation"] <= 1e-3 and max(spreads) <= 1e-3
    report(4, "uniqueness", ok,
           f"pairwise {res['max_pairwise_deviation']:.1e}, u^(p-2)e^(2f) spread {max(spreads):.1e}")


# 5 ---------------------------------------------------------------------------------


def test_sphere_green_function():
    m = sphere_hopf((12, 16, 16))
    op = discrete_laplacian(m)
    pole = int(np.ravel_multi_index((6, 8, 8), op.shape))
    G = Y.green_function(m, op, pole)
    mn = float(np.min(G.values))
    ok = mn == 1.0 and G.residual <= 1e-8 and G.positive and not G.offset
    report(5, "sphere Green function", ok,
           f"min G={mn!r}, residual {G.residual:.1e}, positive={G.positive}")


# 6 ---------------------------------------------------------------------------------


def test_pseudoconformal_factors():
    h = heisenberg(1, half_width=4.0)
    rng = np.random.default_rng(6)
    pts = rng.uniform(-0.5, 0.5, size=(8, 3))
    lam = 1.7
    dil = [pseudoconformal_factor(heisenberg_dilation(lam), h, h, x) for x in pts]
    dil_res = max(r for _, r in dil)
    dil_dev = max(abs(a / lam**2 - 1) for a, _ in dil)

    rot_dev = 0.0
    s = sphere(1, "A")
    for _ in range(3):
        F = unitary_map(random_unitary(2, rng))
        for x in rng.uniform(-0.3, 0.3, size=(6, 3)):
            try:
                a, r = pseudoconformal_factor(F, s, s, x)
            except CRGeometryError:
                continue
            rot_dev = max(rot_dev, abs(a - 1) + r)
    hs = sphere_hopf(None)
    F = cli.C.SmoothMap(lambda x: x + jnp.array([0.0, 0.4, -1.1]), name="torus rotation")
    for x in [np.array([0.3, 1.0, 2.0]), np.array([1.2, 4.0, 0.5])]:
        a, r = pseudoconformal_factor(F, hs, hs, x)
        rot_dev = max(rot_dev, abs(a - 1) + r)

    conj = min(cr_automorphism_residual(heisenberg_conjugation(1), h, x) for x in pts)
    # zero up to rounding: lam * lam * y and lam**2 * y may differ in the last bit
    ulp = np.finfo(float).eps
    ok = dil_res <= 8 * ulp * lam**2 * 4.0 and dil_dev <= 4 * ulp and rot_dev <= 1e-9 and conj > 0.5
    report(6, "pseudoconformal factors", ok,
           f"dilation residual {dil_res:.1e} factor/lam^2-1 {dil_dev:.1e}, rotation dev {rot_dev:.1e}, conjugation residual {conj:.2f}")


# 7 ---------------------------------------------------------------------------------


def test_energy_identity_and_symmetry():
    u = ScalarField(lambda x: 1.0 / (1.5 + jnp.cos(2 * jnp.pi * x[0])), "u")
    defects = []
    for N in (32, 48):
        m = nilmanifold(1, grid=(N, N, N))
        defects.append(Y.functional_A(m, None, u).defect)
    m = nilmanifold(1, grid=(16, 16, 16))
    op = discrete_laplacian(m)
    rng = np.random.default_rng(7)
    a, b = rng.normal(size=(2,) + op.shape)
    lhs = float(np.sum(op.omega * a * op.apply(b)))
    rhs = float(np.sum(op.omega * b * op.apply(a)))
    sym = abs(lhs - rhs) / max(1.0, abs(lhs))
    ok = defects[0] <= 1e-6 and defects[1] < defects[0] and sym <= 1e-8
    report(7, "energy identity", ok,
           f"defect 32^3 {defects[0]:.1e} -> 48^3 {defects[1]:.1e}, symmetry {sym:.1e}")


# 8 ---------------------------------------------------------------------------------


def test_normal_coordinates():
    h = heisenberg(1)
    rng = np.random.default_rng(8)
    X = rng.uniform(-1, 1, size=(20, 3))
    anti = max(float(np.max(np.abs(theta_pair(h, x, y) + theta_pair(h, y, x))))
               for x, y in itertools.combinations(X, 2))
    slopes = []
    for m, xi in ((h, X[0]), (sphere(1, "A"), np.array([0.2, -0.1, 0.15])),
                  (sphere(2, "A"), np.array([0.1, 0.05, -0.1, 0.2, 0.1]))):
        sl = expansion_slopes(normal_coordinates(m, xi))
        slopes.append((sl["slope_dz"], sl["slope_dt"]))
    ok = anti == 0.0 and all(dz >= 1.9 and dt >= 0.9 for dz, dt in slopes)
    report(8, "normal coordinates", ok,
           f"antisymmetry {anti:.1e}, slopes (dz, dt) " + ", ".join(f"({a:.2f}, {b:.2f})" for a, b in slopes))


# 9 ---------------------------------------------------------------------------------


def test_deformation_stability():
    m = nilmanifold(1, grid=(16, 16, 16))
    U = FS.Domain.box(m, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    battery = FS.bump_battery(m, (0, 0, 0), (1, 1, 1), 3)
    fam = deformation_family(m, "frame", [0.1, 0.05])
    probes = [FS.subelliptic_probe(fam.member(k), battery, U=U) for k in range(2)]
    spread = max(abs(probes[0][k] - probes[1][k]) / min(probes[0][k], probes[1][k]) for k in "abcd")

    coarse = nilmanifold(1, grid=(8, 8, 8))
    ratios = []
    for recipe in ("contact", "frame"):
        conv = convergence_ratios(deformation_family(coarse, recipe, [0.1, 0.05, 0.025]))
        for key, rat in conv["ratio"].items():
            ratios += [r for r, d in zip(rat, conv["deviation"][key]) if d > 1e-10]
    ok = spread <= 0.3 and all(0.4 <= r <= 0.6 for r in ratios)
    report(9, "deformation stability", ok,
           f"probe spread {spread:.1%}, scalar ratios in [{min(ratios):.3f}, {max(ratios):.3f}]")


# 10 --------------------------------------------------------------------------------


@pytest.mark.parametrize("config", [
    {"task": "yamabe", "model": "nilmanifold", "grid": [8, 8, 8], "params": {"init": "random"}},
    {"task": "conformal-check", "model": "nilmanifold", "grid": [4, 4, 4], "params": {"fields": 2, "points": 4}},
])
def test_determinism(tmp_path, config):
    blobs = []
    for i in range(2):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        out = tmp_path / f"run{i}"
        code = cli.main(["--config", str(cfg_path), "--seed", "11", "--out", str(out)])
        blobs.append((code, (out / "summary.json").read_bytes(),
                      sorted((p.name, p.read_bytes()) for p in out.glob("*.csv"))))
    ok = blobs[0] == blobs[1] and blobs[0][0] == 0
    report(10, "determinism", ok, f"{config['task']} rerun byte-identical={blobs[0] == blobs[1]}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
