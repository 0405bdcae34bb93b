import math

import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from crgeom.conformal import yamabe_exponent
from crgeom.core import ScalarField
from crgeom.discrete import discrete_laplacian
from crgeom.errors import PositivityLoss, StencilNotAssembled
from crgeom.models import cc_distances, heisenberg, nilmanifold, sphere, sphere_hopf
from crgeom.models.sphere import hopf_point, inverse_cayley
from crgeom import yamabe as Y


@pytest.fixture(scope="module")
def nil():
    m = nilmanifold(1, grid=(8, 8, 8))
    return m, discrete_laplacian(m)


@pytest.fixture(scope="module")
def hopf():
    m = sphere_hopf((8, 12, 12))
    return m, discrete_laplacian(m)


def test_flat_operator_kills_constants(nil):
    m, op = nil
    np.testing.assert_allclose(op.apply(np.ones(op.shape)), 0.0, atol=1e-10)


def test_sphere_operator_on_constants(hopf):
    m, op = hopf
    np.testing.assert_allclose(op.apply(np.ones(op.shape)), 8 * math.pi, rtol=1e-10)


def test_hopf_operator_is_monotone(hopf):
    _, op = hopf
    assert np.all(op.cond > 0)
    assert all(c >= 0 for st_ in op.stencils for c in st_.values())


SMALL_OPS = []


def _small_ops():
    if not SMALL_OPS:
        SMALL_OPS.extend(discrete_laplacian(m) for m in (nilmanifold(1, grid=(6, 6, 6)), sphere_hopf((6, 8, 8))))
    return SMALL_OPS


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_operators_self_adjoint(seed):
    rng = np.random.default_rng(seed)
    for op in _small_ops():
        a, b = rng.normal(size=(2,) + op.shape)
        lhs = np.sum(op.omega * a * op.apply(b))
        rhs = np.sum(op.omega * b * op.apply(a))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_operator_cached_per_manifold(nil):
    m, op = nil
    assert discrete_laplacian(m) is op
    with pytest.raises(StencilNotAssembled):
        discrete_laplacian(heisenberg(1))


def test_energy_forms_agree_on_grid_values(hopf):
    m, op = hopf
    u = 1.0 + 0.1 * np.random.default_rng(0).normal(size=op.shape)
    rep = Y.functional_A(m, op, u)
    assert rep.defect <= 1e-10 * abs(rep.value)


def test_functional_B_of_one_is_volume(hopf):
    m, op = hopf
    assert Y.functional_B(m, 1.0, op) == pytest.approx(float(np.sum(op.omega)))


def test_yamabe_flat_converges_to_constant(nil):
    m, op = nil
    init = ScalarField(lambda x: 1.0 + 0.3 * jnp.sin(2 * jnp.pi * x[1]), "init")
    sol = Y.yamabe_minimize(m, op, init)
    assert sol.converged and sol.EL_residual <= 1e-6
    assert abs(sol.Y_est) <= 1e-6
    assert np.all(np.diff(sol.history) <= 1e-12)
    u = sol.u.values
    assert np.max(np.abs(u / u.mean() - 1)) <= 1e-3
    assert Y.functional_B(m, u, op) == pytest.approx(1.0, abs=1e-12)
    assert set(sol.summary()) >= {"Y_est", "EL_residual", "iterations", "converged"}


def test_sphere_standard_density_is_critical(hopf):
    m, op = hopf
    p = yamabe_exponent(1)
    A, el = Y.el_residual(op, Y._normalize(op, np.ones(op.shape), p), p)
    assert el <= 1e-10
    assert Y.constant_curvature_residual(m, op, np.ones(op.shape)) <= 1e-10


def test_grid_density_rejects_sign_change():
    with pytest.raises(PositivityLoss):
        Y.GridDensity(np.array([1.0, -0.1]), positive=True)


def test_uniqueness_small(nil):
    m, op = nil
    res = Y.uniqueness_experiment(m, op, n_inits=3, seed=1)
    assert res["max_pairwise_deviation"] <= 1e-6
    assert all(res["converged"])


def test_rescaled_scalar_via_u_and_f_agree():
    m = nilmanifold(1, grid=(12, 12, 12))
    op = discrete_laplacian(m)
    x = m.grid.points
    u = np.exp(0.05 * np.cos(2 * np.pi * x[:, 0])).reshape(op.shape)
    via_u, via_f = Y.scalar_of_rescaled(op, u)
    # both are discrete approximations of the same field
    assert np.max(np.abs(via_u - via_f)) <= 0.05 * np.max(np.abs(via_u))


def test_nilmanifold_green_offset(nil):
    m, op = nil
    G = Y.green_function(m, op, 0)
    assert G.offset and G.values.min() == 1.0
    assert G.residual <= 1e-8


def test_sphere_green_positive_and_decreasing_along_rays():
    shape = (12, 16, 16)
    m = sphere_hopf(shape)
    op = discrete_laplacian(m)
    c = (6, 8, 8)
    G = Y.green_function(m, op, int(np.ravel_multi_index(c, shape)))
    assert G.positive and G.values.min() == 1.0 and G.residual <= 1e-8
    Gv = G.values.reshape(shape)
    P = m.grid.points.reshape(shape + (3,))
    zp = np.asarray(hopf_point(jnp.asarray(P[c])))
    # unitary taking the pole to the origin of Cayley chart A
    U = np.array([[np.conj(zp[1]), -np.conj(zp[0])], [zp[0], zp[1]]])
    s = sphere(1, "A")
    for d in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, 0, -1), (1, 0, 1)]:
        idx = [tuple(np.array(c) + k * np.array(d)) for k in range(1, 5)]
        Z = np.array([np.asarray(hopf_point(jnp.asarray(P[i]))) for i in idx])
        X = np.asarray(inverse_cayley(jnp.asarray((U @ Z.T).T)))
        dist = cc_distances(s, np.zeros(3), X, h=1 / 16)
        rho_s = spearmanr([Gv[i] for i in idx], dist).statistic
        assert rho_s < -0.9, (d, rho_s)
