import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crgeom.conformal import (
    ConformalChange,
    SmoothMap,
    adapted_metric,
    contract_curvature,
    cr_automorphism_residual,
    extended_J,
    heisenberg_conjugation,
    heisenberg_dilation,
    heisenberg_translation,
    identity_map,
    predicted_coframe,
    predicted_curvature,
    predicted_scalar,
    pseudoconformal_factor,
    rescale,
    transformation_check,
    yamabe_exponent,
)
from crgeom.core import ScalarField, admissible_coframe
from crgeom.errors import NonPositiveDensity, NonPositiveDilation
from crgeom.models import heisenberg, nilmanifold, sphere
from crgeom.webster import webster

F_SMOOTH = ScalarField(lambda x: 0.1 * jnp.cos(2 * jnp.pi * x[0]) + 0.05 * jnp.sin(2 * jnp.pi * (x[1] + x[2])), "f")


@pytest.fixture(scope="module")
def nil():
    return nilmanifold(1, grid=(6, 6, 6))


def test_exponent():
    assert yamabe_exponent(1) == 4.0
    assert yamabe_exponent(2) == 3.0


def test_zero_change_is_exact(nil):
    dev = transformation_check(nil, 0.0, nil.grid.points[::50])
    assert max(dev.values()) <= 1e-12


def test_transformation_laws_on_nilmanifold(nil):
    dev = transformation_check(nil, F_SMOOTH, nil.grid.points[::40])
    assert max(dev.values()) <= 1e-6


def test_transformation_laws_on_sphere_n2():
    s = sphere(2, "A")
    f = ScalarField(lambda x: 0.1 * jnp.sin(x[0] - x[3]) * jnp.cos(x[4]), "g")
    x = np.random.default_rng(1).uniform(-0.4, 0.4, size=(3, 5))
    dev = transformation_check(s, f, x)
    assert max(dev.values()) <= 1e-6


def test_predicted_curvature_contracts_to_predicted_scalar(nil):
    m, f, x = nil, F_SMOOTH, nil.grid.points[::60]
    w = webster(m, x)
    wt = webster(rescale(m, f, adapt_frame=True), x)
    R = predicted_curvature(m, w, ConformalChange.from_f(f, m.n), x)
    np.testing.assert_allclose(contract_curvature(R, wt.g), predicted_scalar(m, w, ConformalChange.from_f(f, m.n), x),
                               rtol=1e-9, atol=1e-9)


def test_from_u_and_from_f_agree():
    x = np.random.default_rng(2).uniform(-1, 1, size=(5, 3))
    c1 = ConformalChange.from_f(F_SMOOTH, 1)
    c2 = ConformalChange.from_u(c1.u, 1)
    np.testing.assert_allclose(c2.f.values(x), F_SMOOTH.values(x), atol=1e-14)
    c1.check(x)


def test_nonpositive_density_rejected():
    c = ConformalChange.from_u(ScalarField(lambda x: x[0]), 1)
    with pytest.raises(NonPositiveDensity):
        c.check(np.array([[-0.5, 0.0, 0.0]]))


def test_rescale_scales_levi_form(nil):
    x = nil.grid.points[:3]
    m = rescale(nil, F_SMOOTH)
    g0 = np.asarray(webster(nil, x).g)[:, 0, 0]
    g1 = np.asarray(webster(m, x).g)[:, 0, 0]
    np.testing.assert_allclose(g1, np.exp(2 * F_SMOOTH.values(x)) * g0, rtol=1e-12)
    ma = rescale(nil, F_SMOOTH, adapt_frame=True)
    np.testing.assert_allclose(np.asarray(webster(ma, x).g)[:, 0, 0], g0, rtol=1e-12)


def test_predicted_coframe_matches_admissible(nil):
    x = nil.grid.points[5]
    m = rescale(nil, F_SMOOTH, adapt_frame=True)
    pred = np.asarray(predicted_coframe(nil, F_SMOOTH, x))
    direct = np.asarray(admissible_coframe(m, x))
    np.testing.assert_allclose(pred, direct, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 5.0), st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_dilation_factor_is_lambda_squared(lam, x):
    h = heisenberg(1, half_width=25.0)
    a, r = pseudoconformal_factor(heisenberg_dilation(lam), h, h, np.array(x))
    assert a == pytest.approx(lam**2, rel=1e-14)
    assert r <= 1e-14 * lam**2 * 3


def test_translation_and_identity_factor_one():
    h = heisenberg(2, half_width=5.0)
    x = np.array([0.3, -0.2, 0.1, 0.4, 0.5])
    for F in (heisenberg_translation(np.array([1.0, 0.5, -0.3, 0.2, 2.0]), 2), identity_map(5)):
        a, r = pseudoconformal_factor(F, h, h, x)
        assert a == pytest.approx(1.0, abs=1e-14) and r < 1e-13
        assert cr_automorphism_residual(F, h, x) < 1e-13


def test_conjugation_is_not_cr():
    h = heisenberg(1)
    assert cr_automorphism_residual(heisenberg_conjugation(1), h, np.array([0.2, 0.1, 0.3])) > 0.5


def test_dilation_rejects_nonpositive():
    with pytest.raises(NonPositiveDilation):
        heisenberg_dilation(-1.0)


def test_smooth_map_compose():
    F = heisenberg_dilation(2.0).compose(heisenberg_dilation(0.5))
    x = jnp.array([0.3, 0.1, -0.2])
    np.testing.assert_allclose(np.asarray(F(x)), np.asarray(x), atol=1e-15)
    assert isinstance(F, SmoothMap)


def test_extended_J_and_adapted_metric():
    s = sphere(1, "A")
    x = np.array([0.3, -0.1, 0.2])
    J = extended_J(s, x)
    Tf = np.asarray(s.geometry.reeb(jnp.asarray(x)))
    np.testing.assert_allclose(J @ Tf, 0.0, atol=1e-12)
    # J^2 = -1 on H
    np.testing.assert_allclose(J @ J @ J, -J, atol=1e-10)
    G = adapted_metric(s, x)
    np.testing.assert_allclose(G, G.T, atol=1e-12)
    assert np.linalg.eigvalsh(G).min() > 0
