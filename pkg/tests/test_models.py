import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crgeom.errors import (
    CapExclusion,
    NonPositiveDilation,
    PseudoconvexityLost,
    UnsupportedManifold,
)
from crgeom.models import (
    HeisenbergPoint,
    cc_distance,
    cc_distances,
    deform,
    deformation_family,
    dilate,
    group_law,
    heisenberg,
    heisenberg_norm,
    inverse,
    nilmanifold,
    normal_coordinates,
    rho,
    sphere,
    sphere_hopf,
    theta_pair,
)
from crgeom.models.sphere import cayley, check_cap, hopf_point, hopf_to_cayley, inverse_cayley, to_sphere

coord = st.floats(-3, 3, allow_nan=False)
points = st.lists(coord, min_size=3, max_size=3).map(np.array)
points5 = st.lists(coord, min_size=5, max_size=5).map(np.array)


@settings(max_examples=60, deadline=None)
@given(points, points, points)
def test_group_associative(a, b, c):
    np.testing.assert_allclose(group_law(group_law(a, b), c), group_law(a, group_law(b, c)), atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(points5)
def test_group_identity_and_inverse(a):
    e = np.zeros(5)
    np.testing.assert_array_equal(group_law(a, e), a)
    np.testing.assert_array_equal(group_law(a, inverse(a)), e)
    np.testing.assert_array_equal(group_law(inverse(a), a), e)


@settings(max_examples=60, deadline=None)
@given(points, st.floats(0.05, 20))
def test_norm_homogeneous(a, lam):
    assert heisenberg_norm(dilate(lam, a)) == pytest.approx(lam * heisenberg_norm(a), rel=1e-12, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(points, points, st.floats(0.1, 5))
def test_dilation_is_automorphism(a, b, lam):
    np.testing.assert_allclose(
        dilate(lam, group_law(a, b)), group_law(dilate(lam, a), dilate(lam, b)), rtol=1e-12, atol=1e-9
    )


def test_dilation_rejects_nonpositive():
    with pytest.raises(NonPositiveDilation):
        dilate(0.0, np.zeros(3))


def test_heisenberg_point_roundtrip():
    p = HeisenbergPoint((1 + 2j, -0.5j), 0.25)
    assert HeisenbergPoint.from_real(p.as_real()) == p
    q = group_law(p, HeisenbergPoint((0.5, 1j), -1.0))
    assert isinstance(q, HeisenbergPoint) and q.n == 2


@pytest.mark.parametrize("n", [1, 2])
def test_cayley_roundtrip_on_sphere(n):
    x = np.random.default_rng(n).uniform(-2, 2, size=(10, 2 * n + 1))
    z = np.asarray(cayley(jnp.asarray(x)))
    np.testing.assert_allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-13)
    np.testing.assert_allclose(np.asarray(inverse_cayley(z)), x, atol=1e-11)


def test_chart_b_is_antipodal():
    x = np.array([0.3, -0.2, 0.7])
    a = to_sphere(sphere(1, "A"), x)
    b = to_sphere(sphere(1, "B"), x)
    np.testing.assert_allclose(a, -b)


def test_cap_exclusion():
    check_cap(np.array([1.0, 0.0, 0.0]))
    with pytest.raises(CapExclusion):
        check_cap(np.array([0.0, 0.0, 100.0]))


def test_hopf_points_map_to_a_chart():
    x = np.array([0.7, 1.0, 2.5])
    chart, y = hopf_to_cayley(x)
    zeta = np.asarray(hopf_point(jnp.asarray(x)))
    sign = 1.0 if chart == "A" else -1.0
    np.testing.assert_allclose(sign * np.asarray(cayley(jnp.asarray(y))), zeta, atol=1e-12)


def test_nilmanifold_grid_is_periodic():
    m = nilmanifold(1, grid=(4, 4, 4))
    assert m.grid.kind == "nilmanifold"
    assert m.grid.size == 64
    assert m.meta["model"] == "nilmanifold"


# -- Carnot-Caratheodory distance --------------------------------------------------


def test_cc_distance_horizontal_segment_is_exact():
    h = heisenberg(1)
    # |d/dx|^2 = 2 g |theta^1(d/dx)|^2 = 2 for the Heisenberg frame
    assert cc_distance(h, np.zeros(3), np.array([0.5, 0.0, 0.0])) == pytest.approx(0.5 * np.sqrt(2), rel=1e-12)
    assert cc_distance(h, np.zeros(3), np.zeros(3)) == 0.0


def test_cc_distance_symmetric_and_triangle():
    h = heisenberg(1)
    a, b, c = np.zeros(3), np.array([0.25, 0.25, 0.125]), np.array([-0.25, 0.5, 0.0])
    dab, dba = cc_distance(h, a, b), cc_distance(h, b, a)
    assert dab == pytest.approx(dba, rel=1e-12)
    assert cc_distance(h, a, c) <= dab + cc_distance(h, b, c) + 1e-12


def test_cc_distance_vertical_is_square_root_like():
    h = heisenberg(1)
    d1 = cc_distance(h, np.zeros(3), np.array([0.0, 0.0, 0.5]))
    d2 = cc_distance(h, np.zeros(3), np.array([0.0, 0.0, 2.0]))
    # d(0, (0, s)) ~ sqrt(s): quadrupling s roughly doubles d (lattice upper bound)
    assert 1.6 < d2 / d1 < 2.4


def test_cc_distances_batch_matches_single():
    h = heisenberg(1)
    targets = np.array([[0.25, 0.0, 0.0], [0.0, 0.25, 0.125]])
    d = cc_distances(h, np.zeros(3), targets)
    assert d[0] == pytest.approx(cc_distance(h, np.zeros(3), targets[0]))


def test_cc_rejects_hopf_chart():
    with pytest.raises(UnsupportedManifold):
        cc_distance(sphere_hopf(None), np.array([0.5, 0, 0]), np.array([0.6, 0, 0]))


# -- normal coordinates -------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(points, points)
def test_theta_antisymmetric_on_heisenberg(x, y):
    h = heisenberg(1)
    np.testing.assert_array_equal(theta_pair(h, x, y), -theta_pair(h, y, x))
    assert rho(h, x, y) == rho(h, y, x)


def test_normal_coordinates_center_and_roundtrip():
    s = sphere(1, "A")
    xi = np.array([0.2, -0.1, 0.3])
    nc = normal_coordinates(s, xi)
    np.testing.assert_array_equal(nc.forward(xi), np.zeros(3))
    y = np.array([0.01, -0.02, 0.005])
    np.testing.assert_allclose(nc.forward(nc.inverse(y)), y, atol=1e-14)


def test_normal_coordinates_pullback_at_center_is_standard():
    s = sphere(2, "A")
    nc = normal_coordinates(s, np.array([0.1, 0.0, -0.2, 0.05, 0.1]))
    dz, dt = nc.pullback_defect(np.zeros(5))
    assert dz < 1e-13 and dt < 1e-13


def test_normal_coordinates_reject_hopf():
    with pytest.raises(UnsupportedManifold):
        normal_coordinates(sphere_hopf(None), np.array([0.5, 0.0, 0.0]))


# -- deformations --------------------------------------------------------------------


@pytest.mark.parametrize("recipe", ["contact", "frame"])
def test_deformation_deviation_linear(recipe):
    m = nilmanifold(1, grid=(6, 6, 6))
    fam = deformation_family(m, recipe, [0.1, 0.05, 0.025])
    d = fam.deviations(0)
    assert fam.monotone(0) and fam.monotone(1)
    # linear to leading order in eps: halving eps roughly halves the deviation
    ratios = np.array(d[1:]) / np.array(d[:-1])
    assert np.all((ratios > 0.45) & (ratios < 0.55))
    assert all(fam.levi_min(k) > 0 for k in range(len(fam)))


def test_deformation_loses_pseudoconvexity():
    m = nilmanifold(1, grid=(6, 6, 6))
    with pytest.raises(PseudoconvexityLost) as exc:
        deformation_family(m, "frame", [0.5, 1.2])
    assert exc.value.k == 1


def test_deformation_unknown_recipe():
    with pytest.raises(ValueError):
        deformation_family(nilmanifold(1, grid=(4, 4, 4)), "twist", [0.1])
    assert deform(heisenberg(1, grid=(4, 4, 4)), "contact", 0.0).meta["deformed"] == "contact"
