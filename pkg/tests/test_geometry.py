import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curvestar import geometry as geo
from curvestar.geometry import ORIGIN, Cochain, Point

coord = st.floats(-1.5, 1.5, allow_nan=False)
points = st.builds(Point, coord, coord)


def close(p, q, tol=1e-10):
    return abs(p.a - q.a) <= tol * max(1, abs(q.a)) and abs(p.ell - q.ell) <= tol * max(1, abs(q.ell))


@given(points, points, points)
def test_group_law_associative(x, y, z):
    assert close(geo.mul(geo.mul(x, y), z), geo.mul(x, geo.mul(y, z)))


@given(points)
def test_inverse_and_identity(x):
    assert close(geo.mul(x, geo.inverse(x)), ORIGIN)
    assert close(geo.mul(geo.inverse(x), x), ORIGIN)
    assert close(geo.mul(ORIGIN, x), x)


@given(points, points)
def test_symmetry_is_involution_fixing_centre(x, y):
    assert close(geo.symmetry(x, geo.symmetry(x, y)), y)
    assert close(geo.symmetry(x, x), x)


@given(points, points, points)
def test_symmetric_space_axiom(x, y, z):
    lhs = geo.symmetry(x, geo.symmetry(y, geo.symmetry(x, z)))
    rhs = geo.symmetry(geo.symmetry(x, y), z)
    assert close(lhs, rhs, 1e-9)


@given(points, points)
def test_midpoint_defining_relation(x, y):
    assert close(geo.symmetry(geo.midpoint(x, y), x), y)


def test_half_point_of_origin_is_origin():
    assert geo.half_point(ORIGIN) == (0.0, 0.0)


@given(points, points, points, points)
def test_phase_invariances(x, y, z, w):
    s = geo.s_can3((x, y, z))
    shifted = geo.s_can3((geo.mul(w, x), geo.mul(w, y), geo.mul(w, z)))
    assert shifted == pytest.approx(s, abs=1e-9)
    assert geo.s_can3(geo.diagonal_action(w, x, y, z)) == pytest.approx(s, abs=1e-8)
    # admissibility
    assert geo.s_can3((x, geo.symmetry(x, y), z)) == pytest.approx(-s, abs=1e-9)


@given(points, points, points)
def test_phase_cyclic_and_antisymmetric(x, y, z):
    s = geo.s_can3((x, y, z))
    assert geo.s_can3((y, z, x)) == pytest.approx(s, abs=1e-12)
    assert geo.s_can3((y, x, z)) == pytest.approx(-s, abs=1e-12)


@given(points, points)
def test_two_point_phase(g1, g2):
    assert geo.s_can2(g1, g2) == pytest.approx(-2 * geo.s_can3((ORIGIN, g1, g2)), abs=1e-12)


def test_flat_area_cocycle(rng):
    p = [rng.uniform(-1, 1, 2) for _ in range(4)]
    F = Cochain(3, lambda a, b, c: geo.flat_area(a, b, c))
    d = (F(p[1], p[2], p[3]) - F(p[0], p[2], p[3]) + F(p[0], p[1], p[3]) - F(p[0], p[1], p[2]))
    assert abs(d) < 1e-14


def test_flat_area_of_unit_triangle():
    assert geo.flat_area((0, 0), (1, 0), (0, 1), c=1.0) == pytest.approx(1.0)


@given(points, points, points)
def test_phi_round_trip(x, y, z):
    t = (x, y, z)
    back = geo.phi_inverse(geo.phi_forward(t))
    for p, q in zip(back, t):
        assert close(p, q, 1e-9)


def test_phi_matches_newton(rng):
    for v in rng.uniform(-1, 1, (10, 6)):
        t = (Point(v[0], v[1]), Point(v[2], v[3]), Point(v[4], v[5]))
        for p, q in zip(geo.phi_forward(t), geo.phi_forward_newton(t)):
            assert close(p, q, 1e-8)


def test_phi_output_satisfies_fixed_point(rng):
    v = rng.uniform(-1, 1, 6)
    x, y, z = Point(v[0], v[1]), Point(v[2], v[3]), Point(v[4], v[5])
    t0, t1, t2 = geo.phi_forward((x, y, z))
    assert close(geo.symmetry(z, geo.symmetry(y, geo.symmetry(x, t0))), t0, 1e-9)
    assert close(geo.symmetry(x, t0), t1)
    assert close(geo.symmetry(y, t1), t2)


def test_jacobian_candidate_selection(rng):
    name, err = geo.select_jacobian_candidate(rng, n=10)
    assert name == geo.JACOBIAN_CANDIDATE
    assert err < 1e-6


def test_jacobian_at_equal_a_is_16():
    t = (Point(0.3, 1.0), Point(0.3, -2.0), Point(0.3, 0.5))
    assert geo.jac_phi(t) == 16.0


def test_coboundary_squares_to_zero(rng):
    F = Cochain(1, lambda x: np.sin(x.a) * x.ell)
    ddF = geo.coboundary(geo.coboundary(F))
    pts = [Point(*rng.uniform(-1, 1, 2)) for _ in range(3)]
    assert abs(ddF(*pts)) < 1e-14


def test_coboundary_rejects_bad_arity():
    with pytest.raises(ValueError):
        geo.coboundary(Cochain(3, lambda *x: 0.0))
    with pytest.raises(ValueError):
        Cochain(2, lambda x, y: 0.0)(ORIGIN)


def test_vectorised_inputs_broadcast():
    x = Point(np.array([0.0, 0.5]), np.array([1.0, -1.0]))
    out = geo.mul(x, ORIGIN)
    np.testing.assert_allclose(out.a, x.a)
    np.testing.assert_allclose(out.ell, x.ell)
