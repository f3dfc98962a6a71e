import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from curvestar import oscillator as osc
from curvestar.flatcore import GridFn, GridSpec, gaussian
from curvestar.geometry import Point, mul
from curvestar.transforms import MultiplierSpec

a1, l1 = osc.a1, osc.l1
O = Point(0.0, 0.0)


def test_laplacian_on_simple_functions():
    D = osc.laplacian(0)
    assert osc.lvf_apply(D, sp.Integer(7)) == 0
    assert sp.simplify(osc.lvf_apply(D, a1)) == -4


def test_generator_algebra():
    H, E = osc.Ht, osc.Et
    # [H, E] acting on l: H E l = H 1 = 0, E H l = E(-2l) = -2
    comm = H * E - E * H
    assert sp.simplify(osc.lvf_apply(comm, l1)) == 2
    assert (H + 0).order == 1 and osc.bilaplacian().order == 2
    assert (H - H).terms == ()
    with pytest.raises(ValueError):
        osc.LeftInvOp.gen("X")


def test_transpose_rules():
    H, E = osc.Ht, osc.Et
    assert H.transpose().terms == (-H + 2).terms
    assert E.transpose().terms == (-E).terms
    D = osc.laplacian(0)
    assert D.transpose().terms == D.terms


@pytest.mark.parametrize("name", ["H", "E", "Delta", "B"])
def test_transpose_residuals(name):
    op = {"H": osc.Ht, "E": osc.Et, "Delta": osc.laplacian(0), "B": osc.b_tilde(0.7, 1.3, -0.4)}[name]
    assert osc.transpose_check(op, n_pairs=2, seed=1)["residual"] < 1e-8


def test_lvf_paths_agree():
    f = sp.exp(-(a1 - 0.2) ** 2 - l1 ** 2 / 2) * (1 + a1 * l1)
    D = osc.laplacian(0)
    exact = sp.lambdify((a1, l1), osc.lvf_apply(D, f), "numpy")
    num = osc.lvf_apply(D, sp.lambdify((a1, l1), f, "numpy"))
    x = np.array([0.1, -0.3, 0.4]), np.array([0.2, 0.5, -0.6])
    assert np.allclose(num(*x), exact(*x), atol=1e-6)
    spec = GridSpec(-4, 4, 256, -4, 4, 256)
    g = GridFn.from_function(spec, sp.lambdify((a1, l1), f, "numpy"))
    grid = osc.lvf_apply(D, g).values
    A, L = spec.mesh()
    inner = (np.abs(A) < 2) & (np.abs(L) < 2)
    assert np.max(np.abs(grid - exact(A, L))[inner]) < 1e-4


def test_lvf_rejects_bad_inputs():
    with pytest.raises(TypeError):
        osc.lvf_apply(osc.Ht, "nope")
    with pytest.raises(ValueError):
        osc.lvf_apply(osc.Ht, gaussian(GridSpec(-2, 2, 16, -2, 2, 16)), phase=1)


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-1, 1), st.floats(-1, 1))
def test_left_invariance(ga, gl, xa, xl):
    f = lambda a, l: np.exp(-a ** 2 - 0.5 * l ** 2) * np.cos(a + l)
    g = Point(ga, gl)

    def pulled(a, l):
        y = mul(g, Point(a, l))
        return f(y.a, y.ell)

    D = osc.laplacian(0)
    lhs = osc.lvf_apply(D, pulled, h=1e-3)(xa, xl)
    y = mul(g, Point(xa, xl))
    rhs = osc.lvf_apply(D, f, h=1e-3)(y.a, y.ell)
    assert abs(lhs - rhs) < 1e-6


def test_printed_forms_at_origin(rng):
    pr = osc.q_forms_eval(O, O)
    assert pr["c"] == pytest.approx(-256)
    x = rng.uniform(-1, 1, 4)
    assert osc.q_forms_eval(Point(x[0], 0.0), Point(x[2], 0.0))["Q4"] == 0
    A = osc.q_forms_eval(Point(x[0], x[1]), Point(x[2], x[3]))["A"]
    assert np.linalg.det(A) == pytest.approx(np.cosh(2 * (x[2] - x[0])) ** 2, rel=1e-12)


def test_exact_symbol_against_printed_forms(rng):
    ex = osc.exact_eval(O, O)
    assert ex["c"] == pytest.approx(-128)
    assert osc.q4_factor() == pytest.approx(64)
    x = rng.uniform(-1, 1, (4, 20))
    pairs = [(Point(*x[:2, i]), Point(*x[2:, i])) for i in range(20)]
    rep = osc.laplacian_identity_check(pairs)
    assert rep["fd_vs_exact"] < 1e-6
    assert rep["exact_decomposition"] < 1e-12
    # printed polynomials carry an extra overall factor 2
    assert rep["printed_over_exact"] == pytest.approx(2.0, rel=1e-12)
    assert rep["printed_rescaled_deviation"] < 1e-12


def test_imaginary_part_vanishes_on_zero_fibre(rng):
    a = rng.uniform(-1, 1, (2, 10))
    ex = osc.exact_eval(Point(a[0], 0 * a[0]), Point(a[1], 0 * a[1]))
    assert np.max(np.abs(ex["Q3"])) < 1e-9


def test_quartic_frame_diagonalises(rng):
    frame = osc.quartic_frame()
    a = rng.uniform(-2, 2, (2, 5))
    T, det = frame(a[0], a[1])
    for i in range(5):
        A, _ = osc.exact_quadratic(a[0, i], a[1, i])
        M = T[i].T @ (osc.q4_factor() ** 0.5 * np.asarray(A, float)) @ T[i]
        assert np.allclose(M, np.eye(2), atol=1e-9)
        assert abs(np.linalg.det(T[i])) == pytest.approx(det[i])


def test_regularization_constant_prescription():
    C = osc.regularization_constant(a0=0.5)
    assert C == 4096
    lo = osc.q2_bounds(np.linspace(-0.5, 0.5, 11), np.linspace(-0.5, 0.5, 11))
    assert np.all(np.isfinite(lo))


def test_unit_weight_ratios():
    one = lambda x1, y1, x2, y2: np.ones_like(x1) + 0j
    r = osc.weight_diagnostic(one, boxes=(1, 2), n_samples=8, ell_integral=False)
    assert r.sup_ratios["1"] == [1.0, 1.0]
    assert all(v == [0.0, 0.0] for k, v in r.sup_ratios.items() if k != "1")


def test_admissibility_weight_converges():
    den = lambda x1, y1, x2, y2: osc.amplitude_decay_denominator(x1, x2) + 0j
    r = osc.weight_diagnostic(den, sup_ratios=False, ell_integral=False)
    assert r.converged


def test_amplitudes_at_origin():
    assert osc.a_can_amplitude(O, O) == pytest.approx(4.0)
    m = MultiplierSpec.power_cosh(0.7)
    xi0 = 1 / m.at_theta(0.5)(0.0)
    assert osc.theta_factor(O, O, m, 0.5) == pytest.approx(xi0)
    g1, g2 = Point(np.array([0.3]), 0.0), Point(np.array([-0.8]), 0.0)
    assert osc.theta_factor(g1, g2, MultiplierSpec.one(), 0.5) == pytest.approx(1.0)


def test_fast_path_basic_properties():
    F = osc.gaussian_amplitude()
    zero = lambda *x: 0 * x[0] + 0j
    spec = GridSpec(-2, 2, 32, -4, 4, 32)
    assert osc.osc_integral(zero, 1.0, "FAST", spec).value == 0
    v1 = osc.osc_integral(F, 1.0, "FAST", spec).value
    v2 = osc.osc_integral(lambda *x: 2.5 * F(*x), 1.0, "FAST", spec).value
    assert v2 == pytest.approx(2.5 * v1, rel=1e-12)
    assert abs(v1 - osc.osc_direct(F, 1.0, spec)) / abs(v1) < 1e-3
    with pytest.raises(ValueError):
        osc.osc_integral(F, 1.0, "SLOW")


@pytest.mark.slow
def test_fast_matches_parts():
    F = osc.gaussian_amplitude()
    fast = osc.osc_integral(F, 1.0, "FAST").value
    parts = osc.osc_integral(F, 1.0, "PARTS")
    assert abs(fast - parts.value) / abs(fast) < 2e-2
    assert parts.C == osc.regularization_constant(a0=1.3)
