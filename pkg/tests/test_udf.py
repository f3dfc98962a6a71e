from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curvestar import udf
from curvestar.flatcore import GridSpec, gaussian
from curvestar.geometry import Point
from curvestar.starprod import DeformParams, a_shift, star_kernel
from curvestar.transforms import MultiplierSpec
from curvestar.verify import bump_pair, probe_set

SPEC = GridSpec(-4, 4, 128, -4, 4, 128)


def rel(x, ref):
    return float(np.max(np.abs(np.asarray(x) - ref)) / np.max(np.abs(ref)))


@pytest.fixture(scope="module")
def trivial():
    return udf.TrivialScalarInstance()


def test_calibrated_udf_constants(calib):
    assert calib.udf_phase_scale == -0.5
    assert calib.udf_orientation == "right"
    assert calib.udf_multiplier_shift == 0.5
    assert calib.udf_prefactor == pytest.approx(1 / (16 * np.pi ** 2))


@pytest.mark.parametrize("theta", [0.2, 0.5])
def test_trivial_normalisation(calib, trivial, theta):
    p = DeformParams(theta, MultiplierSpec.one(), calib=calib)
    assert abs(udf.udf_product(1.0, 1.0, trivial, p) - 1) < 1e-2


@given(st.complex_numbers(max_magnitude=10), st.complex_numbers(max_magnitude=10))
def test_trivial_bilinear_constant(a, b):
    inst = udf.TrivialScalarInstance(n_a=128)
    w = lambda x1, x2: np.ones_like(x1)
    lam = inst.fibre_pairing(1.0, 1.0, -1.0, w)
    assert inst.fibre_pairing(a, b, -1.0, w) == pytest.approx(lam * a * b, rel=1e-10, abs=1e-10)


def test_trivial_associative(calib, trivial):
    p = DeformParams(0.3, MultiplierSpec.one(), calib=calib)
    a, b, c = 2 - 1j, 0.5j, 3.0
    assert udf.udf_assoc_check(a, b, c, trivial, p) < 1e-10


def test_shifted_multiplier_maps_families():
    th = 0.4
    s = np.linspace(-3, 3, 7)
    one_up = udf.shifted_multiplier(MultiplierSpec.one(), 0.5, th)
    assert np.allclose(one_up(s), MultiplierSpec.unitary(th)(s))
    pc = udf.shifted_multiplier(MultiplierSpec.power_cosh(0.3), 0.5, th)
    assert np.allclose(pc(s), MultiplierSpec.power_cosh(0.8, th)(s))


@pytest.mark.parametrize("theta", [0.2, 0.5])
def test_regular_matches_kernel(calib, theta):
    u, v = bump_pair(SPEC)
    probes = probe_set(SPEC)
    p = DeformParams(theta, MultiplierSpec.one(), SPEC, calib=calib)
    val = udf.udf_product(u, v, udf.LeftRegularInstance(SPEC, calib.udf_orientation), p, probes)
    ref = star_kernel(u, v, udf.kernel_counterpart(p), probes)
    assert rel(val, ref) < 3e-2


def test_probe_off_row_rejected(calib):
    u, v = bump_pair(SPEC)
    p = DeformParams(0.5, MultiplierSpec.one(), SPEC, calib=calib)
    with pytest.raises(ValueError, match="row"):
        udf.udf_product(u, v, udf.LeftRegularInstance(SPEC), p, [Point(SPEC.a[3] + 1e-3, 0.0)])


def test_orientation_validated():
    with pytest.raises(ValueError):
        udf.LeftRegularInstance(SPEC, "up")


def test_covariant_under_a_shift(calib):
    spec = GridSpec(-3, 3, 64, -3, 3, 64)
    u, v, _ = udf.bump_triple(spec)
    inst = udf.LeftRegularInstance(spec, calib.udf_orientation)
    p = DeformParams(0.5, MultiplierSpec.one(), spec, calib=calib)
    lhs = udf.udf_product(a_shift(u, 2), a_shift(v, 2), inst, p)
    rhs = a_shift(udf.udf_product(u, v, inst, p), 2)
    inner = slice(8, -8)
    assert rel(lhs.values[inner], rhs.values[inner]) < 1e-6


def test_associativity_improves(calib):
    rep = udf.assoc_convergence(DeformParams(0.5, MultiplierSpec.one(), calib=calib))
    assert rep.residual < 5e-2
    assert rep.improves


def test_action_diagnostics_regular():
    spec = GridSpec(-4, 4, 256, -4, 4, 256)
    inst = udf.LeftRegularInstance(spec)
    a = gaussian(spec, 0.1, 0.0, 0.6, 0.35)
    b = gaussian(spec, -0.1, 0.1, 0.5, 0.35, phase=0.3)
    rng = np.random.default_rng(5)
    g = [Point(*rng.uniform(-0.25, 0.25, 2)) for _ in range(6)]
    rep = udf.action_diagnostics(inst, a, g, b)
    assert rep["identity"] < 1e-12
    assert rep["homomorphism"] < 1e-3
    assert rep["isometry"] < 1e-3
    assert rep["automorphism"] < 1e-3
    # strong continuity: distance grows linearly in t
    assert rep["continuity_slope_H"] == pytest.approx(1.0, abs=0.1)
    assert rep["continuity_slope_E"] == pytest.approx(1.0, abs=0.1)


def test_action_diagnostics_trivial(trivial):
    rep = udf.action_diagnostics(trivial, 2.0 + 1j, [Point(0.1, 0.2), Point(-0.3, 0.1)], 1j)
    assert rep["identity"] == rep["homomorphism"] == rep["automorphism"] == 0
    assert rep["continuity_slope_H"] == 0.0


def test_seminorms_increase_with_order():
    inst = udf.LeftRegularInstance(GridSpec(-4, 4, 64, -4, 4, 64))
    a = gaussian(inst.spec, 0.0, 0.0, 0.5, 0.5)
    s = [inst.seminorm(j, a) for j in range(3)]
    assert s[0] == pytest.approx(1.0, rel=1e-6) and s[1] > 0 and s[2] > 0
