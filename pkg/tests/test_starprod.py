import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curvestar.flatcore import GridFn, GridSpec, gaussian
from curvestar.geometry import Point
from curvestar.starprod import (PREFACTOR_CANDIDATES, CalibrationError, CalibrationRecord, DeformParams, a_shift,
                                poisson_fd, reflect_origin, snap_constant, star_kernel, star_transport,
                                star_unitary, theta_expand, trace)
from curvestar.transforms import MultiplierSpec
from curvestar.verify import bump_pair, probe_set

SPEC = GridSpec(-4, 4, 128, -4, 4, 128)
MULTS = [MultiplierSpec.one(), MultiplierSpec.unitary()]


@pytest.fixture(scope="module")
def bumps():
    return bump_pair(SPEC)


def rel(x, ref):
    return float(np.max(np.abs(np.asarray(x) - ref)) / np.max(np.abs(ref)))


def test_record_text_roundtrip(calib, tmp_path):
    assert calib.status == "calibrated"
    back = CalibrationRecord.from_text(calib.to_text())
    assert back.to_text() == calib.to_text()
    calib.write(tmp_path / "c.txt")
    assert CalibrationRecord.read(tmp_path / "c.txt") == back


def test_calibrated_constants(calib):
    assert calib.flat_phase_constant == 2
    assert calib.weyl_scale == -2
    assert calib.jacobian_candidate == "full"
    assert calib.kernel_prefactor == pytest.approx(1 / (4 * np.pi ** 2))
    assert calib.unitary_prefactor == pytest.approx(1 / (16 * np.pi ** 2))


def test_params_validation():
    with pytest.raises(ValueError):
        DeformParams(0.0)
    with pytest.raises(ValueError, match="outside"):
        DeformParams(0.5, grid=SPEC, probes=[(9.0, 0.0)])
    with pytest.raises(CalibrationError):
        DeformParams(0.5).require_calib()
    assert DeformParams(0.5, MultiplierSpec.unitary()).multiplier.theta == 0.5


def test_kernel_needs_calibration(bumps):
    u, v = bumps
    with pytest.raises(CalibrationError):
        star_kernel(u, v, DeformParams(0.5, grid=SPEC), [Point(0.0, 0.0)])


@given(st.floats(0.8, 1.25))
def test_snap_constant_picks_nearest(f):
    name, val, gap = snap_constant(f / (4 * np.pi ** 2))
    assert name == "1/(4pi^2)"
    assert gap == pytest.approx(abs(f - 1), rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("theta", [0.2, 0.5])
@pytest.mark.parametrize("m", MULTS, ids=lambda m: m.family)
def test_kernel_matches_transport(calib, bumps, m, theta):
    u, v = bumps
    pr = probe_set(SPEC)
    idx = tuple(np.array([SPEC.nearest_index(p) for p in pr]).T)
    p = DeformParams(theta, m, SPEC, calib=calib)
    assert rel(star_kernel(u, v, p, pr), star_transport(u, v, p).values[idx]) < 2e-2


def test_unitary_path_equals_kernel_with_unitary(calib, bumps):
    u, v = bumps
    pr = probe_set(SPEC)
    p = DeformParams(0.5, MultiplierSpec.unitary(), SPEC, calib=calib)
    assert rel(star_unitary(u, v, p, pr), star_kernel(u, v, p, pr)) < 1e-12


@pytest.mark.parametrize("m", MULTS, ids=lambda m: m.family)
def test_covariant_under_a_shift(bumps, m):
    u, v = bumps
    p = DeformParams(0.5, m, SPEC)
    lhs = star_transport(a_shift(u, 4), a_shift(v, 4), p)
    rhs = a_shift(star_transport(u, v, p), 4)
    assert rel(lhs.values, rhs.values) < 1e-9


def test_hermitian_structure(bumps):
    u, v = bumps
    p = DeformParams(0.5, MultiplierSpec.unitary(), SPEC)
    lhs = star_transport(u, v, p).conj().values
    rhs = star_transport(v.conj(), u.conj(), p).values
    assert rel(lhs, rhs) < 1e-5


def test_trace_cyclic_and_unitary_closed(bumps):
    u, v = bumps
    for m in MULTS:
        p = DeformParams(0.5, m, SPEC)
        t1, t2 = trace(star_transport(u, v, p), p), trace(star_transport(v, u, p), p)
        assert abs(t1 - t2) / abs(t1) < 1e-2
    p = DeformParams(0.5, MultiplierSpec.unitary(), SPEC)
    ref = (u * v).integral()
    assert abs(star_transport(u, v, p).integral() - ref) / abs(ref) < 1e-2


def test_transport_associative(bumps):
    u, v = bumps
    w = gaussian(SPEC, 0.05, 0.05, 0.5, 0.5)
    p = DeformParams(0.5, MultiplierSpec.unitary(), SPEC)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lhs = star_transport(star_transport(u, v, p), w, p).values
        rhs = star_transport(u, star_transport(v, w, p), p).values
    assert rel(lhs, rhs) < 3e-2


def test_reflection_and_shift_helpers(bumps):
    u, _ = bumps
    assert np.array_equal(reflect_origin(reflect_origin(u)).values, u.values)
    with pytest.raises(ValueError):
        reflect_origin(gaussian(GridSpec(0, 4, 16, -1, 1, 16)))
    two = a_shift(a_shift(u, 3), 2).values[:100]
    assert np.array_equal(two, a_shift(u, 5).values[:100])


def test_poisson_bracket_of_coordinates():
    spec = GridSpec(-2, 2, 32, -2, 2, 32)
    A, L = spec.mesh()
    pb = poisson_fd(GridFn(spec, A), GridFn(spec, L)).values
    assert np.allclose(pb, 1.0)


def test_theta_expand_needs_nodes(bumps):
    u, v = bumps
    with pytest.raises(ValueError):
        theta_expand(u, v, None, MultiplierSpec.one(), (0.1, 0.2, 0.3))


@pytest.mark.slow
def test_classical_limit(calib):
    spec = GridSpec(-4, 4, 128, -4, 4, 128)
    u = gaussian(spec, 0.1, -0.1, 0.7, 0.7, phase=0.2)
    v = gaussian(spec, -0.1, 0.15, 0.7, 0.7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ex = theta_expand(u, v, None, MultiplierSpec.unitary(), (0.02, 0.04, 0.06, 0.08, 0.1), degree=4,
                          weyl_scale=calib.weyl_scale)
    assert rel(ex.c0.values, (u * v).values) < 1e-2
    assert rel(ex.c1.values, calib.c1_constant * 0.5j * poisson_fd(u, v).values) < 5e-2
