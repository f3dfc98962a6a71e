import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curvestar.flatcore import GridFn, GridSpec, gaussian
from curvestar.transforms import (BandOverflow, FreqFn, MultiplierSpec, apply_multiplier, crop_ell,
                                  partial_fourier, phi, phi_inv, twist_pullback, u_theta, xi_from_theta,
                                  zero_pad_ell)

SPEC = GridSpec(-4, 4, 64, -4, 4, 128)


def rel(x, ref):
    return np.max(np.abs(x - ref)) / np.max(np.abs(ref))


def test_fourier_round_trip_and_parseval():
    u = gaussian(SPEC, 0.1, -0.2, 0.5, 0.6, phase=0.3)
    F = partial_fourier(u, "fwd")
    assert rel(partial_fourier(F, "inv").values, u.values) < 1e-12
    assert F.norm2() ** 2 / (2 * np.pi) == pytest.approx(u.norm2() ** 2, rel=1e-10)


def test_fourier_of_gaussian_is_gaussian():
    wide = GridSpec(-1, 1, 16, -16, 16, 256)
    g = GridFn.from_function(wide, lambda A, L: np.exp(-L ** 2 / 2) + 0 * A)
    F = partial_fourier(g, "fwd")
    assert rel(F.values[3], np.sqrt(2 * np.pi) * np.exp(-F.alpha ** 2 / 2)) < 1e-8


def test_bad_direction_rejected():
    with pytest.raises(ValueError):
        partial_fourier(gaussian(SPEC), "sideways")
    with pytest.raises(ValueError):
        FreqFn(SPEC, np.zeros((3, 3)))


@given(st.floats(-20, 20), st.floats(0.05, 2.0))
def test_phi_inverse_pair(alpha, theta):
    assert phi(phi_inv(alpha, theta), theta) == pytest.approx(alpha, rel=1e-10, abs=1e-12)


def test_twist_round_trip_small_theta():
    u = zero_pad_ell(gaussian(SPEC, 0.1, -0.2, 0.5, 0.6, phase=0.3), 4)
    F = partial_fourier(u, "fwd")
    back = twist_pullback(twist_pullback(F, 0.2, "inv"), 0.2, "fwd")
    assert rel(back.values, F.values) < 1e-6


def test_twist_theta_zero_is_identity():
    F = partial_fourier(gaussian(SPEC), "fwd")
    assert np.array_equal(twist_pullback(F, 0.0).values, F.values)


def test_band_overflow_raises():
    # a narrow spike keeps spectrum at the band edge
    vals = np.zeros(SPEC.shape, complex)
    vals[:, SPEC.n_ell // 2] = 1.0
    with pytest.raises(BandOverflow):
        twist_pullback(partial_fourier(GridFn(SPEC, vals), "fwd"), 0.5, "inv")


@pytest.mark.parametrize("fam", ["trig", "spline"])
def test_twist_interpolation_methods(fam):
    # doubling the l-box halves the alpha spacing; a cubic spline gains about 2^4
    errs = []
    for box, n in ((8, 128), (16, 256)):
        spec = GridSpec(-1, 1, 16, -box, box, n)
        F = partial_fourier(gaussian(spec, 0.0, 0.0, 0.5, 0.8), "fwd")
        back = twist_pullback(twist_pullback(F, 0.2, "inv", fam), 0.2, "fwd", fam)
        errs.append(rel(back.values, F.values))
    if fam == "trig":
        assert max(errs) < 1e-6
    else:
        assert errs[1] < errs[0] / 8


def test_multiplier_families():
    s = np.linspace(-5, 5, 101)
    assert np.all(MultiplierSpec.one()(s) == 1.0)
    u = MultiplierSpec.unitary(0.5)
    assert np.allclose(u(s), (1 + s ** 2) ** -0.25)
    assert np.allclose(MultiplierSpec.power_cosh(0.5, 0.5)(s), u(s))
    with pytest.raises(ValueError):
        MultiplierSpec.unitary()(s)
    with pytest.raises(ValueError):
        MultiplierSpec("NOPE")


def test_table_multiplier_and_text_roundtrip():
    s = np.linspace(-3, 3, 13)
    t = MultiplierSpec.table(s, 1 + 0.1 * s ** 2)
    assert t(np.array([0.0]))[0] == pytest.approx(1.0)
    assert t(np.array([10.0]))[0] == pytest.approx(t(np.array([3.0]))[0])
    for m in (t, MultiplierSpec.power_cosh(0.3, 0.4), MultiplierSpec.unitary(0.2)):
        back = MultiplierSpec.from_text(m.to_text())
        assert np.allclose(back(s), m(s))
    with pytest.raises(ValueError):
        MultiplierSpec.table([0, 1, 2, 3], [1, 0, 1, 1])


def test_multiplier_parse():
    assert MultiplierSpec.parse("UNITARY").family == "UNITARY"
    assert MultiplierSpec.parse("power_cosh:0.3").p == 0.3
    with pytest.raises(ValueError):
        MultiplierSpec.parse("sqrt")


def test_symbol_bound_of_unitary():
    C, N = MultiplierSpec.unitary(0.5).symbol_bound()
    assert N == -0.5 and np.isfinite(C)


def test_multiplier_round_trip_and_floor():
    F = partial_fourier(gaussian(SPEC), "fwd")
    m = MultiplierSpec.unitary(0.5)
    back = apply_multiplier(apply_multiplier(F, m), m, inverse=True)
    assert rel(back.values, F.values) < 1e-12
    with pytest.raises(ValueError, match="below"):
        apply_multiplier(F, MultiplierSpec.power_cosh(40.0, 1.0))


def test_pad_and_crop_inverse():
    u = gaussian(SPEC, phase=0.4)
    assert np.array_equal(crop_ell(zero_pad_ell(u, 4), SPEC).values, u.values)


@pytest.mark.parametrize("m", [MultiplierSpec.one(), MultiplierSpec.unitary()])
def test_u_theta_round_trip(m):
    spec = GridSpec(-4, 4, 64, -8, 8, 256)
    u = gaussian(spec, 0.1, -0.2, 0.5, 1.2, phase=0.3)
    rt = u_theta(u_theta(u, m, 0.2, "fwd"), m, 0.2, "inv")
    assert (rt - u).norm2() / u.norm2() < 1e-5


def test_unitary_family_unit_identity():
    t = np.linspace(-5, 5, 2001)
    for th in (0.1, 0.7, 2.0):
        xi = xi_from_theta(MultiplierSpec.unitary(), th)
        assert np.max(np.abs(xi(t) * xi(-t) / np.cosh(2 * t) - 1)) < 1e-12


@given(st.floats(0.1, 2.0), st.floats(0.0, 2.0))
def test_power_cosh_kernel_function(p, t):
    xi = xi_from_theta(MultiplierSpec.power_cosh(p), 0.4)
    assert xi(t) == pytest.approx(np.cosh(2 * t) ** p, rel=1e-10)
