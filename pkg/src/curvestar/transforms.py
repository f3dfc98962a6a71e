"""Partial Fourier transform, twisting map, multipliers and the intertwiner U.

Conventions: ``F(u)(a, alpha) = int exp(-i alpha l) u(a, l) dl`` on the centred
FFT lattice; the inverse carries the 1/2pi.  The twisting map acts only on the
dual variable, ``phi(alpha) = sinh(2 theta alpha) / (2 theta)``.

Off-lattice frequencies are evaluated by default with the exact non-uniform
DFT of the l-samples (band-limited interpolation of the spectrum).  A cubic
spline in alpha is available for comparison.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .flatcore import GridFn, GridSpec, alpha_lattice, fourier_ell, inverse_fourier_ell

MULT_FLOOR = 1e-12
# spectrum at the band edge, relative to its max: warn above the first, refuse above the second
BAND_WARN = 1e-8
BAND_LIMIT = 1e-2

FAMILIES = ("ONE", "UNITARY", "POWER_COSH", "TABLE")


class BandOverflow(ValueError):
    """Twisted nodes leave the sampled frequency band while data is still significant there."""


class BandWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MultiplierSpec:
    """The operator multiplier Theta.

    ``POWER_COSH`` with power p is ``(1 + 4 theta^2 s^2)^(-p/2)``, whose
    induced kernel function is ``cosh(2t)^p``; ``UNITARY`` is the case p = 1/2.
    ``theta`` is bound lazily through :meth:`at_theta` for the analytic
    families.  ``TABLE`` interpolates samples ``(table_s, table_v)`` with a
    cubic spline and is held constant outside the sampled range.
    """

    family: str = "ONE"
    theta: float | None = None
    p: float = 0.5
    table_s: tuple = ()
    table_v: tuple = ()
    _spline: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown multiplier family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "UNITARY":
            object.__setattr__(self, "p", 0.5)
        if self.family == "TABLE":
            s = np.asarray(self.table_s, float)
            v = np.asarray(self.table_v, float)
            if s.size < 4 or s.shape != v.shape:
                raise ValueError("TABLE needs matching s/value samples, at least 4")
            if np.any(np.diff(s) <= 0):
                raise ValueError("TABLE abscissae must be strictly increasing")
            if np.min(np.abs(v)) < MULT_FLOOR:
                raise ValueError("TABLE multiplier vanishes on the sampled range")
            object.__setattr__(self, "_spline", CubicSpline(s, v))

    @classmethod
    def one(cls):
        return cls("ONE")

    @classmethod
    def unitary(cls, theta=None):
        return cls("UNITARY", theta=theta)

    @classmethod
    def power_cosh(cls, p, theta=None):
        return cls("POWER_COSH", theta=theta, p=float(p))

    @classmethod
    def table(cls, s, values):
        return cls("TABLE", table_s=tuple(map(float, s)), table_v=tuple(map(float, values)))

    def at_theta(self, theta: float) -> "MultiplierSpec":
        if self.family in ("UNITARY", "POWER_COSH") and self.theta is None:
            return replace(self, theta=float(theta))
        return self

    def _need_theta(self):
        if self.theta is None:
            raise ValueError(f"{self.family} multiplier needs theta; call at_theta first")
        return self.theta

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.family == "ONE":
            return np.ones_like(s)
        if self.family == "TABLE":
            lo, hi = self.table_s[0], self.table_s[-1]
            return self._spline(np.clip(s, lo, hi))
        th = self._need_theta()
        return (1.0 + 4.0 * th * th * s * s) ** (-0.5 * self.p)

    def derivative(self, s, order: int = 1):
        s = np.asarray(s, dtype=float)
        if self.family == "ONE":
            return np.zeros_like(s)
        if self.family == "TABLE":
            lo, hi = self.table_s[0], self.table_s[-1]
            inside = (s >= lo) & (s <= hi)
            return np.where(inside, self._spline(np.clip(s, lo, hi), order), 0.0)
        h = 1e-3
        if order == 1:
            return (self(s + h) - self(s - h)) / (2 * h)
        if order == 2:
            return (self(s + h) - 2 * self(s) + self(s - h)) / h ** 2
        raise ValueError("derivative orders 1 and 2 only")

    def symbol_bound(self, span: float = 50.0) -> tuple[float, float]:
        """Sampled (C, N) with ``|Theta^(r)(s)| <= C (1 + |s|)^(N - r)``, r <= 2."""
        N = {"ONE": 0.0, "TABLE": 0.0}.get(self.family, -self.p)
        s = np.linspace(-span, span, 4001)
        C = 0.0
        for r in range(3):
            d = np.abs(self(s) if r == 0 else self.derivative(s, r))
            C = max(C, float(np.max(d / (1 + np.abs(s)) ** (N - r))))
        return C, N

    def to_text(self) -> str:
        lines = [f"family={self.family}"]
        if self.theta is not None:
            lines.append(f"theta={self.theta!r}")
        if self.family == "POWER_COSH":
            lines.append(f"p={self.p!r}")
        if self.family == "TABLE":
            lines.append("table_s=" + ",".join(repr(x) for x in self.table_s))
            lines.append("table_v=" + ",".join(repr(x) for x in self.table_v))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MultiplierSpec":
        kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        fam = kv.get("family", "ONE").strip().upper()
        theta = float(kv["theta"]) if "theta" in kv else None
        if fam == "TABLE":
            return cls.table([float(x) for x in kv["table_s"].split(",")],
                             [float(x) for x in kv["table_v"].split(",")])
        return cls(fam, theta=theta, p=float(kv.get("p", 0.5)))

    @classmethod
    def parse(cls, name: str) -> "MultiplierSpec":
        """CLI shorthand: ``one``, ``unitary``, ``power_cosh:<p>``."""
        name = name.strip().lower()
        if name == "one":
            return cls.one()
        if name == "unitary":
            return cls.unitary()
        if name.startswith("power_cosh"):
            _, _, p = name.partition(":")
            return cls.power_cosh(float(p or 0.5))
        raise ValueError(f"unknown multiplier {name!r}")


@dataclass
class FreqFn:
    """Partial Fourier data on the centred alpha lattice of ``spec``."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.spec.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.spec.shape}")

    @property
    def alpha(self) -> np.ndarray:
        return alpha_lattice(self.spec)

    @property
    def dalpha(self) -> float:
        return 2 * np.pi / (self.spec.n_ell * self.spec.dell)

    def norm2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.spec.da * self.dalpha))


def partial_fourier(x, direction: str = "fwd"):
    """``fwd``: GridFn -> FreqFn; ``inv``: FreqFn -> GridFn."""
    if direction == "fwd":
        return FreqFn(x.spec, fourier_ell(x.values, x.spec))
    if direction == "inv":
        return GridFn(x.spec, inverse_fourier_ell(x.values, x.spec))
    raise ValueError(f"direction must be 'fwd' or 'inv', got {direction!r}")


def phi(alpha, theta):
    return np.sinh(2 * theta * alpha) / (2 * theta)


def phi_inv(alpha, theta):
    return np.arcsinh(2 * theta * alpha) / (2 * theta)


def nudft_ell(values: np.ndarray, spec: GridSpec, omega: np.ndarray) -> np.ndarray:
    """``sum_j u(a, l_j) exp(-i omega l_j) dl`` for every row; zero beyond Nyquist."""
    E = np.exp(-1j * np.outer(spec.ell, omega)) * spec.dell
    out = values @ E
    out[..., np.abs(omega) > np.pi / spec.dell] = 0.0
    return out


def _evaluate(F: FreqFn, omega: np.ndarray, method: str) -> np.ndarray:
    if method == "trig":
        return nudft_ell(inverse_fourier_ell(F.values, F.spec), F.spec, omega)
    if method == "spline":
        al = F.alpha
        cs = CubicSpline(al, F.values, axis=1)
        out = cs(omega)
        out[:, (omega < al[0]) | (omega > al[-1])] = 0.0
        return out
    raise ValueError(f"interpolation method must be 'trig' or 'spline', got {method!r}")


def _band_check(F: FreqFn, theta: float, margin: float = 0.05) -> float:
    al = F.alpha
    top = np.abs(F.values).max()
    if top == 0:
        return 0.0
    edge = np.abs(al) >= (1 - margin) * np.abs(al).max()
    mass = float(np.abs(F.values[:, edge]).max() / top)
    if mass > BAND_WARN:
        msg = (f"spectrum is {mass:.2e} of its max at the band edge |alpha|={np.abs(al).max():.3g}; "
               f"sinh-stretched nodes beyond the band are dropped (theta={theta}); "
               f"a finer l-spacing widens the band")
        if mass > BAND_LIMIT:
            raise BandOverflow(msg)
        warnings.warn(msg, BandWarning, stacklevel=4)
    return mass


def twist_pullback(F: FreqFn, theta: float, direction: str = "fwd", method: str = "trig",
                   check_band: bool = True) -> FreqFn:
    """``fwd``: F o phi^-1 ; ``inv``: F o phi."""
    if theta == 0:
        return FreqFn(F.spec, F.values.copy())
    al = F.alpha
    if direction == "fwd":
        om = phi_inv(al, theta)
    elif direction == "inv":
        if check_band:
            _band_check(F, theta)
        om = phi(al, theta)
    else:
        raise ValueError(f"direction must be 'fwd' or 'inv', got {direction!r}")
    return FreqFn(F.spec, _evaluate(F, om, method))


def apply_multiplier(F: FreqFn, m: MultiplierSpec, inverse: bool = False) -> FreqFn:
    th = m(F.alpha)
    if np.min(np.abs(th)) < MULT_FLOOR:
        raise ValueError(f"multiplier value {np.min(np.abs(th)):.2e} below {MULT_FLOOR:.0e} on the alpha lattice")
    return FreqFn(F.spec, F.values / th if inverse else F.values * th)


def zero_pad_ell(u: GridFn, factor: int) -> GridFn:
    if factor == 1:
        return u
    big = u.spec.pad_ell(factor)
    off = (big.n_ell - u.spec.n_ell) // 2
    vals = np.zeros(big.shape, dtype=complex)
    vals[:, off:off + u.spec.n_ell] = u.values
    return GridFn(big, vals)


def crop_ell(u: GridFn, spec: GridSpec) -> GridFn:
    if u.spec == spec:
        return u
    off = (u.spec.n_ell - spec.n_ell) // 2
    return GridFn(spec, u.values[:, off:off + spec.n_ell])


def u_theta(u: GridFn, m: MultiplierSpec, theta: float, direction: str = "fwd",
            oversample: int = 1, method: str = "trig") -> GridFn:
    """Intertwiner ``U = F^-1 M_Theta (phi^-1)^* F`` (``fwd``) or its inverse (``inv``).

    ``oversample`` zero-pads l by that factor before transforming and crops
    afterwards; the twist spreads data in l, so round trips need headroom.
    """
    m = m.at_theta(theta)
    w = zero_pad_ell(u, oversample)
    F = partial_fourier(w, "fwd")
    if direction == "fwd":
        G = apply_multiplier(twist_pullback(F, theta, "fwd", method), m)
    elif direction == "inv":
        G = twist_pullback(apply_multiplier(F, m, inverse=True), theta, "inv", method)
    else:
        raise ValueError(f"direction must be 'fwd' or 'inv', got {direction!r}")
    return crop_ell(partial_fourier(G, "inv"), u.spec)


def xi_from_theta(m: MultiplierSpec, theta: float):
    """``t -> 1 / Theta(sinh(2t) / (2 theta))``."""
    m = m.at_theta(theta)

    def xi(t):
        return 1.0 / m(np.sinh(2 * np.asarray(t, dtype=float)) / (2 * theta))

    return xi
