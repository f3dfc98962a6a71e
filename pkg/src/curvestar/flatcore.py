"""Flat Weyl/Moyal product on the (a, l) plane.

Normalisation: ``a * l - l * a = i*hbar`` and ``u * v = uv + (i hbar/2){u, v} + ...``
with ``{u, v} = u_a v_l - u_l v_a``.  In three-point form this is

    (u * v)(x) = 1/(pi^2 hbar^2) int int exp((i/hbar) flat_area(x, y, z)) u(y) v(z) dy dz

with ``flat_area`` carrying the constant 2.

Two fast evaluators share the mixed (a, alpha) representation

    (u * v)~(a, g) = 1/2pi int u~(a - hbar b/2, g - b) v~(a + hbar (g - b)/2, b) db,

where ``~`` is the partial Fourier transform in l.  Off-grid a-shifts
are done by band-limited (trigonometric) interpolation on a zero-padded
a-axis.  :func:`moyal_oracle` is the brute-force check.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import fft as sfft

from .geometry import FLAT_PHASE_CONSTANT, Point, flat_area

log = logging.getLogger(__name__)

DECAY_TOL = 1e-8


class DecayWarning(UserWarning):
    pass


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic-style lattice: nodes ``x_min + j*h``, ``h = (x_max - x_min)/n``."""

    a_min: float = -4.0
    a_max: float = 4.0
    n_a: int = 256
    ell_min: float = -4.0
    ell_max: float = 4.0
    n_ell: int = 256

    def __post_init__(self):
        if not self.a_min < self.a_max or not self.ell_min < self.ell_max:
            raise ValueError("grid bounds must satisfy min < max")
        for n in (self.n_a, self.n_ell):
            if n < 16 or not _is_pow2(n):
                raise ValueError(f"grid sizes must be powers of two >= 16, got {n}")

    @property
    def da(self) -> float:
        return (self.a_max - self.a_min) / self.n_a

    @property
    def dell(self) -> float:
        return (self.ell_max - self.ell_min) / self.n_ell

    @property
    def a(self) -> np.ndarray:
        return self.a_min + self.da * np.arange(self.n_a)

    @property
    def ell(self) -> np.ndarray:
        return self.ell_min + self.dell * np.arange(self.n_ell)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_a, self.n_ell)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.a, self.ell, indexing="ij")

    def pad_ell(self, factor: int) -> "GridSpec":
        """Same spacing, l-range enlarged ``factor`` times about its centre."""
        if factor == 1:
            return self
        extra = (factor - 1) * self.n_ell // 2
        return GridSpec(self.a_min, self.a_max, self.n_a,
                        self.ell_min - extra * self.dell, self.ell_max + extra * self.dell,
                        factor * self.n_ell)

    def nearest_index(self, p: Point) -> tuple[int, int]:
        i = int(round((float(p.a) - self.a_min) / self.da))
        j = int(round((float(p.ell) - self.ell_min) / self.dell))
        return i, j

    def contains(self, p: Point) -> bool:
        return self.a_min <= p.a < self.a_max and self.ell_min <= p.ell < self.ell_max

    def to_dict(self) -> dict[str, str]:
        return {"n_a": str(self.n_a), "n_ell": str(self.n_ell),
                "a_min": repr(self.a_min), "a_max": repr(self.a_max),
                "ell_min": repr(self.ell_min), "ell_max": repr(self.ell_max)}


@dataclass
class GridFn:
    """Complex samples on a :class:`GridSpec`, row-major in a."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.spec.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.spec.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("GridFn values must be finite")

    @classmethod
    def from_function(cls, spec: GridSpec, f) -> "GridFn":
        A, L = spec.mesh()
        return cls(spec, np.broadcast_to(f(A, L), spec.shape))

    def integral(self) -> complex:
        return complex(self.values.sum() * self.spec.da * self.spec.dell)

    def norm2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.spec.da * self.spec.dell))

    def conj(self) -> "GridFn":
        return GridFn(self.spec, self.values.conj())

    def boundary_mass(self, width: int = 2) -> float:
        """Max |value| on the outer frame of ``width`` nodes, relative to the max."""
        v = np.abs(self.values)
        top = v.max()
        if top == 0:
            return 0.0
        frame = np.concatenate([v[:width].ravel(), v[-width:].ravel(), v[:, :width].ravel(), v[:, -width:].ravel()])
        return float(frame.max() / top)

    def at(self, p: Point) -> complex:
        """Value at the nearest grid node."""
        i, j = self.spec.nearest_index(p)
        return complex(self.values[i, j])

    def __add__(self, other):
        return GridFn(self.spec, self.values + _vals(other))

    def __sub__(self, other):
        return GridFn(self.spec, self.values - _vals(other))

    def __mul__(self, other):
        return GridFn(self.spec, self.values * _vals(other))

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, GridFn) else x


def check_decay(u: GridFn, name: str = "input", tol: float = DECAY_TOL) -> float:
    m = u.boundary_mass()
    if m > tol:
        warnings.warn(f"{name} does not decay on the boundary frame: relative boundary mass {m:.3e} > {tol:.0e}",
                      DecayWarning, stacklevel=3)
    return m


# -- windowing ---------------------------------------------------------------

def _taper(t):
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)


def window_1d(x: np.ndarray, lo: float, hi: float, flat: float = 0.7) -> np.ndarray:
    """C^2 bump: 1 on the central ``flat`` fraction of [lo, hi], 0 at the ends."""
    c = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    inner = flat * half
    r = np.abs(x - c)
    return _taper((half - r) / (half - inner))


def window(spec: GridSpec, flat: float = 0.7) -> np.ndarray:
    wa = window_1d(spec.a, spec.a_min, spec.a_max, flat)
    wl = window_1d(spec.ell, spec.ell_min, spec.ell_max, flat)
    return np.outer(wa, wl)


# -- partial Fourier in l (shared with transforms) -----------------------------

def diff4(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """4th-order central difference along ``axis``; the two outer nodes each side are 2nd order."""
    g = np.gradient(f, h, axis=axis, edge_order=2)
    f = np.moveaxis(f, axis, 0)
    g = np.moveaxis(g, axis, 0).copy()
    g[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)
    return np.moveaxis(g, 0, axis)


def alpha_lattice(spec: GridSpec) -> np.ndarray:
    return 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(spec.n_ell, spec.dell))


def fourier_ell(values: np.ndarray, spec: GridSpec) -> np.ndarray:
    """``int exp(-i alpha l) u(a, l) dl`` on the centred alpha lattice."""
    alpha = alpha_lattice(spec)
    F = np.fft.fftshift(np.fft.fft(values, axis=1), axes=1) * spec.dell
    return F * np.exp(-1j * alpha * spec.ell_min)


def inverse_fourier_ell(F: np.ndarray, spec: GridSpec) -> np.ndarray:
    alpha = alpha_lattice(spec)
    G = np.fft.ifftshift(F * np.exp(1j * alpha * spec.ell_min), axes=1)
    return np.fft.ifft(G, axis=1) / spec.dell


# -- Moyal product -------------------------------------------------------------

_SIG = 1e-15


def _significant(F: np.ndarray) -> np.ndarray:
    col = np.abs(F).max(axis=0)
    top = col.max()
    return col > _SIG * top if top > 0 else np.zeros_like(col, dtype=bool)


def _a_padding(spec: GridSpec, hbar: float, alphas: np.ndarray) -> int:
    shift = 0.5 * abs(hbar) * (np.abs(alphas).max() if alphas.size else 0.0)
    extra = int(np.ceil(shift / spec.da)) + 4
    return sfft.next_fast_len(spec.n_a + 2 * extra)


class _PaddedA:
    """a-axis FFT data on a zero-padded lattice for band-limited shifts."""

    def __init__(self, F: np.ndarray, spec: GridSpec, N: int):
        self.N = N
        self.off = (N - spec.n_a) // 2
        self.a0 = spec.a_min - self.off * spec.da
        self.h = spec.da
        P = np.zeros((N, F.shape[1]), dtype=complex)
        P[self.off:self.off + spec.n_a] = F
        self.hat = sfft.fft(P, axis=0)
        self.p = 2 * np.pi * np.fft.fftfreq(N, spec.da)

    def shifted(self, shift: float) -> np.ndarray:
        """All columns re-sampled at ``a - shift`` on the padded lattice."""
        return sfft.ifft(self.hat * np.exp(-1j * self.p * shift)[:, None], axis=0)

    def interp_matrix(self, x: np.ndarray) -> np.ndarray:
        return np.exp(1j * np.outer(x - self.a0, self.p)) / self.N


def moyal_grid(u: GridFn, v: GridFn, hbar: float) -> GridFn:
    """Full-grid Moyal product ``u * v`` with deformation parameter ``hbar``."""
    if u.spec != v.spec:
        raise ValueError("u and v must share a grid")
    if hbar == 0:
        raise ValueError("hbar must be nonzero")
    spec = u.spec
    n = spec.n_ell
    alpha = alpha_lattice(spec)
    dal = alpha[1] - alpha[0]
    Fu = fourier_ell(u.values, spec)
    Fv = fourier_ell(v.values, spec)
    su, sv = _significant(Fu), _significant(Fv)
    N = _a_padding(spec, hbar, alpha[su | sv])
    pu = _PaddedA(Fu, spec, N)
    pv = _PaddedA(Fv, spec, N)
    out = np.zeros((N, n), dtype=complex)
    c = n // 2
    for k in np.flatnonzero(sv):
        b = alpha[k]
        A = pu.shifted(hbar * b / 2)  # u~(a - hbar b/2, .)
        sh = k - c
        Ar = np.zeros_like(A)
        if sh >= 0:
            Ar[:, sh:] = A[:, :n - sh]
        else:
            Ar[:, :n + sh] = A[:, -sh:]
        live = np.abs(Ar).max(axis=0) > 0
        if not live.any():
            continue
        # v~(a + hbar (g - b)/2, b) for every output frequency g
        ph = np.exp(1j * np.outer(pv.p, hbar * (alpha[live] - b) / 2))
        B = sfft.ifft(pv.hat[:, k][:, None] * ph, axis=0)
        out[:, live] += Ar[:, live] * B
    out *= dal / (2 * np.pi)
    res = out[pu.off:pu.off + spec.n_a]
    return GridFn(spec, inverse_fourier_ell(res, spec))


def moyal_product(u: GridFn, v: GridFn, theta: float, probes: Sequence[Point],
                  windowed: bool = True) -> np.ndarray:
    """Weyl product values ``(u * v)(x)`` at probe points, hbar = ``theta``.

    Evaluates the double alpha-integral per probe with band-limited
    interpolation of the partial Fourier data in a.
    """
    if theta == 0:
        raise ValueError("theta must be nonzero")
    if u.spec != v.spec:
        raise ValueError("u and v must share a grid")
    spec = u.spec
    uw, vw = (_apply_window(u), _apply_window(v)) if windowed else (u, v)
    check_decay(uw, "u")
    check_decay(vw, "v")
    hbar = theta
    alpha = alpha_lattice(spec)
    dal = alpha[1] - alpha[0]
    Fu = fourier_ell(uw.values, spec)
    Fv = fourier_ell(vw.values, spec)
    i1, i2 = _significant(Fu), _significant(Fv)
    al1, al2 = alpha[i1], alpha[i2]
    N = _a_padding(spec, hbar, np.concatenate([al1, al2]))
    pu = _PaddedA(Fu[:, i1], spec, N)
    pv = _PaddedA(Fv[:, i2], spec, N)
    out = np.empty(len(probes), dtype=complex)
    for q, x in enumerate(probes):
        if not spec.contains(x):
            raise ValueError(f"probe {x} outside the grid box")
        F1 = pu.interp_matrix(x.a - hbar * al2 / 2) @ pu.hat      # [alpha2, alpha1]
        G1 = pv.interp_matrix(x.a + hbar * al1 / 2) @ pv.hat      # [alpha1, alpha2]
        ph = np.exp(1j * np.add.outer(al1, al2) * x.ell)
        out[q] = np.sum(ph * F1.T * G1) * (dal / (2 * np.pi)) ** 2
    return out


def _apply_window(u: GridFn) -> GridFn:
    return GridFn(u.spec, u.values * window(u.spec))


ORACLE_MAX_N = 64


def moyal_oracle(u: GridFn, v: GridFn, theta: float, probe: Point,
                 phase_constant: float = FLAT_PHASE_CONSTANT, prefactor: float | None = None,
                 windowed: bool = True) -> complex:
    """Direct O(n^4) trapezoidal quadrature of the three-point formula at one probe.

    ``prefactor`` defaults to the Weyl normalisation ``c^2/(4 pi^2 theta^2)``.
    """
    spec = u.spec
    if max(spec.n_a, spec.n_ell) > ORACLE_MAX_N:
        raise ValueError(f"oracle limited to grids with n <= {ORACLE_MAX_N}, got {spec.shape}")
    if theta == 0:
        raise ValueError("theta must be nonzero")
    uw, vw = (_apply_window(u), _apply_window(v)) if windowed else (u, v)
    if prefactor is None:
        prefactor = phase_constant ** 2 / (4 * np.pi ** 2 * theta ** 2)
    A, L = spec.mesh()
    y = (A.ravel(), L.ravel())
    x = (float(probe.a), float(probe.ell))
    # S(x,y,z) = c (x^y + y^z + z^x); the z-sum is a matrix product, chunked over y
    k = phase_constant / theta
    uy = uw.values.ravel()
    vz = vw.values.ravel()
    zx = y[0] * x[1] - y[1] * x[0]
    vz_ph = vz * np.exp(1j * k * zx)
    val = 0.0 + 0.0j
    for s in range(0, y[0].size, 512):
        ya, yl = y[0][s:s + 512], y[1][s:s + 512]
        xy = x[0] * yl - x[1] * ya
        yz = np.outer(ya, y[1]) - np.outer(yl, y[0])
        val += np.sum(uy[s:s + 512] * np.exp(1j * k * xy) * (np.exp(1j * k * yz) @ vz_ph))
    w = spec.da * spec.dell
    val *= w * w
    return complex(prefactor * val)


def calibrate_flat_phase(theta: float = 0.5, n: int = 32, box: float = 3.0) -> dict[str, float]:
    """Recover the area constant and prefactor of the three-point Weyl kernel.

    The fast evaluators are normalised by ``a * l - l * a = i theta``.  The
    constant c of ``flat_area`` is the minimiser of the oracle/fast mismatch
    on a Gaussian pair; the prefactor coefficient ``theta^2 * prefactor``
    follows from the ratio at that c.
    """
    from scipy.optimize import minimize_scalar

    spec = GridSpec(-box, box, n, -box, box, n)
    u = gaussian(spec, 0.2, -0.1, 0.6, 0.5)
    v = gaussian(spec, -0.15, 0.2, 0.5, 0.7, phase=0.5)
    probes = [Point(0.0, 0.0), Point(0.5, -0.25), Point(-0.25, 0.5)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DecayWarning)
        ref = moyal_product(u, v, theta, probes)

    def raw(c):
        return np.array([moyal_oracle(u, v, theta, p, c, prefactor=1.0) for p in probes])

    def mismatch(c):
        r = raw(c) * c ** 2 / (4 * np.pi ** 2 * theta ** 2)
        return float(np.sum(np.abs(r - ref) ** 2) / np.sum(np.abs(ref) ** 2))

    c = minimize_scalar(mismatch, bounds=(0.5, 4.0), method="bounded",
                        options={"xatol": 1e-10}).x
    r = raw(c)
    coef = float(np.real(np.mean(ref / r)) * theta ** 2)
    resid = float(np.max(np.abs(r * coef / theta ** 2 - ref) / np.abs(ref)))
    return {"phase_constant": float(c), "prefactor_coefficient": coef, "residual": resid}


# -- file formats --------------------------------------------------------------

ENCODING = "f64le-interleaved"


def write_gridfn(path, u: GridFn, extra: dict[str, str] | None = None) -> None:
    """Text header of ``key=value`` lines, a blank line, then raw (re, im) float64 LE pairs."""
    meta = u.spec.to_dict()
    meta["encoding"] = ENCODING
    if extra:
        meta.update(extra)
    head = "".join(f"{k}={v}\n" for k, v in meta.items()) + "\n"
    data = np.empty(u.values.size * 2, dtype="<f8")
    flat = u.values.ravel(order="C")
    data[0::2] = flat.real
    data[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(head.encode("ascii"))
        fh.write(data.tobytes())


def read_gridfn(path) -> GridFn:
    raw = Path(path).read_bytes()
    end = raw.find(b"\n\n")
    if end < 0:
        raise ValueError(f"{path}: missing header terminator")
    meta = dict(line.split("=", 1) for line in raw[:end].decode("ascii").splitlines() if line)
    if meta.get("encoding") != ENCODING:
        raise ValueError(f"{path}: unsupported encoding {meta.get('encoding')!r}")
    spec = GridSpec(float(meta["a_min"]), float(meta["a_max"]), int(meta["n_a"]),
                    float(meta["ell_min"]), float(meta["ell_max"]), int(meta["n_ell"]))
    data = np.frombuffer(raw[end + 2:], dtype="<f8")
    if data.size != 2 * spec.n_a * spec.n_ell:
        raise ValueError(f"{path}: expected {2 * spec.n_a * spec.n_ell} floats, found {data.size}")
    vals = (data[0::2] + 1j * data[1::2]).reshape(spec.shape)
    return GridFn(spec, vals)


def write_probe_csv(path, probes: Iterable[Point], values: Iterable[complex],
                    comments: Sequence[str] = ()) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append("probe_a,probe_ell,re,im")
    for p, z in zip(probes, values):
        z = complex(z)
        lines.append(f"{float(p.a)!r},{float(p.ell)!r},{z.real!r},{z.imag!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_probes(path) -> list[Point]:
    """Read probe points from a CSV with ``probe_a,probe_ell`` (or ``a,ell``) columns."""
    pts = []
    header = None
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None and not _is_number(cells[0]):
            header = cells
            continue
        if header:
            ia = header.index("probe_a") if "probe_a" in header else header.index("a")
            il = header.index("probe_ell") if "probe_ell" in header else header.index("ell")
        else:
            ia, il = 0, 1
        pts.append(Point(float(cells[ia]), float(cells[il])))
    return pts


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def gaussian(spec: GridSpec, a0=0.0, l0=0.0, sa=0.6, sl=0.6, phase: float = 0.0) -> GridFn:
    """Gaussian bump, optionally with a plane-wave factor ``exp(i phase l)``."""
    A, L = spec.mesh()
    return GridFn(spec, np.exp(-(A - a0) ** 2 / (2 * sa ** 2) - (L - l0) ** 2 / (2 * sl ** 2) + 1j * phase * L))
