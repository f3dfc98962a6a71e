"""Left-invariant operators on S, the hyperbolic Laplacian, weights and the
oscillatory integral over S x S.

Generators in the (a, l) chart: ``Ht = d/da - 2 l d/dl`` and ``Et = d/dl``.
Operators are words in ``(generator, slot)`` with real coefficients; slot 0
acts on (a1, l1), slot 1 on (a2, l2).  They can be applied

* exactly, to sympy expressions (optionally conjugated by a phase),
* by 4th-order central differences, to vectorised callables or to GridFns.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from .flatcore import GridFn, GridSpec, diff4
from .geometry import ORIGIN, Point, jac_phi
from .transforms import MultiplierSpec, nudft_ell, xi_from_theta

a1, l1, a2, l2 = sp.symbols("a1 l1 a2 l2", real=True)
SLOTS = ((a1, l1), (a2, l2))
K = sp.Symbol("k", real=True)   # phase scale: the exponent is i k S_can2

S_CAN2 = sp.sinh(2 * a1) * l2 - sp.sinh(2 * a2) * l1

FD_STEP = 1e-2


# -- operators ---------------------------------------------------------------

@dataclass(frozen=True)
class LeftInvOp:
    """Sum of ``coef * X_1 X_2 ... X_k`` with ``X_i`` in {H, E} x {slot 0, 1}.

    The rightmost letter of a word acts first.
    """

    terms: tuple = ()

    @classmethod
    def gen(cls, name: str, slot: int = 0) -> "LeftInvOp":
        if name not in ("H", "E") or slot not in (0, 1):
            raise ValueError(f"unknown generator {name!r} in slot {slot}")
        return cls(((1.0, ((name, slot),)),))

    @classmethod
    def const(cls, c: float) -> "LeftInvOp":
        return cls(((float(c), ()),))

    def _simplify(self):
        acc: dict = {}
        for c, w in self.terms:
            acc[w] = acc.get(w, 0.0) + c
        return LeftInvOp(tuple((c, w) for w, c in sorted(acc.items(), key=lambda kv: (len(kv[0]), kv[0])) if c != 0))

    def __add__(self, other):
        other = other if isinstance(other, LeftInvOp) else LeftInvOp.const(other)
        return LeftInvOp(self.terms + other.terms)._simplify()

    __radd__ = __add__

    def __neg__(self):
        return LeftInvOp(tuple((-c, w) for c, w in self.terms))

    def __sub__(self, other):
        return self + (-other if isinstance(other, LeftInvOp) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, LeftInvOp):
            return LeftInvOp(tuple((c1 * c2, w1 + w2) for c1, w1 in self.terms for c2, w2 in other.terms))._simplify()
        return LeftInvOp(tuple((c * float(other), w) for c, w in self.terms))._simplify()

    def __rmul__(self, other):
        return self * other

    @property
    def order(self) -> int:
        return max((len(w) for _, w in self.terms), default=0)

    def transpose(self) -> "LeftInvOp":
        """Formal transpose for ``da dl`` on each factor: ``H -> -H + 2``, ``E -> -E``."""
        out = LeftInvOp()
        for c, w in self.terms:
            t = LeftInvOp.const(c)
            for name, slot in reversed(w):
                g = LeftInvOp.gen(name, slot)
                t = t * (-g + 2.0 if name == "H" else -g)
            out = out + t
        return out


Ht, Et = LeftInvOp.gen("H"), LeftInvOp.gen("E")


def laplacian(slot: int = 0) -> LeftInvOp:
    H, E = LeftInvOp.gen("H", slot), LeftInvOp.gen("E", slot)
    return 2.0 * (H * H + E * E - 2.0 * H)


def bilaplacian() -> LeftInvOp:
    return laplacian(0) + laplacian(1)


def b_tilde(alpha: float, beta: float, gamma: float, slot: int = 0) -> LeftInvOp:
    H, E = LeftInvOp.gen("H", slot), LeftInvOp.gen("E", slot)
    return alpha * H * H + beta * E * E + 0.5 * gamma * (E * H + H * E) - 2 * alpha * H - gamma * E


# -- application ---------------------------------------------------------------

def _sym_gen(name, slot, f, phase):
    a, l = SLOTS[slot]
    if name == "H":
        out = sp.diff(f, a) - 2 * l * sp.diff(f, l)
        dphi = sp.diff(phase, a) - 2 * l * sp.diff(phase, l) if phase is not None else 0
    else:
        out = sp.diff(f, l)
        dphi = sp.diff(phase, l) if phase is not None else 0
    return out + sp.I * dphi * f


def _fd_gen(name, slot, f, h, nvars):
    ia, il = 2 * slot, 2 * slot + 1
    if ia >= nvars:
        raise ValueError(f"slot {slot} needs a function of {2 * slot + 2} variables")

    def shifted(x, i, s):
        y = list(x)
        y[i] = y[i] + s
        return f(*y)

    def d(x, i):
        return (-shifted(x, i, 2 * h) + 8 * shifted(x, i, h) - 8 * shifted(x, i, -h) + shifted(x, i, -2 * h)) / (12 * h)

    if name == "H":
        return lambda *x: d(x, ia) - 2 * x[il] * d(x, il)
    return lambda *x: d(x, il)


def _grid_gen(name, values, spec):
    da = diff4(values, 0, spec.da)
    if name == "E":
        return diff4(values, 1, spec.dell)
    L = spec.ell[None, :]
    return da - 2 * L * diff4(values, 1, spec.dell)


def lvf_apply(op: LeftInvOp, f, phase=None, h: float = FD_STEP, nvars: int | None = None):
    """Apply ``op`` to a sympy expression, a vectorised callable or a GridFn.

    ``phase`` (sympy path only) returns ``exp(-i phase) op (exp(i phase) f)``.
    """
    if isinstance(f, GridFn):
        if phase is not None:
            raise ValueError("conjugation by a phase is only supported on closed forms")
        if any(s != 0 for _, w in op.terms for _, s in w):
            raise ValueError("GridFn inputs are functions on S; slot 1 is not available")
        out = np.zeros_like(f.values)
        for c, w in op.terms:
            g = f.values
            for name, _ in reversed(w):
                g = _grid_gen(name, g, f.spec)
            out = out + c * g
        return GridFn(f.spec, out)
    if isinstance(f, (sp.Expr, int, float)):
        f = sp.sympify(f)
        out = sp.Integer(0)
        for c, w in op.terms:
            g = f
            for name, slot in reversed(w):
                g = _sym_gen(name, slot, g, phase)
            out = out + sp.nsimplify(c) * g
        return out
    if callable(f):
        nv = nvars if nvars is not None else (4 if any(s == 1 for _, w in op.terms for _, s in w) else 2)
        parts = []
        for c, w in op.terms:
            g = f
            for name, slot in reversed(w):
                g = _fd_gen(name, slot, g, h, nv)
            parts.append((c, g))

        def out(*x):
            return sum(c * g(*x) for c, g in parts)
        return out
    raise TypeError(f"unsupported input type {type(f).__name__}")


# -- transpose identities ----------------------------------------------------------

def _test_function(rng):
    c = rng.normal(size=3)
    a0, b0 = rng.uniform(-0.5, 0.5, 2)
    s = rng.uniform(0.6, 1.0)
    return (1 + c[0] * a1 + c[1] * l1 + c[2] * a1 * l1) * sp.exp(-((a1 - a0) ** 2 + (l1 - b0) ** 2) / (2 * s ** 2))


def transpose_check(op: LeftInvOp, n_pairs: int = 4, seed: int = 0, box: float = 8.0, n: int = 321,
                    transpose: LeftInvOp | None = None) -> dict:
    """``int (op f) g - int f (op^T g)`` over random Gaussian test pairs on S."""
    rng = np.random.default_rng(seed)
    tr = op.transpose() if transpose is None else transpose
    x = np.linspace(-box, box, n)
    h = x[1] - x[0]
    A, L = np.meshgrid(x, x, indexing="ij")
    worst, worst_abs = 0.0, 0.0
    for _ in range(n_pairs):
        f, g = _test_function(rng), _test_function(rng)
        Of = sp.lambdify((a1, l1), lvf_apply(op, f), "numpy")
        Tg = sp.lambdify((a1, l1), lvf_apply(tr, g), "numpy")
        fn = sp.lambdify((a1, l1), f, "numpy")
        gn = sp.lambdify((a1, l1), g, "numpy")
        lhs = np.sum(Of(A, L) * gn(A, L)) * h * h
        rhs = np.sum(fn(A, L) * Tg(A, L)) * h * h
        scale = np.sum(np.abs(Of(A, L) * gn(A, L))) * h * h + 1e-300
        worst = max(worst, abs(lhs - rhs) / scale)
        worst_abs = max(worst_abs, abs(lhs - rhs))
    return {"residual": float(worst), "residual_abs": float(worst_abs), "pairs": n_pairs, "seed": seed}


# -- canonical phase and Q-forms -------------------------------------------------------

def _A(g1a, g2a):
    return (np.cosh(4 * g2a), np.sinh(2 * (g1a + g2a)), np.cosh(4 * g1a))


def q_forms_eval(g1: Point, g2: Point) -> dict:
    """The printed Q4, Q2, Q3, c and the 2x2 matrix A, evaluated verbatim."""
    x1, y1, x2, y2 = g1.a, g1.ell, g2.a, g2.ell
    ch, sh = np.cosh, np.sinh
    A11, A12, A22 = _A(x1, x2)
    quad = A11 * y1 ** 2 + 2 * A12 * y1 * y2 + A22 * y2 ** 2
    Q4 = 128 * quad ** 2
    Q2 = (y2 ** 2 * (528 - 2752 * ch(4 * x1) + 16 * ch(8 * x1) + 16 * ch(4 * (x1 - x2))
                     + 16 * ch(4 * (x1 + x2)) + 896 * sh(4 * x1))
          + y1 ** 2 * (528 + 16 * ch(4 * (x1 - x2)) - 2752 * ch(4 * x2) + 16 * ch(8 * x2)
                       + 16 * ch(4 * (x1 + x2)) + 896 * sh(4 * x2))
          + y1 * y2 * (-1024 * ch(2 * (x1 - x2)) + 3328 * ch(2 * (x1 + x2)) - 3968 * sh(2 * (x1 + x2))
                       + 32 * sh(2 * (3 * x1 + x2)) + 32 * sh(2 * (x1 + 3 * x2))))
    Q3 = (y2 ** 3 * (128 * ch(2 * x1) + 128 * ch(6 * x1) + 384 * sh(2 * x1) - 896 * sh(6 * x1))
          + y1 ** 3 * (-128 * ch(2 * x2) - 128 * ch(6 * x2) - 384 * sh(2 * x2) + 896 * sh(6 * x2))
          + y1 * (16 * ch(4 * x1 - 2 * x2) + 880 * ch(2 * x2) - 16 * ch(6 * x2) - 112 * ch(2 * (2 * x1 + x2))
                  - 48 * sh(4 * x1 - 2 * x2) - 1552 * sh(2 * x2) + 144 * sh(6 * x2) + 48 * sh(2 * (2 * x1 + x2)))
          + y1 * y2 ** 2 * (-128 * ch(4 * x1 - 2 * x2) + 768 * ch(2 * x2) - 1920 * ch(2 * (2 * x1 + x2))
                            - 384 * sh(4 * x1 - 2 * x2) + 256 * sh(2 * x2) + 1152 * sh(2 * (2 * x1 + x2)))
          + y2 * (-880 * ch(2 * x1) + 16 * ch(6 * x1) - 16 * ch(2 * (x1 - 2 * x2)) + 112 * ch(2 * (x1 + 2 * x2))
                  + 1552 * sh(2 * x1) - 144 * sh(6 * x1) - 48 * sh(2 * (x1 - 2 * x2)) - 48 * sh(2 * (x1 + 2 * x2)))
          + y1 ** 2 * y2 * (-768 * ch(2 * x1) + 128 * ch(2 * (x1 - 2 * x2)) + 1920 * ch(2 * (x1 + 2 * x2))
                            - 256 * sh(2 * x1) - 384 * sh(2 * (x1 - 2 * x2)) - 1152 * sh(2 * (x1 + 2 * x2))))
    c = (202 - 232 * ch(4 * x1) + ch(8 * x1) + 2 * ch(4 * (x1 - x2)) - 232 * ch(4 * x2)
         + ch(8 * x2) + 2 * ch(4 * (x1 + x2)) + 64 * sh(4 * x1) + 64 * sh(4 * x2))
    A = np.array([[A11, A12], [A12, A22]])
    return {"Q4": Q4, "Q2": Q2, "Q3": Q3, "c": c, "A": A}


@functools.lru_cache(maxsize=None)
def _exact_symbol():
    """``exp(-i k S) Bilap^2 exp(i k S)`` split by degree in (l1, l2)."""
    D = bilaplacian()
    m = sp.expand(lvf_apply(D * D, sp.Integer(1), phase=K * S_CAN2))
    P = sp.Poly(m, l1, l2)
    parts = {"Q4": 0, "Q2": 0, "c": 0, "Q3": 0}
    for (i, j), coef in P.terms():
        mon = coef * l1 ** i * l2 ** j
        deg = i + j
        if deg % 2:
            parts["Q3"] += sp.expand(mon / sp.I)
        elif deg == 4:
            parts["Q4"] += mon
        elif deg == 2:
            parts["Q2"] += mon
        else:
            parts["c"] += mon
    return m, parts


@functools.lru_cache(maxsize=None)
def exact_forms() -> dict:
    """Numeric callables ``f(a1, l1, a2, l2, k)`` for the exact symbol and its parts."""
    m, parts = _exact_symbol()
    args = (a1, l1, a2, l2, K)
    out = {name: sp.lambdify(args, expr, "numpy") for name, expr in parts.items()}
    out["m"] = sp.lambdify(args, m, "numpy")
    return out


def exact_eval(g1: Point, g2: Point, k: float = 1.0) -> dict:
    f = exact_forms()
    z = np.zeros(np.broadcast(g1.a, g1.ell, g2.a, g2.ell).shape)
    return {name: fn(g1.a, g1.ell, g2.a, g2.ell, k) + z for name, fn in f.items()}


def exact_quadratic(a1v, a2v, k: float = 1.0):
    """Matrices (A4, B) with Q4 = (l^T A4 l)^2 scale folded in, and Q2 = l^T B l."""
    f = exact_forms()
    q2 = f["Q2"]
    b11 = q2(a1v, 1.0, a2v, 0.0, k)
    b22 = q2(a1v, 0.0, a2v, 1.0, k)
    b12 = 0.5 * (q2(a1v, 1.0, a2v, 1.0, k) - b11 - b22)
    A11, A12, A22 = _A(np.asarray(a1v, float), np.asarray(a2v, float))
    return np.array([[A11, A12], [A12, A22]]), np.array([[b11, b12], [b12, b22]])


def q4_factor(k: float = 1.0) -> float:
    """``Q4_exact / (l^T A l)^2``, measured at a reference point."""
    g1, g2 = Point(0.3, 0.7), Point(-0.2, 0.4)
    A11, A12, A22 = _A(g1.a, g2.a)
    quad = A11 * g1.ell ** 2 + 2 * A12 * g1.ell * g2.ell + A22 * g2.ell ** 2
    return float(exact_forms()["Q4"](g1.a, g1.ell, g2.a, g2.ell, k) / quad ** 2)


def _fd_symbol(k: float, h: float):
    D = bilaplacian()
    D2 = D * D

    def e(x1, y1, x2, y2):
        return np.exp(1j * k * (np.sinh(2 * x1) * y2 - np.sinh(2 * x2) * y1))

    g = lvf_apply(D2, e, h=h, nvars=4)
    return lambda x1, y1, x2, y2: g(x1, y1, x2, y2) / e(x1, y1, x2, y2)


def laplacian_identity_check(samples: Sequence[tuple[Point, Point]], k: float = 1.0, h: float = 2e-2) -> dict:
    """Exact bi-Laplacian symbol vs finite differences vs the printed polynomials.

    The difference oracle is Richardson-extrapolated from steps h and h/2.
    """
    g1 = Point(np.array([s[0].a for s in samples], float), np.array([s[0].ell for s in samples], float))
    g2 = Point(np.array([s[1].a for s in samples], float), np.array([s[1].ell for s in samples], float))
    ex = exact_eval(g1, g2, k)
    coarse = _fd_symbol(k, h)(g1.a, g1.ell, g2.a, g2.ell)
    fine = _fd_symbol(k, h / 2)(g1.a, g1.ell, g2.a, g2.ell)
    fd = (16 * fine - coarse) / 15
    scale = np.maximum(np.abs(ex["m"]), 1.0)
    rep = {
        "fd_vs_exact": float(np.max(np.abs(fd - ex["m"]) / scale)),
        "fd_plain_vs_exact": float(np.max(np.abs(fine - ex["m"]) / scale)),
        "exact_decomposition": float(np.max(np.abs(ex["Q4"] + ex["Q2"] + ex["c"] + 1j * ex["Q3"] - ex["m"]) / scale)),
    }
    if k == 1.0:
        pr = q_forms_eval(g1, g2)
        printed = pr["Q4"] + pr["Q2"] + pr["c"] + 1j * pr["Q3"]
        for name in ("Q4", "Q2", "Q3", "c"):
            ref = np.maximum(np.abs(ex[name]), 1.0)
            rep[f"printed_{name}_deviation"] = float(np.max(np.abs(pr[name] - ex[name]) / ref))
        rep["printed_total_deviation"] = float(np.max(np.abs(printed - ex["m"]) / scale))
        ratio = np.vdot(ex["m"], printed) / np.vdot(ex["m"], ex["m"])
        rep["printed_over_exact"] = complex(ratio)
        rep["printed_rescaled_deviation"] = float(np.max(np.abs(printed - ratio * ex["m"]) / scale))
    return rep


# -- weights, regularisation constant, integrability ------------------------------

def quartic_frame(k: float = 1.0):
    """Frame ``T(a1, a2)`` with ``l = T x`` and ``Q4 = |x|^4``, plus ``|det T|``.

    Uses the exact factorisation ``A = V V^T`` with columns
    ``(e^{2a2}, e^{2a1})/sqrt2`` and ``(e^{-2a2}, -e^{-2a1})/sqrt2``, which stays
    well conditioned where A itself is numerically singular.
    """
    s = np.sqrt(q4_factor(k))

    def frame(x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        den = np.sqrt(2.0 * s) * np.cosh(2 * (x1 - x2))
        T = np.empty(x1.shape + (2, 2))
        T[..., 0, 0] = np.exp(-2 * x1) / den
        T[..., 0, 1] = np.exp(2 * x1) / den
        T[..., 1, 0] = np.exp(-2 * x2) / den
        T[..., 1, 1] = -np.exp(2 * x2) / den
        return T, 1.0 / (s * np.cosh(2 * (x1 - x2)))

    return frame


def q2_bounds(x1, x2, k: float = 1.0):
    """Extreme eigenvalues of Q2 in the quartic frame, i.e. the range of beta."""
    _, B = exact_quadratic(x1, x2, k)
    B = np.moveaxis(B, (0, 1), (-2, -1))
    T, _ = quartic_frame(k)(x1, x2)
    ev = np.linalg.eigvalsh(np.swapaxes(T, -1, -2) @ B @ T)
    return ev[..., 0], ev[..., -1]


def regularization_constant(k: float = 1.0, a0: float = 1.0, n: int = 81) -> float:
    """Smallest power of two C with ``beta r + c + C >= 1`` on |a_i| <= a0, r in [0, 1].

    ``beta`` is the least value of Q2 on the unit circle of the quartic frame.
    """
    x = np.linspace(-a0, a0, n)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    bmin, _ = q2_bounds(X1, X2, k)
    c = exact_forms()["c"](X1, 0.0, X2, 0.0, k) + np.zeros_like(X1)
    need = float(np.max(1.0 - c - np.minimum(bmin, 0.0)))
    C = 1.0
    while C < need:
        C *= 2.0
    return C


def m_C(C: float, k: float = 1.0) -> Callable:
    m = exact_forms()["m"]
    return lambda x1, y1, x2, y2: C + m(x1, y1, x2, y2, k)


BASIS_WORDS = tuple(
    w for n in range(3) for w in itertools.product((("H", 0), ("E", 0), ("H", 1), ("E", 1)), repeat=n))


@dataclass
class WeightReport:
    boxes: tuple
    sup_ratios: dict          # word -> list of sup |P.m|/|m| per box
    integrals: list           # integral of amplitude/|m| per box
    increments: list
    converged: bool
    tol: float


def _panels(R_max: int, nodes: int):
    t, w = np.polynomial.legendre.leggauss(nodes)
    pts, wts, owner = [], [], []
    for k in range(-R_max, R_max):
        pts.append(k + 0.5 + 0.5 * t)
        wts.append(0.5 * w)
        owner.append(np.full(nodes, max(abs(k), abs(k + 1))))
    return np.concatenate(pts), np.concatenate(wts), np.concatenate(owner)


def _ell_integral(f, X1, X2, frame, radial, n_r=24, n_phi=16):
    """``int_{R^2} f(l) dl`` at every (a1, a2), in polar coordinates of ``l = T x``."""
    t, w = np.polynomial.legendre.leggauss(n_r)
    t, w = 0.5 * (t + 1), 0.5 * w
    phis = 2 * np.pi * np.arange(n_phi) / n_phi
    if frame is None:
        T = np.broadcast_to(np.eye(2), X1.shape + (2, 2))
        det = np.ones_like(X1)
    else:
        T, det = frame(X1, X2)
    rho = radial(X1, X2) if radial is not None else np.ones_like(X1)
    total = np.zeros(X1.shape)
    for ti, wi in zip(t, w):
        r = rho * ti / (1 - ti)
        jr = rho / (1 - ti) ** 2
        for ph in phis:
            y1 = r * (T[..., 0, 0] * np.cos(ph) + T[..., 0, 1] * np.sin(ph))
            y2 = r * (T[..., 1, 0] * np.cos(ph) + T[..., 1, 1] * np.sin(ph))
            total += wi * (2 * np.pi / n_phi) * r * jr * f(X1, y1, X2, y2)
    return total * det


def weight_diagnostic(m: Callable, boxes: Sequence[int] = (2, 3, 4, 5), amplitude: Callable | None = None,
                      frame: Callable | None = None, radial: Callable | None = None,
                      n_samples: int = 64, seed: int = 0, nodes: int = 6, tol: float = 1e-3,
                      sup_ratios: bool = True, ell_integral: bool = True) -> WeightReport:
    """Derivative sup-ratios of a weight on S x S and convergence of ``int amplitude / |m|``.

    With ``ell_integral=False`` the weight is a function of (a1, a2) only and
    no fibre integration is done.
    """
    rng = np.random.default_rng(seed)
    boxes = tuple(sorted(boxes))
    ratios: dict = {}
    if sup_ratios:
        for w in BASIS_WORDS:
            op = LeftInvOp(((1.0, w),))
            g = lvf_apply(op, m, nvars=4) if w else m
            row = []
            for R in boxes:
                x = rng.uniform(-R, R, size=(4, n_samples))
                mv = m(*x)
                if np.any(np.abs(mv) == 0):
                    raise ZeroDivisionError("weight vanishes at a sample point")
                row.append(float(np.max(np.abs(g(*x)) / np.abs(mv))))
            ratios["".join(f"{n}{s + 1}" for n, s in w) or "1"] = row
    amp = amplitude or (lambda x1, x2: np.ones_like(x1))
    pts, wts, owner = _panels(boxes[-1], nodes)
    X1, X2 = np.meshgrid(pts, pts, indexing="ij")
    W = np.outer(wts, wts)
    own = np.maximum.outer(owner, owner)
    if ell_integral:
        inner = _ell_integral(lambda x1, y1, x2, y2: 1.0 / np.abs(m(x1, y1, x2, y2)), X1, X2, frame, radial)
    else:
        inner = 1.0 / np.abs(m(X1, 0.0, X2, 0.0))
    vals = W * amp(X1, X2) * inner
    integrals = [float(np.sum(vals[own <= R])) for R in boxes]
    inc = [abs(integrals[i] - integrals[i - 1]) / abs(integrals[i]) for i in range(1, len(integrals))]
    return WeightReport(boxes, ratios, integrals, inc, bool(inc and inc[-1] < tol), tol)


def m_C_radial(C: float, k: float = 1.0):
    c = exact_forms()["c"]
    return lambda x1, x2: (np.abs(c(x1, 0.0, x2, 0.0, k)) + C) ** 0.25 + 0.0 * x1


def amplitude_decay_denominator(x1, x2):
    return np.sqrt(np.cosh(2 * (x1 - x2)) * np.cosh(4 * (x1 + x2)) * np.cosh(4 * (x1 - x2)))


# -- amplitudes ----------------------------------------------------------------------

def a_can_amplitude(g1: Point, g2: Point, candidate: str | None = None):
    t = (Point(0.0 * np.asarray(g1.a), 0.0), g1, g2)
    return np.sqrt(jac_phi(t) if candidate is None else jac_phi(t, candidate))


def theta_factor(g1: Point, g2: Point, m: MultiplierSpec, theta: float, floor: float = 1e-12):
    xi = xi_from_theta(m, theta)
    den = xi(np.asarray(g1.a) - np.asarray(g2.a))
    if np.min(np.abs(den)) < floor:
        raise ZeroDivisionError(f"Xi(a1 - a2) below {floor:.0e}")
    return xi(g1.a) * xi(-np.asarray(g2.a)) / den


def theta_factor_sweep(m: MultiplierSpec, theta: float, box: float = 4.0, n: int = 201, h: float = 1e-4) -> dict:
    """Sup of |Theta|, |H1 Theta|, |H2 Theta| on a box (E-derivatives vanish: no l-dependence)."""
    x = np.linspace(-box, box, n)
    X1, X2 = np.meshgrid(x, x, indexing="ij")

    def f(u, v):
        return theta_factor(Point(u, 0.0), Point(v, 0.0), m, theta)

    return {
        "sup": float(np.max(np.abs(f(X1, X2)))),
        "sup_H1": float(np.max(np.abs((f(X1 + h, X2) - f(X1 - h, X2)) / (2 * h)))),
        "sup_H2": float(np.max(np.abs((f(X1, X2 + h) - f(X1, X2 - h)) / (2 * h)))),
        "sup_E": 0.0,
    }


# -- oscillatory integral ----------------------------------------------------------------

def _phase_freqs(A, k):
    return k * np.sinh(2 * A)


def osc_fast(F: Callable, k: float, spec: GridSpec) -> complex:
    """``int exp(i k S_can2) F`` with the l-integrals done as Fourier sums.

    ``F(a1, l1, a2, l2)`` is vectorised; S_can2 is linear in l, so for fixed
    (a1, a2) the fibre integral is F's partial transform at
    ``(k sinh 2a2, -k sinh 2a1)``.
    """
    A, L = spec.a, spec.ell
    w1 = _phase_freqs(A, k)          # frequency for l1 when a2 = A
    E1 = np.exp(-1j * np.outer(w1, L)) * spec.dell      # [a2, l1]
    total = 0.0 + 0.0j
    for i, x1 in enumerate(A):
        blk = F(x1, L[:, None, None], A[None, :, None], L[None, None, :])   # [l1, a2, l2]
        blk = np.broadcast_to(blk, (L.size, A.size, L.size))
        e2 = np.exp(1j * k * np.sinh(2 * x1) * L) * spec.dell             # [l2]
        inner = np.einsum("jkl,kj,l->k", blk, E1, e2)
        total += inner.sum() * spec.da
    return complex(total * spec.da)


def osc_direct(F: Callable, k: float, spec: GridSpec) -> complex:
    """Brute-force 4D trapezoidal sum of ``exp(i k S_can2) F`` (oracle, small grids)."""
    A, L = spec.a, spec.ell
    total = 0.0 + 0.0j
    for x1 in A:
        X1, Y1, X2, Y2 = x1, L[:, None, None], A[None, :, None], L[None, None, :]
        ph = np.exp(1j * k * (np.sinh(2 * X1) * Y2 - np.sinh(2 * X2) * Y1))
        total += np.sum(ph * F(X1, Y1, X2, Y2))
    return complex(total * (spec.da * spec.dell) ** 2)


def _parts_once(F: Callable, k: float, spec: GridSpec, C: float) -> complex:
    pad = 8
    ha, hl = spec.da, spec.dell
    A = spec.a_min + ha * np.arange(-pad, spec.n_a + pad)
    L = spec.ell_min + hl * np.arange(-pad, spec.n_ell + pad)
    X1, Y1, X2, Y2 = np.meshgrid(A, L, A, L, indexing="ij", sparse=True)
    mc = m_C(C, k)
    q = F(X1, Y1, X2, Y2) / mc(X1, Y1, X2, Y2)
    Ls = (Y1, Y2)

    def H(f, s):
        return diff4(f, 2 * s, ha) - 2 * Ls[s] * diff4(f, 2 * s + 1, hl)

    def E(f, s):
        return diff4(f, 2 * s + 1, hl)

    def lap(f, s):
        h1 = H(f, s)
        return 2 * (H(h1, s) + E(E(f, s), s) - 2 * h1)

    def bl(f):
        return lap(f, 0) + lap(f, 1)

    G = C * q + bl(bl(q))
    sl = (slice(pad, -pad),) * 4
    Xs = (X1[sl[0]], Y1[:, sl[1]], X2[:, :, sl[2]], Y2[..., sl[3]])
    ph = np.exp(1j * k * (np.sinh(2 * Xs[0]) * Xs[3] - np.sinh(2 * Xs[2]) * Xs[1]))
    return complex(np.sum(ph * G[sl]) * (ha * hl) ** 2)


# h and h/2 on the same box; a finer level needs ~1 GB per 4D array
PARTS_BOXES = (GridSpec(-1.3, 1.3, 16, -2.6, 2.6, 16), GridSpec(-1.3, 1.3, 32, -2.6, 2.6, 32))


@dataclass
class OscResult:
    value: complex
    path: str
    values: list = field(default_factory=list)
    increments: list = field(default_factory=list)
    C: float | None = None


def osc_parts(F: Callable, k: float, boxes: Sequence[GridSpec], C: float | None = None,
              tol: float = 2e-2) -> OscResult:
    """Integration by parts with P = C + Bilap^2: ``int exp(iS) F = int exp(iS) P(F / m_C)``.

    Derivatives are 4th-order central differences with the step of each box
    grid; boxes are evaluated in order and the last value is returned.
    C defaults to the prescription of :func:`regularization_constant` on the
    largest a-box.
    """
    if C is None:
        a0 = max(max(abs(b.a_min), abs(b.a_max)) for b in boxes)
        C = regularization_constant(k, a0=a0)
    vals = [_parts_once(F, k, b, C) for b in boxes]
    inc = [abs(vals[i] - vals[i - 1]) / abs(vals[i]) for i in range(1, len(vals))]
    if inc and inc[-1] > tol:
        raise ArithmeticError(f"PARTS path did not settle across boxes: last increment {inc[-1]:.2e} > {tol:.0e}")
    return OscResult(vals[-1], "PARTS", vals, inc, C)


def osc_integral(F: Callable, theta: float, path: str = "FAST", spec: GridSpec | None = None,
                 boxes: Sequence[GridSpec] | None = None, phase_scale: float = 1.0,
                 C: float | None = None) -> OscResult:
    """``int_{S x S} exp((i s/theta) S_can2) F`` with s = ``phase_scale``."""
    k = phase_scale / theta
    if path == "FAST":
        spec = spec or GridSpec(-3, 3, 64, -4, 4, 64)
        return OscResult(osc_fast(F, k, spec), "FAST")
    if path == "PARTS":
        boxes = boxes or PARTS_BOXES
        return osc_parts(F, k, boxes, C)
    raise ValueError(f"path must be FAST or PARTS, got {path!r}")


def gaussian_amplitude(center=(0.1, 0.2, -0.05, -0.1), sa: float = 0.3, sl: float = 0.5):
    c = center

    def F(x1, y1, x2, y2):
        return np.exp(-((x1 - c[0]) ** 2 + (x2 - c[2]) ** 2) / (2 * sa ** 2)
                      - ((y1 - c[1]) ** 2 + (y2 - c[3]) ** 2) / (2 * sl ** 2)) + 0j
    return F
