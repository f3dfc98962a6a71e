"""Closed-form geometry of the solvable symmetric surface M = S = ax+b.

Points are written in the global chart (a, ell) of ``exp(aH) exp(ell E)``.
Every function here is vectorised: the fields of a :class:`Point` may be
numpy arrays of a common broadcast shape, and all maps act elementwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np


class Point(NamedTuple):
    a: np.ndarray | float
    ell: np.ndarray | float


Triple = tuple[Point, Point, Point]

ORIGIN = Point(0.0, 0.0)


def as_point(x) -> Point:
    if isinstance(x, Point):
        return x
    a, ell = x
    return Point(a, ell)


def mul(x: Point, y: Point) -> Point:
    """Group law (a, l).(a', l') = (a + a', exp(-2a') l + l')."""
    return Point(x.a + y.a, np.exp(-2.0 * y.a) * x.ell + y.ell)


def inverse(x: Point) -> Point:
    return Point(-x.a, -np.exp(2.0 * x.a) * x.ell)


def symmetry(x: Point, y: Point) -> Point:
    """Geodesic symmetry s_x centred at ``x``, applied to ``y``."""
    return Point(2.0 * x.a - y.a, 2.0 * np.cosh(2.0 * (x.a - y.a)) * x.ell - y.ell)


def midpoint(x: Point, y: Point) -> Point:
    """The unique m with ``symmetry(m, x) == y``.

    The fibre coordinate carries sech(a_x - a_y), which is what the defining
    relation forces for the symmetry map above.
    """
    return Point(0.5 * (x.a + y.a), 0.5 * (x.ell + y.ell) / np.cosh(x.a - y.a))


def half_point(x: Point) -> Point:
    """x/2, i.e. the point whose symmetry sends the origin to ``x``."""
    return midpoint(ORIGIN, x)


def holonomy_act(kappa, x: Point) -> Point:
    """Action of the holonomy group K = R at the origin."""
    return Point(x.a, x.ell - kappa * np.sinh(x.a))


def s_can3(t: Triple):
    """Canonical admissible three-point phase.

    ``1/2 * sum over cyclic (0,1,2) of sinh(2(a0 - a1)) * l2``.
    """
    x0, x1, x2 = t
    return 0.5 * (
        np.sinh(2.0 * (x0.a - x1.a)) * x2.ell
        + np.sinh(2.0 * (x1.a - x2.a)) * x0.ell
        + np.sinh(2.0 * (x2.a - x0.a)) * x1.ell
    )


def s_can2(g1: Point, g2: Point):
    """Two-point phase on S x S; equals ``-2 * s_can3((o, g1, g2))``."""
    return np.sinh(2.0 * g1.a) * g2.ell - np.sinh(2.0 * g2.a) * g1.ell


def wedge(p, q):
    return p[0] * q[1] - p[1] * q[0]


# Fixed by the coordinate commutator [a, l] = i*theta of the flat Weyl product,
# see flatcore.calibrate_flat_phase.
FLAT_PHASE_CONSTANT = 2.0


def flat_area(p0, p1, p2, c: float = FLAT_PHASE_CONSTANT):
    """Signed symplectic area functional ``c (p0^p1 + p1^p2 + p2^p0)``."""
    return c * (wedge(p0, p1) + wedge(p1, p2) + wedge(p2, p0))


def flat_symmetry(x, y):
    """Point reflection of the flat plane centred at ``x``."""
    return (2.0 * x[0] - y[0], 2.0 * x[1] - y[1])


# -- three-point map Phi -----------------------------------------------------

def phi_inverse(t: Triple) -> Triple:
    x, y, z = t
    return (midpoint(x, y), midpoint(y, z), midpoint(z, x))


def phi_forward(t: Triple) -> Triple:
    """Exact inverse of :func:`phi_inverse`.

    The output is ``(t, s_x t, s_y s_x t)`` where ``s_z s_y s_x t = t``; this
    ordering is the one forced by the midpoint form of the inverse.  The a-coordinates
    solve a 3x3 linear system, after which the midpoint relations are linear
    in the fibre coordinates.
    """
    x, y, z = t
    # m(x0,x1)=x, m(x1,x2)=y, m(x2,x0)=z
    a0 = x.a - y.a + z.a
    a1 = x.a + y.a - z.a
    a2 = -x.a + y.a + z.a
    r0 = 2.0 * np.cosh(a0 - a1) * x.ell
    r1 = 2.0 * np.cosh(a1 - a2) * y.ell
    r2 = 2.0 * np.cosh(a2 - a0) * z.ell
    # l0+l1=r0, l1+l2=r1, l2+l0=r2
    l0 = 0.5 * (r0 - r1 + r2)
    l1 = 0.5 * (r0 + r1 - r2)
    l2 = 0.5 * (-r0 + r1 + r2)
    return (Point(a0, l0), Point(a1, l1), Point(a2, l2))


class ConvergenceError(RuntimeError):
    pass


def phi_forward_newton(t: Triple, tol: float = 1e-12, max_iter: int = 50) -> Triple:
    """Cross-check for :func:`phi_forward`: Newton on ``s_x s_y s_z(p) = p``.

    Scalar triples only.
    """
    x, y, z = (Point(float(p.a), float(p.ell)) for p in t)
    p = np.array([x.a, x.ell])

    def residual(v):
        q = symmetry(z, symmetry(y, symmetry(x, Point(*v))))
        return np.array([q.a, q.ell]) - v

    for _ in range(max_iter):
        r = residual(p)
        if np.max(np.abs(r)) < tol:
            break
        h = 1e-7
        J = np.empty((2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            J[:, k] = (residual(p + e) - residual(p - e)) / (2 * h)
        p = p - np.linalg.solve(J, r)
    else:
        raise ConvergenceError(f"no fixed point after {max_iter} iterations; residual {np.max(np.abs(r)):.3e}")
    t0 = Point(p[0], p[1])
    t1 = symmetry(x, t0)
    return (t0, t1, symmetry(y, t1))


def jac_phi_candidates(t: Triple) -> dict[str, np.ndarray]:
    """Both closed-form candidates for |Jac Phi| at the input triple."""
    x0, x1, x2 = t
    d01, d12, d20 = x0.a - x1.a, x1.a - x2.a, x2.a - x0.a
    return {
        "full": 16.0 * np.cosh(2 * d01) * np.cosh(2 * d12) * np.cosh(2 * d20),
        "half": 16.0 * np.cosh(d01) * np.cosh(d12) * np.cosh(d20),
    }


# Selected by select_jacobian_candidate against the numeric Jacobian.
JACOBIAN_CANDIDATE = "full"


def jac_phi(t: Triple, candidate: str = JACOBIAN_CANDIDATE):
    return jac_phi_candidates(t)[candidate]


def _flatten(t: Triple) -> np.ndarray:
    return np.array([c for p in t for c in (p.a, p.ell)], dtype=float)


def _unflatten(v) -> Triple:
    return (Point(v[0], v[1]), Point(v[2], v[3]), Point(v[4], v[5]))


def numeric_jacobian(f: Callable[[Triple], Triple], t: Triple, h: float = 1e-5) -> np.ndarray:
    """6x6 central-difference Jacobian matrix of a map on M^3."""
    v = _flatten(t)
    J = np.empty((6, 6))
    for k in range(6):
        e = np.zeros(6)
        e[k] = h
        J[:, k] = (_flatten(f(_unflatten(v + e))) - _flatten(f(_unflatten(v - e)))) / (2 * h)
    return J


def select_jacobian_candidate(rng: np.random.Generator, n: int = 20, scale: float = 1.0) -> tuple[str, float]:
    """Pick the closed form closest to |det dPhi| on random triples.

    Returns the candidate name and its worst relative error.
    """
    errs: dict[str, float] = {}
    samples = rng.uniform(-scale, scale, size=(n, 6))
    for v in samples:
        t = _unflatten(v)
        ref = abs(np.linalg.det(numeric_jacobian(phi_forward, t)))
        for name, val in jac_phi_candidates(t).items():
            errs[name] = max(errs.get(name, 0.0), abs(val - ref) / ref)
    best = min(errs, key=errs.get)
    return best, errs[best]


# -- cochains ----------------------------------------------------------------

@dataclass(frozen=True)
class Cochain:
    """A k-point function on M."""

    k: int
    eval: Callable[..., complex]

    def __call__(self, *points: Point):
        if len(points) != self.k:
            raise ValueError(f"cochain of arity {self.k} called with {len(points)} points")
        return self.eval(*points)


def coboundary(F: Cochain) -> Cochain:
    """Alternating sum ``dF(x0..xk) = sum_i (-1)^i F(x0, .., ^xi, .., xk)``."""
    if F.k not in (1, 2):
        raise ValueError(f"coboundary is defined here for arity 1 or 2, got {F.k}")

    def dF(*xs):
        total = 0.0
        for i in range(len(xs)):
            total = total + (-1) ** i * F(*(xs[:i] + xs[i + 1:]))
        return total

    return Cochain(F.k + 1, dF)


def diagonal_action(w: Point, *xs: Point) -> tuple[Point, ...]:
    return tuple(symmetry(w, x) for x in xs)


def random_points(rng: np.random.Generator, n: int, scale: float = 1.0) -> Point:
    return Point(rng.uniform(-scale, scale, n), rng.uniform(-scale, scale, n))
