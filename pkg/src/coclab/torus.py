"""The 2-torus and its family of measure-preserving base maps.

Maps come in four variants: linear toral automorphisms, area-preserving
trigonometric-shear perturbations of them, the Chirikov standard map, and
rigid rotations.  All four preserve Lebesgue measure with Jacobian
determinant of absolute value one in closed form, and all four have exact
closed-form inverses.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import InvalidParameterError, UnsupportedOperationError

TWO_PI = 2.0 * math.pi

# Largest shear amplitude accepted at construction.  The shear composition is
# a diffeomorphism for every eps; this bound is the documented range on which
# the hyperbolic cone field of every shipped |trace| > 2 linear part survives
# the perturbation (derivative perturbation per shear is at most 2*pi*eps).
PERTURBATION_EPS_MAX = 0.05

# Safety inflation coefficient for the certified contraction rate of a
# perturbed map: theta_hat = theta_linear * (1 + 4*pi*eps), a first-order
# bound on how much two shears of derivative size 2*pi*eps can slow the
# linear rates.
THETA_MARGIN_COEFF = 4.0 * math.pi

# Enumeration guard for periodic-point solving, |det(L^n - I)| above this is
# refused as unsupported rather than silently slow.
_PERIODIC_COUNT_CAP = 1500


def mod1(x: float) -> float:
    """Reduce to [0, 1), clamping the rounding artifact x - floor(x) == 1.0."""
    y = x - math.floor(x)
    return 0.0 if y >= 1.0 else y


@dataclass(frozen=True, slots=True)
class TorusPoint:
    """A point of the flat 2-torus; coordinates always reduced to [0, 1)."""

    u: float
    v: float

    def __post_init__(self):
        object.__setattr__(self, "u", mod1(self.u))
        object.__setattr__(self, "v", mod1(self.v))

    def as_tuple(self) -> tuple[float, float]:
        return self.u, self.v


def circle_dist(x: float, y: float) -> float:
    """Distance on R/Z, in [0, 1/2]."""
    d = abs(x - y) % 1.0
    return min(d, 1.0 - d)


def distance(p: TorusPoint, q: TorusPoint) -> float:
    """Quotient metric: Euclidean distance minimized over integer translates."""
    return math.hypot(circle_dist(p.u, q.u), circle_dist(p.v, q.v))


@dataclass(frozen=True, slots=True)
class HyperbolicityRate:
    """Certified contraction rate theta in (0,1) for an Anosov base.

    ``margin`` records the inflation applied on top of the exact linear rate
    (1.0 means the rate is exact).
    """

    theta: float
    margin: float = 1.0

    def __float__(self) -> float:
        return self.theta


class BaseMap:
    """Common surface of the four torus map variants."""

    def apply(self, p: TorusPoint) -> TorusPoint:
        u, v = self.step_fn()(p.u, p.v)
        return TorusPoint(u, v)

    def apply_inverse(self, p: TorusPoint) -> TorusPoint:
        u, v = self.inverse_step_fn()(p.u, p.v)
        return TorusPoint(u, v)

    def step_fn(self) -> Callable[[float, float], tuple[float, float]]:
        raise NotImplementedError

    def inverse_step_fn(self) -> Callable[[float, float], tuple[float, float]]:
        raise NotImplementedError

    def jacobian(self, u: float, v: float) -> tuple[float, float, float, float]:
        """Row-major derivative matrix at (u, v), closed form."""
        raise NotImplementedError

    def constant_jacobian(self) -> Optional[tuple[float, float, float, float]]:
        """The Jacobian when it is x-independent, else None."""
        return None


@dataclass(frozen=True)
class LinearToral(BaseMap):
    """x -> L x (mod 1) for a unimodular integer matrix L."""

    l11: int
    l12: int
    l21: int
    l22: int

    def __post_init__(self):
        for name in ("l11", "l12", "l21", "l22"):
            val = getattr(self, name)
            if int(val) != val:
                raise InvalidParameterError(f"{name} must be an integer, got {val!r}")
            object.__setattr__(self, name, int(val))
        if self.det() not in (1, -1):
            raise InvalidParameterError(
                f"linear toral matrix must have determinant +-1, got {self.det()}"
            )

    def det(self) -> int:
        return self.l11 * self.l22 - self.l12 * self.l21

    def trace(self) -> int:
        return self.l11 + self.l22

    @property
    def is_hyperbolic(self) -> bool:
        return abs(self.trace()) > 2

    def matrix(self) -> tuple[int, int, int, int]:
        return self.l11, self.l12, self.l21, self.l22

    def inverse_matrix(self) -> tuple[int, int, int, int]:
        d = self.det()
        # adjugate divided by det, still integer since det = +-1
        return (self.l22 * d, -self.l12 * d, -self.l21 * d, self.l11 * d)

    def step_fn(self):
        a, b, c, d = float(self.l11), float(self.l12), float(self.l21), float(self.l22)
        floor = math.floor

        def step(u, v):
            x = a * u + b * v
            y = c * u + d * v
            x -= floor(x)
            y -= floor(y)
            if x >= 1.0:
                x = 0.0
            if y >= 1.0:
                y = 0.0
            return x, y

        return step

    def inverse_step_fn(self):
        ia, ib, ic, id_ = (float(x) for x in self.inverse_matrix())
        floor = math.floor

        def step(u, v):
            x = ia * u + ib * v
            y = ic * u + id_ * v
            x -= floor(x)
            y -= floor(y)
            if x >= 1.0:
                x = 0.0
            if y >= 1.0:
                y = 0.0
            return x, y

        return step

    def jacobian(self, u, v):
        return float(self.l11), float(self.l12), float(self.l21), float(self.l22)

    def constant_jacobian(self):
        return self.jacobian(0.0, 0.0)

    def matrix_power(self, n: int) -> tuple[int, int, int, int]:
        """Exact integer L^n for n >= 0."""
        if n < 0:
            raise InvalidParameterError("matrix_power needs n >= 0")
        r = (1, 0, 0, 1)
        base = self.matrix()
        while n:
            if n & 1:
                r = _imul(r, base)
            base = _imul(base, base)
            n >>= 1
        return r


def _imul(m: tuple[int, int, int, int], n: tuple[int, int, int, int]):
    return (
        m[0] * n[0] + m[1] * n[2],
        m[0] * n[1] + m[1] * n[3],
        m[2] * n[0] + m[3] * n[2],
        m[2] * n[1] + m[3] * n[3],
    )


@dataclass(frozen=True)
class PerturbedToral(BaseMap):
    """Linear toral map composed with two trigonometric shears.

    g = S2 o S1 o L with S1(u,v) = (u + eps sin(2 pi v), v) and
    S2(u,v) = (u, v + eps sin(2 pi u)).  Each shear has unit Jacobian
    determinant exactly, so g preserves Lebesgue measure exactly and is a
    diffeomorphism for every eps; construction is capped at the documented
    hyperbolicity-preserving bound.
    """

    linear: LinearToral
    eps: float
    mode: str = "shear_sine"

    def __post_init__(self):
        if self.eps < 0.0:
            raise InvalidParameterError("eps must be >= 0")
        if self.eps > PERTURBATION_EPS_MAX:
            raise InvalidParameterError(
                f"eps={self.eps} exceeds the documented bound {PERTURBATION_EPS_MAX}"
            )
        if self.mode != "shear_sine":
            raise InvalidParameterError(f"unknown perturbation mode {self.mode!r}")

    @property
    def is_hyperbolic(self) -> bool:
        return self.linear.is_hyperbolic

    def step_fn(self):
        lin = self.linear.step_fn()
        e = self.eps
        sin = math.sin

        def step(u, v):
            u1, v1 = lin(u, v)
            u2 = mod1(u1 + e * sin(TWO_PI * v1))
            v2 = mod1(v1 + e * sin(TWO_PI * u2))
            return u2, v2

        return step

    def inverse_step_fn(self):
        lininv = self.linear.inverse_step_fn()
        e = self.eps
        sin = math.sin

        def step(u, v):
            v1 = mod1(v - e * sin(TWO_PI * u))
            u1 = mod1(u - e * sin(TWO_PI * v1))
            return lininv(u1, v1)

        return step

    def jacobian(self, u, v):
        a, b, c, d = self.linear.jacobian(u, v)
        lin = self.linear.step_fn()
        u1, v1 = lin(u, v)
        e = self.eps
        k1 = TWO_PI * e * math.cos(TWO_PI * v1)      # DS1 upper shear entry
        u2 = mod1(u1 + e * math.sin(TWO_PI * v1))
        k2 = TWO_PI * e * math.cos(TWO_PI * u2)      # DS2 lower shear entry
        # DS2 * DS1 * L with DS1 = [[1,k1],[0,1]], DS2 = [[1,0],[k2,1]]
        ra, rb = a + k1 * c, b + k1 * d
        rc, rd = c, d
        return ra, rb, k2 * ra + rc, k2 * rb + rd

    def constant_jacobian(self):
        if self.eps == 0.0:
            return self.linear.constant_jacobian()
        return None


@dataclass(frozen=True)
class StandardMap(BaseMap):
    """Chirikov standard map on the unit torus.

    (u, v) -> (u + v', v') with v' = v + (K / 2 pi) sin(2 pi u);
    Jacobian [[1 + K cos(2 pi u), 1], [K cos(2 pi u), 1]], determinant 1.
    """

    K: float

    def __post_init__(self):
        if self.K < 0.0:
            raise InvalidParameterError("K must be >= 0")

    def step_fn(self):
        kk = self.K / TWO_PI
        sin = math.sin

        def step(u, v):
            vp = mod1(v + kk * sin(TWO_PI * u))
            return mod1(u + vp), vp

        return step

    def inverse_step_fn(self):
        kk = self.K / TWO_PI
        sin = math.sin

        def step(u, v):
            # undo the shear, then subtract the kick
            u0 = mod1(u - v)
            return u0, mod1(v - kk * sin(TWO_PI * u0))

        return step

    def jacobian(self, u, v):
        kc = self.K * math.cos(TWO_PI * u)
        return 1.0 + kc, 1.0, kc, 1.0

    def constant_jacobian(self):
        if self.K == 0.0:
            return 1.0, 1.0, 0.0, 1.0
        return None


@dataclass(frozen=True)
class Rotation(BaseMap):
    """Rigid translation (u, v) -> (u + alpha, v + beta)."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0) or not (0.0 < self.beta < 1.0):
            raise InvalidParameterError("rotation angles must lie in (0, 1)")

    def step_fn(self):
        a, b = self.alpha, self.beta

        def step(u, v):
            return mod1(u + a), mod1(v + b)

        return step

    def inverse_step_fn(self):
        a, b = self.alpha, self.beta

        def step(u, v):
            return mod1(u - a), mod1(v - b)

        return step

    def jacobian(self, u, v):
        return 1.0, 0.0, 0.0, 1.0

    def constant_jacobian(self):
        return 1.0, 0.0, 0.0, 1.0


@dataclass(frozen=True)
class InvertedMap(BaseMap):
    """The inverse of another base map as a map in its own right."""

    inner: BaseMap

    def step_fn(self):
        return self.inner.inverse_step_fn()

    def inverse_step_fn(self):
        return self.inner.step_fn()

    def jacobian(self, u, v):
        # D(f^{-1})(x) = (Df(f^{-1}x))^{-1}; determinant stays +-1
        pu, pv = self.inner.inverse_step_fn()(u, v)
        a, b, c, d = self.inner.jacobian(pu, pv)
        det = a * d - b * c
        inv = 1.0 / det
        return d * inv, -b * inv, -c * inv, a * inv


def orbit(base: BaseMap, p: TorusPoint, n: int) -> list[TorusPoint]:
    """[p, f(p), ..., f^n(p)]; negative n iterates the inverse."""
    pts = [p]
    step = base.step_fn() if n >= 0 else base.inverse_step_fn()
    u, v = p.u, p.v
    for _ in range(abs(n)):
        u, v = step(u, v)
        pts.append(TorusPoint(u, v))
    return pts


def hyperbolicity_rate(base: BaseMap) -> Optional[HyperbolicityRate]:
    """Contraction rate theta of the hyperbolic splitting, or None.

    For a unimodular integer matrix with |trace| > 2 the rate is
    1/|lambda_max| in closed form from trace and determinant.  Perturbed
    maps get the linear rate inflated by (1 + 4 pi eps) as a certified
    upper bound, recorded in ``margin``.
    """
    if isinstance(base, LinearToral):
        if not base.is_hyperbolic:
            return None
        return HyperbolicityRate(theta=_linear_theta(base), margin=1.0)
    if isinstance(base, PerturbedToral):
        if not base.linear.is_hyperbolic:
            return None
        margin = 1.0 + THETA_MARGIN_COEFF * base.eps
        theta = _linear_theta(base.linear) * margin
        if theta >= 1.0:
            return None
        return HyperbolicityRate(theta=theta, margin=margin)
    return None


def _linear_theta(lin: LinearToral) -> float:
    tr = abs(lin.trace())
    det = lin.det()
    lam_max = 0.5 * (tr + math.sqrt(tr * tr - 4.0 * det))
    return 1.0 / lam_max


def periodic_points(base: BaseMap, period: int) -> list[tuple[TorusPoint, int]]:
    """All fixed points of f^period, with each point's minimal period.

    LinearToral: integer solve of (L^n - I) x = 0 (mod 1); the list has
    exactly |det(L^n - I)| entries.  StandardMap supports period 1 only
    (closed form sin(2 pi u) = 0, v = 0).
    """
    if period < 1:
        raise InvalidParameterError("period must be >= 1")
    if isinstance(base, LinearToral):
        return _linear_periodic_points(base, period)
    if isinstance(base, StandardMap):
        if period != 1:
            raise UnsupportedOperationError(
                "standard map periodic points are only enumerable for period 1"
            )
        return [(TorusPoint(0.0, 0.0), 1), (TorusPoint(0.5, 0.0), 1)]
    raise UnsupportedOperationError(
        f"periodic point enumeration unsupported for {type(base).__name__}"
    )


def _linear_periodic_points(lin: LinearToral, period: int):
    ln = lin.matrix_power(period)
    m11, m12, m21, m22 = ln[0] - 1, ln[1], ln[2], ln[3] - 1
    det = m11 * m22 - m12 * m21
    if det == 0:
        raise UnsupportedOperationError(
            f"det(L^{period} - I) = 0, fixed set is not finite"
        )
    count = abs(det)
    if count > _PERIODIC_COUNT_CAP:
        raise UnsupportedOperationError(
            f"|det(L^{period} - I)| = {count} exceeds the enumeration cap"
        )
    # Solutions are rationals with denominator |det|: x = (a, b)/count with
    # (L^n - I) x integral, i.e. both congruences below hold mod count.
    found = []
    for a in range(count):
        r1 = (m11 * a) % count
        r2 = (m21 * a) % count
        for b in range(count):
            if (r1 + m12 * b) % count == 0 and (r2 + m22 * b) % count == 0:
                found.append((a, b))
    assert len(found) == count, "periodic point enumeration lost solutions"
    mat = lin.matrix()
    out = []
    for a, b in found:
        out.append(
            (TorusPoint(a / count, b / count), _minimal_period(mat, a, b, count, period))
        )
    return out


def _minimal_period(mat, a: int, b: int, den: int, period: int) -> int:
    x, y = a, b
    for k in range(1, period + 1):
        x, y = (mat[0] * x + mat[1] * y) % den, (mat[2] * x + mat[3] * y) % den
        if x == a and y == b:
            return k
    return period


@dataclass(frozen=True)
class MeasureAudit:
    max_deviation: float
    samples: int


def check_measure_preservation(base: BaseMap, samples: int, seed: int) -> MeasureAudit:
    """Max | |det J| - 1 | over quasi-random points (closed-form Jacobians).

    Uses a seeded Kronecker low-discrepancy sequence.  Absolute value of the
    determinant because orientation-reversing unimodular automorphisms
    preserve Lebesgue measure with det J = -1.
    """
    if samples < 1:
        raise InvalidParameterError("samples must be >= 1")
    rng = random.Random(seed)
    s, t = rng.random(), rng.random()
    # R2 sequence constants (inverse powers of the plastic number)
    g1, g2 = 0.7548776662466927, 0.5698402909980532
    worst = 0.0
    for k in range(samples):
        u = mod1(s + k * g1)
        v = mod1(t + k * g2)
        a, b, c, d = base.jacobian(u, v)
        dev = abs(abs(a * d - b * c) - 1.0)
        if dev > worst:
            worst = dev
    return MeasureAudit(max_deviation=worst, samples=samples)
