"""Regularity and spectrum classification.

Sampled Holder seminorms, the domination inequality against the base
contraction rate, a cone-field certificate for uniform hyperbolicity, the
trivial / uniformly hyperbolic / simple-nonuniform trichotomy, and the
elliptic/hyperbolic type of periodic points.

Sampled seminorms and grid suprema are lower bounds of the true quantities;
the test margins are chosen so floating noise cannot manufacture a
hyperbolic verdict (false hyperbolic is the costly error here).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Union

from .cocycles import (
    Cocycle,
    PiecewisePerturbedCocycle,
    backward_window_product,
    iterate,
)
from .errors import (
    BaseNotHyperbolicError,
    InvalidParameterError,
    NonHolderFamilyError,
    NotPeriodicError,
)
from .lyapunov import LAMBDA_MIN, MeasureSpec, integrated_exponent
from .matrices import line_angle, op_norm, rotate_vec, singular_values, top_left_singular_vector
from .torus import BaseMap, TorusPoint, distance, hyperbolicity_rate

# Cone-certificate constants: minimum and maximum cone half-angle, the
# strict one-step expansion threshold, and the floating-safety floor on the
# invariance margin.
ALPHA_MIN = 0.02
ALPHA_MAX = math.pi / 6.0
EXPANSION_THRESHOLD = 1.0 + 1e-3
MARGIN_SAFETY = 1e-6
_WITNESS_RATE = math.log(EXPANSION_THRESHOLD)

PARABOLIC_TRACE_TOL = 1e-9
PERIODIC_RETURN_TOL = 1e-9


def holder_seminorm(cocycle: Cocycle, nu: float, pairs: int, seed: int) -> float:
    """Sampled nu-Holder seminorm sup ||A(x)-A(y)|| / d(x,y)^nu.

    Maximum over seeded random pairs plus structured near-diagonal pairs at
    dyadic separations 2^-k, k = 3..12.  A lower bound of the true
    seminorm (sampled, never certified).
    """
    if not (0.0 < nu <= 1.0):
        raise InvalidParameterError("nu must lie in (0, 1]")
    if pairs < 100:
        raise InvalidParameterError("need at least 100 sample pairs")
    if isinstance(cocycle, PiecewisePerturbedCocycle):
        raise NonHolderFamilyError(
            "piecewise-constant perturbation fields are not a Holder family"
        )
    rng = random.Random(seed)
    ev = cocycle.eval_fn()

    def quotient(p: TorusPoint, q: TorusPoint) -> float:
        dist = distance(p, q)
        if dist < 1e-15:
            return 0.0
        pa, pb, pc, pd = ev(p.u, p.v)
        qa, qb, qc, qd = ev(q.u, q.v)
        return op_norm(pa - qa, pb - qb, pc - qc, pd - qd) / dist ** nu

    worst = 0.0
    for _ in range(pairs):
        p = TorusPoint(rng.random(), rng.random())
        q = TorusPoint(rng.random(), rng.random())
        worst = max(worst, quotient(p, q))
    near = max(pairs // 20, 8)
    for k in range(3, 13):
        h = 2.0 ** (-k)
        for _ in range(near):
            p = TorusPoint(rng.random(), rng.random())
            phi = rng.random() * 2.0 * math.pi
            q = TorusPoint(p.u + h * math.cos(phi), p.v + h * math.sin(phi))
            worst = max(worst, quotient(p, q))
    return worst


@dataclass(frozen=True)
class DominationReport:
    dominated: bool
    worst: float
    argmax: TorusPoint
    theta: float


def domination_check(
    cocycle: Cocycle, base: BaseMap, nu: float, grid: int
) -> DominationReport:
    """Grid maximum of ||A(x)|| ||A(x)^-1|| theta^nu; dominated iff < 1."""
    if grid < 16:
        raise InvalidParameterError("grid must be >= 16")
    if not (0.0 < nu <= 1.0):
        raise InvalidParameterError("nu must lie in (0, 1]")
    rate = hyperbolicity_rate(base)
    if rate is None:
        raise BaseNotHyperbolicError("base map carries no hyperbolicity rate")
    theta_nu = rate.theta ** nu
    ev = cocycle.eval_fn()
    worst = -1.0
    arg = TorusPoint(0.0, 0.0)
    inv_g = 1.0 / grid
    for i in range(grid):
        u = i * inv_g
        for j in range(grid):
            v = j * inv_g
            a, b, c, d = ev(u, v)
            val = op_norm(a, b, c, d) * op_norm(d, -b, -c, a) * theta_nu
            if val > worst:
                worst = val
                arg = TorusPoint(u, v)
    return DominationReport(dominated=worst < 1.0, worst=worst, argmax=arg, theta=rate.theta)


@dataclass(frozen=True)
class HyperbolicCertificate:
    lam: float
    cone_margin: float
    cone_half_angle: float


@dataclass(frozen=True)
class NotHyperbolicWitness:
    witness: TorusPoint
    reason: str


@dataclass(frozen=True)
class HyperbolicityInconclusive:
    reason: str


HyperbolicityResult = Union[
    HyperbolicCertificate, NotHyperbolicWitness, HyperbolicityInconclusive
]


def uniform_hyperbolicity_test(
    cocycle: Cocycle, base: BaseMap, grid: int, n_window: int
) -> HyperbolicityResult:
    """Cone-field certificate for uniform hyperbolicity on a grid.

    Candidate expanded directions come from n_window-step power iteration
    (top image direction of the window product ending at each point); a cone
    of half-angle three times the observed direction spread must map
    strictly inside itself with one-step expansion above the threshold at
    every grid point.  A point whose window product shows no norm growth, or
    whose image ray exits the cone, witnesses failure; anything else that
    blocks certification is inconclusive.
    """
    if grid < 16:
        raise InvalidParameterError("grid must be >= 16")
    if n_window < 8:
        raise InvalidParameterError("n_window must be >= 8")
    ev = cocycle.eval_fn()
    inv_g = 1.0 / grid
    points = [TorusPoint(i * inv_g, j * inv_g) for i in range(grid) for j in range(grid)]

    # Uniform norm-growth witness: a window product with per-step growth at
    # or below the expansion threshold rules the certificate out directly.
    worst_rate = math.inf
    worst_point = points[0]
    for p in points:
        rate = iterate(cocycle, base, p, n_window).log_norm() / n_window
        if rate < worst_rate:
            worst_rate = rate
            worst_point = p
    if worst_rate <= _WITNESS_RATE:
        return NotHyperbolicWitness(
            witness=worst_point,
            reason="window product shows no uniform norm growth",
        )

    def candidate(p: TorusPoint) -> tuple[tuple[float, float], float]:
        m = backward_window_product(cocycle, base, p, n_window).m
        direction = top_left_singular_vector(m.a, m.b, m.c, m.d)
        s1, s2 = singular_values(m.a, m.b, m.c, m.d)
        spread = math.atan2(s2, s1)
        return direction, spread

    cands: dict[TorusPoint, tuple[float, float]] = {}
    max_spread = 0.0
    for p in points:
        direction, spread = candidate(p)
        cands[p] = direction
        max_spread = max(max_spread, spread)
    if 3.0 * max_spread > ALPHA_MAX:
        return HyperbolicityInconclusive(
            reason="direction spread too large for a cone certificate"
        )
    alpha = max(3.0 * max_spread, ALPHA_MIN)

    min_margin = math.inf
    min_expansion = math.inf
    for p in points:
        c1 = cands[p]
        image_point = base.apply(p)
        c2, _ = candidate(image_point)
        a, b, c, d = ev(p.u, p.v)
        for sgn in (1.0, -1.0):
            rx, ry = rotate_vec(c1[0], c1[1], sgn * alpha)
            wx, wy = a * rx + b * ry, c * rx + d * ry
            ang = line_angle((wx, wy), c2)
            margin = alpha - ang
            if margin < min_margin:
                min_margin = margin
                if margin < -MARGIN_SAFETY:
                    return NotHyperbolicWitness(
                        witness=p, reason="cone image exits the cone at the image point"
                    )
        for k in range(9):
            phi = -alpha + k * (alpha / 4.0)
            rx, ry = rotate_vec(c1[0], c1[1], phi)
            growth = math.hypot(a * rx + b * ry, c * rx + d * ry)
            if growth < min_expansion:
                min_expansion = growth
    if min_margin > MARGIN_SAFETY and min_expansion > EXPANSION_THRESHOLD:
        return HyperbolicCertificate(
            lam=math.log(min_expansion),
            cone_margin=min_margin,
            cone_half_angle=alpha,
        )
    return HyperbolicityInconclusive(
        reason="cone invariance or expansion margin below the safety floor"
    )


@dataclass(frozen=True)
class UniformlyHyperbolic:
    lam: float
    cone_margin: float


@dataclass(frozen=True)
class TrivialSpectrum:
    lambda_bound: float


@dataclass(frozen=True)
class SimpleNonuniform:
    lam: float


@dataclass(frozen=True)
class Inconclusive:
    reason: str


ClassificationVerdict = Union[
    UniformlyHyperbolic, TrivialSpectrum, SimpleNonuniform, Inconclusive
]


@dataclass(frozen=True)
class EstimateSettings:
    n_steps: int
    measure: MeasureSpec


@dataclass(frozen=True)
class HyperbolicitySettings:
    grid: int = 16
    n_window: int = 8


def spectrum_class(
    cocycle: Cocycle,
    base: BaseMap,
    estimate_cfg: EstimateSettings,
    hyp_cfg: HyperbolicitySettings,
) -> ClassificationVerdict:
    """Trichotomy verdict from the integrated exponent and the cone test.

    Integrated exponent at or below LAMBDA_MIN: trivial spectrum.  Positive
    cone certificate: uniformly hyperbolic.  Positive exponent with a
    witnessed failure of uniform hyperbolicity: simple spectrum without
    uniformity (lambda+ > 0 > lambda- for determinant-one cocycles).
    Anything else: inconclusive, with a reason code.
    """
    integrated = integrated_exponent(
        cocycle, base, estimate_cfg.measure, estimate_cfg.n_steps
    )
    if integrated.lambda_bar <= LAMBDA_MIN:
        return TrivialSpectrum(lambda_bound=integrated.lambda_bar)
    hyp = uniform_hyperbolicity_test(cocycle, base, hyp_cfg.grid, hyp_cfg.n_window)
    if isinstance(hyp, HyperbolicCertificate):
        return UniformlyHyperbolic(lam=integrated.lambda_bar, cone_margin=hyp.cone_margin)
    if isinstance(hyp, NotHyperbolicWitness):
        return SimpleNonuniform(lam=integrated.lambda_bar)
    return Inconclusive(reason=hyp.reason)


def verdict_name(verdict: ClassificationVerdict) -> str:
    """Stable machine-readable name of a verdict variant."""
    return {
        UniformlyHyperbolic: "uniformly_hyperbolic",
        TrivialSpectrum: "trivial_spectrum",
        SimpleNonuniform: "simple_nonuniform",
        Inconclusive: "inconclusive",
    }[type(verdict)]


class PeriodicPointType(Enum):
    ELLIPTIC = "elliptic"
    HYPERBOLIC_POINT = "hyperbolic"
    PARABOLIC = "parabolic"


def elliptic_classify(base: BaseMap, p: TorusPoint, period: int) -> PeriodicPointType:
    """Type of a verified periodic point from the derivative trace.

    |trace| < 2 elliptic, |trace| > 2 hyperbolic, within 1e-9 of +-2
    parabolic.  The trace of the period-map derivative is conjugation
    invariant, so the answer does not depend on the orbit point chosen.
    """
    if period < 1:
        raise InvalidParameterError("period must be >= 1")
    step = base.step_fn()
    u, v = p.u, p.v
    ja, jb, jc, jd = 1.0, 0.0, 0.0, 1.0
    for _ in range(period):
        a, b, c, d = base.jacobian(u, v)
        ja, jb, jc, jd = (
            a * ja + b * jc,
            a * jb + b * jd,
            c * ja + d * jc,
            c * jb + d * jd,
        )
        u, v = step(u, v)
    ret = distance(TorusPoint(u, v), p)
    if ret > PERIODIC_RETURN_TOL:
        raise NotPeriodicError(
            f"point returns {ret:.3e} away after {period} steps", return_distance=ret
        )
    tr = ja + jd
    if abs(abs(tr) - 2.0) <= PARABOLIC_TRACE_TOL:
        return PeriodicPointType.PARABOLIC
    if abs(tr) < 2.0:
        return PeriodicPointType.ELLIPTIC
    return PeriodicPointType.HYPERBOLIC_POINT
