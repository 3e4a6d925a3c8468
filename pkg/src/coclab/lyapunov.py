"""Largest Lyapunov exponent, growth directions, and integrated exponents.

All exponents are in nats per iterate.  The top exponent of an SL(2,R)
cocycle is nonnegative, so negative raw estimates (pure floating noise) are
clamped to zero with a flag.
"""

from __future__ import annotations

import math
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

from .cocycles import Cocycle, backward_window_product, iterate, iterate_logs
from .errors import InvalidParameterError, MeasureUnsupportedError
from .matrices import (
    bottom_right_singular_vector,
    top_left_singular_vector,
)
from .torus import (
    BaseMap,
    LinearToral,
    PerturbedToral,
    TorusPoint,
    periodic_points,
)

# Exponents at or below this threshold (nats/iterate) are numerically zero:
# an order of magnitude above the estimator noise floor at n = 1e6.  Shared
# single source of truth for every trivial-vs-positive decision.
LAMBDA_MIN = 1e-4

_N_BATCHES = 10


@dataclass(frozen=True)
class LyapunovEstimate:
    """Finite-time estimate of the largest exponent along one orbit."""

    value: float
    n: int
    stderr: Optional[float]
    renorm_count: int
    raw_value: float
    clamped: bool


def top_exponent(cocycle: Cocycle, base: BaseMap, start: TorusPoint, n: int) -> LyapunovEstimate:
    """(1/n) log ||A^n(x)||, clamped at zero, with batch-means stderr."""
    if n < 100:
        raise InvalidParameterError("top_exponent needs n >= 100")
    prod, checkpoints = iterate_logs(cocycle, base, start, n, _N_BATCHES)
    raw = prod.log_norm() / n
    stderr = None
    if len(checkpoints) == _N_BATCHES:
        stride = n // _N_BATCHES
        prev = 0.0
        batches = []
        for c in checkpoints:
            batches.append((c - prev) / stride)
            prev = c
        mean = sum(batches) / _N_BATCHES
        var = sum((b - mean) ** 2 for b in batches) / (_N_BATCHES - 1)
        stderr = math.sqrt(var / _N_BATCHES)
    clamped = raw < 0.0
    return LyapunovEstimate(
        value=0.0 if clamped else raw,
        n=n,
        stderr=stderr,
        renorm_count=prod.renorms,
        raw_value=raw,
        clamped=clamped,
    )


@dataclass(frozen=True)
class OseledetsSplitting:
    """Estimated expanded/contracted directions at a point.

    ``gap`` is the exponent separation lambda+ - lambda- = 2 lambda+ and
    ``invariance_residual`` the worst sine of the angle between the pushed
    direction and the direction recomputed at the image point.
    """

    unstable: tuple[float, float]
    stable: tuple[float, float]
    gap: float
    invariance_residual: float


def oseledets_directions(
    cocycle: Cocycle, base: BaseMap, start: TorusPoint, n: int
) -> Optional[OseledetsSplitting]:
    """Estimate the splitting at ``start``; None when degenerate.

    The expanded direction is the top image direction of the window product
    ending at the point (forward power iteration started at f^-n of it); the
    contracted one is the least-expanded start direction of the forward
    window.  Returns None when the estimated exponent is below LAMBDA_MIN,
    where the two directions are not identifiable.
    """
    if n < 100:
        raise InvalidParameterError("oseledets_directions needs n >= 100")
    fwd = iterate(cocycle, base, start, n)
    if fwd.log_norm() / n < LAMBDA_MIN:
        return None
    image = base.apply(start)
    eu = _unstable_direction(cocycle, base, start, n)
    es = _stable_direction(cocycle, base, start, n)
    eu_next = _unstable_direction(cocycle, base, image, n)
    es_next = _stable_direction(cocycle, base, image, n)
    step = cocycle.eval(start)
    res_u = _pushforward_residual(step, eu, eu_next)
    res_s = _pushforward_residual(step, es, es_next)
    gap = 2.0 * fwd.log_norm() / n
    return OseledetsSplitting(
        unstable=eu,
        stable=es,
        gap=gap,
        invariance_residual=max(res_u, res_s),
    )


def _unstable_direction(cocycle, base, point, n):
    m = backward_window_product(cocycle, base, point, n).m
    return top_left_singular_vector(m.a, m.b, m.c, m.d)


def _stable_direction(cocycle, base, point, n):
    prod = iterate(cocycle, base, point, n)
    return bottom_right_singular_vector(prod.m.a, prod.m.b, prod.m.c, prod.m.d)


def _pushforward_residual(step, direction, direction_next):
    wx, wy = step.matvec(*direction)
    norm = math.hypot(wx, wy)
    if norm == 0.0:
        return 1.0
    wx, wy = wx / norm, wy / norm
    return abs(wx * direction_next[1] - wy * direction_next[0])


@dataclass(frozen=True)
class LebesgueSpec:
    """Seeded uniform start points standing in for Lebesgue measure."""

    n_orbits: int
    seed: int

    def __post_init__(self):
        if self.n_orbits < 1:
            raise InvalidParameterError("n_orbits must be >= 1")


@dataclass(frozen=True)
class PeriodicEquidistributionSpec:
    """Equal weights on all periodic points of one period (linear bases only)."""

    period: int


@dataclass(frozen=True)
class SingleOrbitSpec:
    start: TorusPoint


MeasureSpec = Union[LebesgueSpec, PeriodicEquidistributionSpec, SingleOrbitSpec]


@dataclass(frozen=True)
class OrbitResult:
    orbit_id: int
    start: TorusPoint
    estimate: LyapunovEstimate


@dataclass(frozen=True)
class IntegratedExponent:
    lambda_bar: float
    ci95: Optional[float]
    orbits: tuple[OrbitResult, ...]


def _worker_count() -> int:
    raw = os.environ.get("COCLAB_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            return 1
    return os.cpu_count() or 1


def _map_indexed(fn, items):
    workers = _worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def integrated_exponent(
    cocycle: Cocycle, base: BaseMap, measure: MeasureSpec, n_steps: int
) -> IntegratedExponent:
    """Average of the top exponent against the chosen invariant measure.

    Lebesgue: mean over seeded uniform starts with a 95% CI from the sample
    variance.  Periodic equidistribution: equal-weight mean of the exact
    per-cycle exponent log rho(A^period(x)) / period over all periodic
    points (the spectral radius is the exact exponent at a periodic point).
    Single orbit: one estimate, no CI.
    """
    if n_steps < 100:
        raise InvalidParameterError("integrated_exponent needs n_steps >= 100")
    if isinstance(measure, LebesgueSpec):
        rng = random.Random(measure.seed)
        starts = [
            TorusPoint(rng.random(), rng.random()) for _ in range(measure.n_orbits)
        ]

        def one(item):
            idx, p = item
            return OrbitResult(idx, p, top_exponent(cocycle, base, p, n_steps))

        orbits = tuple(_map_indexed(one, list(enumerate(starts))))
        values = [o.estimate.value for o in orbits]
        mean = sum(values) / len(values)
        ci95 = None
        if len(values) >= 2:
            var = sum((x - mean) ** 2 for x in values) / (len(values) - 1)
            ci95 = 1.96 * math.sqrt(var / len(values))
        return IntegratedExponent(mean, ci95, orbits)
    if isinstance(measure, PeriodicEquidistributionSpec):
        if not isinstance(base, LinearToral):
            raise MeasureUnsupportedError(
                "periodic equidistribution needs a linear toral base"
            )
        pts = periodic_points(base, measure.period)
        orbits = []
        values = []
        for idx, (p, _minper) in enumerate(pts):
            lam, renorms = _periodic_exponent(cocycle, base, p, measure.period)
            est = LyapunovEstimate(
                value=max(lam, 0.0),
                n=measure.period,
                stderr=None,
                renorm_count=renorms,
                raw_value=lam,
                clamped=lam < 0.0,
            )
            orbits.append(OrbitResult(idx, p, est))
            values.append(est.value)
        mean = sum(values) / len(values)
        ci95 = None
        if len(values) >= 2:
            var = sum((x - mean) ** 2 for x in values) / (len(values) - 1)
            ci95 = 1.96 * math.sqrt(var / len(values))
        return IntegratedExponent(mean, ci95, tuple(orbits))
    if isinstance(measure, SingleOrbitSpec):
        est = top_exponent(cocycle, base, measure.start, n_steps)
        return IntegratedExponent(
            est.value, None, (OrbitResult(0, measure.start, est),)
        )
    raise MeasureUnsupportedError(f"unknown measure spec {measure!r}")


def _periodic_exponent(cocycle, base, point, period):
    """Exact exponent at a periodic point: log spectral radius per step."""
    prod = iterate(cocycle, base, point, period)
    m = prod.m
    tr = m.trace()
    det = m.det()
    disc = tr * tr - 4.0 * det
    if disc > 0.0:
        rho = 0.5 * (abs(tr) + math.sqrt(disc))
        log_rho = math.log(rho)
    else:
        # complex pair: |lambda| = sqrt(det m); with logscale this is exactly
        # half the represented log-determinant, i.e. zero for SL(2,R)
        log_rho = 0.5 * math.log(abs(det)) if det != 0.0 else 0.0
    return (prod.logscale + log_rho) / period, prod.renorms


def mme_spec(
    base: BaseMap, period: int, n_orbits: int = 16, seed: int = 0
) -> MeasureSpec:
    """Measure spec approximating the maximal entropy measure.

    Linear hyperbolic toral automorphisms: the maximal entropy measure
    coincides with Lebesgue (documented coincidence, tested via exponent
    agreement).  Perturbed maps: periodic equidistribution on the linear
    model, to be transported through the conjugacy; never a direct claim
    about the perturbed map's own measure.
    """
    if isinstance(base, LinearToral):
        if not base.is_hyperbolic:
            raise MeasureUnsupportedError("no MME approximation available")
        return LebesgueSpec(n_orbits=n_orbits, seed=seed)
    if isinstance(base, PerturbedToral):
        if not base.linear.is_hyperbolic:
            raise MeasureUnsupportedError("no MME approximation available")
        if base.eps == 0.0:
            return LebesgueSpec(n_orbits=n_orbits, seed=seed)
        return PeriodicEquidistributionSpec(period=period)
    raise MeasureUnsupportedError("no MME approximation available")


__all__ = [
    "LAMBDA_MIN",
    "LyapunovEstimate",
    "OseledetsSplitting",
    "LebesgueSpec",
    "PeriodicEquidistributionSpec",
    "SingleOrbitSpec",
    "MeasureSpec",
    "OrbitResult",
    "IntegratedExponent",
    "top_exponent",
    "oseledets_directions",
    "integrated_exponent",
    "mme_spec",
]
