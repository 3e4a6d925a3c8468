"""Desk-scale perturbation experiments on cocycles.

Three experiment families: raising a trivial-spectrum cocycle to positive
exponent within a sup-norm budget, annealing a non-hyperbolic cocycle's
integrated exponent downward, and probing upper semicontinuity of the
integrated exponent under bounded perturbations.

The perturbation vocabulary is deliberately small: pointwise rotation
compositions (norm-exact, clean budget accounting) and diagonal boosts
(the minimal exponent-raising move).  Every emitted candidate is audited
against the sup-norm budget on a grid, post hoc, no exceptions.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass

from .classify import (
    ClassificationVerdict,
    EstimateSettings,
    HyperbolicitySettings,
    UniformlyHyperbolic,
    spectrum_class,
    verdict_name,
)
from .cocycles import (
    Cocycle,
    DiagonalBoostCocycle,
    PiecewisePerturbedCocycle,
    SchrodingerCocycle,
    derivative_cocycle,
    sup_distance,
)
from .errors import InvalidParameterError, SearchPreconditionError
from .lyapunov import LAMBDA_MIN, LebesgueSpec, integrated_exponent
from .matrices import op_norm
from .torus import (
    PERTURBATION_EPS_MAX,
    BaseMap,
    LinearToral,
    PerturbedToral,
    StandardMap,
)


@dataclass(frozen=True)
class SearchSettings:
    kind: str = "random"  # random | greedy | anneal
    t0: float = 0.1
    cooling: float = 0.995
    grid: int = 8  # rotation-field cell resolution

    def __post_init__(self):
        if self.kind not in ("random", "greedy", "anneal"):
            raise InvalidParameterError(f"unknown search kind {self.kind!r}")
        if self.t0 <= 0.0 or not (0.0 < self.cooling < 1.0):
            raise InvalidParameterError("need t0 > 0 and cooling in (0, 1)")
        if self.grid < 1:
            raise InvalidParameterError("rotation-field grid must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    base: BaseMap
    cocycle: Cocycle
    epsilon: float
    trials: int
    seed: int
    estimate: EstimateSettings
    classify_settings: HyperbolicitySettings = HyperbolicitySettings()
    search: SearchSettings = SearchSettings()
    audit_grid: int = 32
    profile_orbits: int = 5
    profile_steps: int = 10000

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise InvalidParameterError("epsilon must be >= 0")
        if self.trials < 0:
            raise InvalidParameterError("trials must be >= 0")
        if self.audit_grid < 2:
            raise InvalidParameterError("audit grid must be >= 2")


@dataclass(frozen=True)
class TrialRecord:
    index: int
    move: str
    lambda_hat: float
    budget: float
    accepted: bool


@dataclass(frozen=True)
class ExperimentResult:
    best_cocycle: Cocycle
    lambda_before: float
    lambda_after: float
    verdict_before: ClassificationVerdict
    verdict_after: ClassificationVerdict
    trials_run: int
    wall_time: float
    budget_used: float
    success: bool
    trail: tuple[TrialRecord, ...]


def _full_lambda(cocycle: Cocycle, base: BaseMap, cfg: ExperimentConfig) -> float:
    return integrated_exponent(
        cocycle, base, cfg.estimate.measure, cfg.estimate.n_steps
    ).lambda_bar


def _cheap_lambda(cocycle: Cocycle, base: BaseMap, cfg: ExperimentConfig) -> float:
    steps = min(cfg.profile_steps, cfg.estimate.n_steps)
    measure = LebesgueSpec(n_orbits=cfg.profile_orbits, seed=cfg.seed + 101)
    return integrated_exponent(cocycle, base, measure, steps).lambda_bar


def _sup_cocycle_norm(cocycle: Cocycle, grid: int) -> float:
    ev = cocycle.eval_fn()
    worst = 0.0
    inv_g = 1.0 / grid
    for i in range(grid):
        for j in range(grid):
            a, b, c, d = ev(i * inv_g, j * inv_g)
            nrm = op_norm(a, b, c, d)
            if nrm > worst:
                worst = nrm
    return worst


def _angle_cap(epsilon: float, sup_norm: float) -> float:
    """Largest rotation angle with sup-distance to the base <= epsilon.

    A pointwise rotation by angle t changes the cocycle and its inverse by
    at most 2 sin(|t|/2) ||B|| each, so 4 sin(cap/2) sup||B|| <= epsilon.
    Shrunk by a hair so budgets at the cap stay strictly inside epsilon.
    """
    s = epsilon * (1.0 - 1e-9) / (4.0 * max(sup_norm, 1e-12))
    return 2.0 * math.asin(min(1.0, s))


def _boost_cap(epsilon: float, sup_norm: float) -> float:
    return epsilon * (1.0 - 1e-9) / (2.0 * max(sup_norm, 1e-12))


def _rotation_candidate(
    original: Cocycle, grid: int, angles: list[float], max_angle: float
) -> Cocycle:
    return PiecewisePerturbedCocycle(
        base=original, grid=grid, angles=tuple(angles), max_angle=max(max_angle, 1e-12)
    )


def _start_gate(n_steps: int) -> float:
    """Finite-n threshold for 'numerically trivial' starting spectra.

    The estimate of a genuinely trivial cocycle can sit as high as
    log(n)/n (parabolic norm growth), so the gate is LAMBDA_MIN plus twice
    that floor.
    """
    return LAMBDA_MIN + 2.0 * math.log(max(n_steps, 3)) / n_steps


def simple_spectrum_search(cfg: ExperimentConfig) -> ExperimentResult:
    """Search the sup-norm epsilon ball for the largest positive exponent.

    Moves are diagonal boosts composed pointwise and piecewise rotation
    fields.  The incumbent (including the unperturbed start) is never
    abandoned for a worse candidate, so the reported exponent cannot
    decrease.  Success means the final exponent clears LAMBDA_MIN, i.e.
    the spectrum separated.
    """
    t_begin = time.monotonic()
    lam_before = _full_lambda(cfg.cocycle, cfg.base, cfg)
    if lam_before > _start_gate(cfg.estimate.n_steps):
        raise SearchPreconditionError(
            f"already simple/hyperbolic: starting exponent {lam_before:.6f}"
        )
    verdict_before = spectrum_class(
        cfg.cocycle, cfg.base, cfg.estimate, cfg.classify_settings
    )
    rng = random.Random(cfg.seed)
    sup_norm = _sup_cocycle_norm(cfg.cocycle, cfg.audit_grid)
    a_cap = _angle_cap(cfg.epsilon, sup_norm)
    b_cap = _boost_cap(cfg.epsilon, sup_norm)
    trail: list[TrialRecord] = []
    incumbent = cfg.cocycle
    incumbent_cheap = _cheap_lambda(cfg.cocycle, cfg.base, cfg)

    def propose(step_scale: float) -> tuple[Cocycle, str]:
        if b_cap > 0.0 and rng.random() < 0.5:
            t = rng.uniform(0.0, b_cap * step_scale)
            return DiagonalBoostCocycle(base=cfg.cocycle, t=t), "boost"
        g = cfg.search.grid
        angles = [rng.uniform(-a_cap, a_cap) * step_scale for _ in range(g * g)]
        return _rotation_candidate(cfg.cocycle, g, angles, a_cap), "rotation"

    trials_run = 0
    if cfg.epsilon > 0.0:
        for k in range(cfg.trials):
            scale = 1.0 if cfg.search.kind == "random" else max(
                0.1, cfg.search.cooling ** k
            )
            candidate, move = propose(scale)
            budget = sup_distance(candidate, cfg.cocycle, cfg.audit_grid)
            trials_run += 1
            if budget > cfg.epsilon + 1e-12:
                trail.append(TrialRecord(k, move, float("nan"), budget, False))
                continue
            lam = _cheap_lambda(candidate, cfg.base, cfg)
            accepted = lam > incumbent_cheap
            if accepted:
                incumbent, incumbent_cheap = candidate, lam
            trail.append(TrialRecord(k, move, lam, budget, accepted))

    lam_after = _full_lambda(incumbent, cfg.base, cfg)
    best = incumbent
    if lam_after < lam_before:
        # cheap-profile winner failed the full re-estimate; keep the start
        best, lam_after = cfg.cocycle, lam_before
    verdict_after = spectrum_class(best, cfg.base, cfg.estimate, cfg.classify_settings)
    budget_used = sup_distance(best, cfg.cocycle, cfg.audit_grid)
    assert budget_used <= cfg.epsilon + 1e-12, "budget audit failed on emitted candidate"
    return ExperimentResult(
        best_cocycle=best,
        lambda_before=lam_before,
        lambda_after=lam_after,
        verdict_before=verdict_before,
        verdict_after=verdict_after,
        trials_run=trials_run,
        wall_time=time.monotonic() - t_begin,
        budget_used=budget_used,
        success=lam_after > LAMBDA_MIN,
        trail=tuple(trail),
    )


def exponent_lowering_search(cfg: ExperimentConfig) -> ExperimentResult:
    """Anneal piecewise rotation fields to push the integrated exponent down.

    Small per-cell rotations realign the most-expanded direction toward the
    contracted one along orbit blocks.  Uniformly hyperbolic starts are
    refused (they resist sup-norm-small exponent collapse); incumbent
    keeping guarantees the exponent never goes up.
    """
    t_begin = time.monotonic()
    verdict_before = spectrum_class(
        cfg.cocycle, cfg.base, cfg.estimate, cfg.classify_settings
    )
    if isinstance(verdict_before, UniformlyHyperbolic):
        raise SearchPreconditionError("hyperbolic: lowering out of scope")
    lam_before = _full_lambda(cfg.cocycle, cfg.base, cfg)
    trail: list[TrialRecord] = []
    trials_run = 0
    best = cfg.cocycle
    lam_after = lam_before

    if cfg.epsilon > 0.0 and lam_before > LAMBDA_MIN and cfg.trials > 0:
        rng = random.Random(cfg.seed)
        sup_norm = _sup_cocycle_norm(cfg.cocycle, cfg.audit_grid)
        a_cap = _angle_cap(cfg.epsilon, sup_norm)
        g = cfg.search.grid
        current = [0.0] * (g * g)
        current_energy = _cheap_lambda(cfg.cocycle, cfg.base, cfg)
        best_angles = list(current)
        best_energy = current_energy
        temp = cfg.search.t0
        rejected_streak = 0
        for k in range(cfg.trials):
            trials_run += 1
            proposal = list(current)
            if cfg.search.kind == "random":
                proposal = [rng.uniform(-a_cap, a_cap) for _ in range(g * g)]
            else:
                cell = rng.randrange(g * g)
                sigma = a_cap * max(0.05, temp / cfg.search.t0)
                proposal[cell] = max(
                    -a_cap, min(a_cap, proposal[cell] + rng.gauss(0.0, sigma))
                )
            candidate = _rotation_candidate(cfg.cocycle, g, proposal, a_cap)
            budget = sup_distance(candidate, cfg.cocycle, cfg.audit_grid)
            if budget > cfg.epsilon + 1e-12:
                trail.append(TrialRecord(k, "rotation", float("nan"), budget, False))
                continue
            energy = _cheap_lambda(candidate, cfg.base, cfg)
            delta = energy - current_energy
            accept = delta < 0.0 or (
                cfg.search.kind == "anneal"
                and temp > 0.0
                and rng.random() < math.exp(-delta / temp)
            )
            if accept:
                current, current_energy = proposal, energy
                rejected_streak = 0
            else:
                rejected_streak += 1
            if energy < best_energy:
                best_angles, best_energy = list(proposal), energy
            trail.append(TrialRecord(k, "rotation", energy, budget, accept))
            temp *= cfg.search.cooling
            if rejected_streak >= 100:
                temp = cfg.search.t0
                current, current_energy = list(best_angles), best_energy
                rejected_streak = 0
        if any(t != 0.0 for t in best_angles):
            candidate = _rotation_candidate(cfg.cocycle, g, best_angles, a_cap)
            lam_candidate = _full_lambda(candidate, cfg.base, cfg)
            if lam_candidate < lam_before:
                best, lam_after = candidate, lam_candidate

    verdict_after = spectrum_class(best, cfg.base, cfg.estimate, cfg.classify_settings)
    budget_used = sup_distance(best, cfg.cocycle, cfg.audit_grid)
    assert budget_used <= cfg.epsilon + 1e-12, "budget audit failed on emitted candidate"
    return ExperimentResult(
        best_cocycle=best,
        lambda_before=lam_before,
        lambda_after=lam_after,
        verdict_before=verdict_before,
        verdict_after=verdict_after,
        trials_run=trials_run,
        wall_time=time.monotonic() - t_begin,
        budget_used=budget_used,
        success=lam_after < lam_before,
        trail=tuple(trail),
    )


@dataclass(frozen=True)
class ProbeReport:
    max_uplift: float
    samples: int
    lambda_original: float
    c_estimate: float


def semicontinuity_probe(cfg: ExperimentConfig, delta: float) -> ProbeReport:
    """Max increase of the integrated exponent over random delta-perturbations.

    Perturbs the cocycle within sup-distance delta (rotation fields and
    diagonal boosts) and, for shear-perturbed bases, jitters the shear
    amplitude within its construction bound.  Reports
    max(Lambda_perturbed - Lambda_original, 0) and the empirical constant
    c = max_uplift / delta.
    """
    if delta < 0.0:
        raise InvalidParameterError("delta must be >= 0")
    lam0 = _full_lambda(cfg.cocycle, cfg.base, cfg)
    rng = random.Random(cfg.seed)
    sup_norm = _sup_cocycle_norm(cfg.cocycle, cfg.audit_grid)
    a_cap = _angle_cap(delta, sup_norm)
    b_cap = _boost_cap(delta, sup_norm)
    g = cfg.search.grid
    max_uplift = 0.0
    samples = 0
    for _ in range(cfg.trials):
        base = cfg.base
        move = rng.randrange(3)
        if move == 0:
            angles = [rng.uniform(-a_cap, a_cap) for _ in range(g * g)]
            candidate = _rotation_candidate(cfg.cocycle, g, angles, a_cap)
        elif move == 1:
            candidate = DiagonalBoostCocycle(
                base=cfg.cocycle, t=rng.uniform(0.0, b_cap)
            )
        else:
            candidate = cfg.cocycle
            if isinstance(cfg.base, PerturbedToral):
                jitter = rng.uniform(-delta, delta)
                eps_new = min(
                    max(cfg.base.eps + jitter, 0.0), PERTURBATION_EPS_MAX
                )
                base = PerturbedToral(cfg.base.linear, eps_new)
        if candidate is not cfg.cocycle:
            budget = sup_distance(candidate, cfg.cocycle, cfg.audit_grid)
            if budget > delta + 1e-12:
                continue
        samples += 1
        lam = _full_lambda(candidate, base, cfg)
        uplift = lam - lam0
        if uplift > max_uplift:
            max_uplift = uplift
    c_estimate = max_uplift / delta if delta > 0.0 else 0.0
    return ProbeReport(
        max_uplift=max_uplift,
        samples=samples,
        lambda_original=lam0,
        c_estimate=c_estimate,
    )


@dataclass(frozen=True)
class SchrodingerEnergyScan:
    e_min: float
    e_max: float
    steps: int


@dataclass(frozen=True)
class StandardMapKScan:
    k_min: float
    k_max: float
    steps: int


@dataclass(frozen=True)
class PerturbationEpsScan:
    eps_min: float
    eps_max: float
    steps: int


ScanFamily = SchrodingerEnergyScan | StandardMapKScan | PerturbationEpsScan


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[dict, ...]


def parameter_scan(
    family: ScanFamily,
    base: BaseMap,
    estimate_cfg: EstimateSettings,
    classify_cfg: HyperbolicitySettings = HyperbolicitySettings(),
) -> Table:
    """Exponent and verdict along a one-parameter family.

    Schrodinger scans sweep the energy of the transfer-matrix cocycle over
    the given base; standard-map scans sweep the kick strength with the
    derivative cocycle; eps scans sweep the shear amplitude of a perturbed
    linear base with its derivative cocycle.
    """
    lo, hi, steps = {
        SchrodingerEnergyScan: lambda f: (f.e_min, f.e_max, f.steps),
        StandardMapKScan: lambda f: (f.k_min, f.k_max, f.steps),
        PerturbationEpsScan: lambda f: (f.eps_min, f.eps_max, f.steps),
    }[type(family)](family)
    if steps < 2:
        raise InvalidParameterError("scan needs steps >= 2")
    if hi < lo:
        raise InvalidParameterError("scan range is empty")
    rows = []
    for k in range(steps):
        param = lo + (hi - lo) * k / (steps - 1)
        if isinstance(family, SchrodingerEnergyScan):
            row_base = base
            cocycle: Cocycle = SchrodingerCocycle(energy=param)
        elif isinstance(family, StandardMapKScan):
            row_base = StandardMap(K=param)
            cocycle = derivative_cocycle(row_base)
        else:
            linear = base.linear if isinstance(base, PerturbedToral) else base
            if not isinstance(linear, LinearToral):
                raise InvalidParameterError(
                    "eps scan needs a linear or perturbed-linear base"
                )
            row_base = PerturbedToral(linear, param)
            cocycle = derivative_cocycle(row_base)
        verdict = spectrum_class(cocycle, row_base, estimate_cfg, classify_cfg)
        integrated = integrated_exponent(
            cocycle, row_base, estimate_cfg.measure, estimate_cfg.n_steps
        )
        rows.append(
            {
                "param": param,
                "lambda_bar": integrated.lambda_bar,
                "ci95": integrated.ci95 if integrated.ci95 is not None else 0.0,
                "verdict": verdict_name(verdict),
            }
        )
    return Table(columns=("param", "lambda_bar", "ci95", "verdict"), rows=tuple(rows))
