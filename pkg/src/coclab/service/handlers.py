"""Service operations: pydantic request in, pydantic response out.

The HTTP routes and the CLI thin client both call these functions; they
are the single place where wire models meet the core package.
"""

from __future__ import annotations

import math

from .. import classify as _classify
from .. import conjugacy as _conjugacy
from .. import experiments as _exp
from ..lyapunov import integrated_exponent
from ..torus import PerturbedToral
from . import models as m


def run_estimate(req: m.EstimateRequest) -> m.EstimateResponse:
    base = req.base.to_base_map()
    cocycle = req.cocycle.to_cocycle(base)
    result = integrated_exponent(
        cocycle, base, req.estimate.to_measure(), req.estimate.n_steps
    )
    rows = [
        m.OrbitRow(
            orbit_id=o.orbit_id,
            start_u=o.start.u,
            start_v=o.start.v,
            lam=o.estimate.value,
            n=o.estimate.n,
            renorms=o.estimate.renorm_count,
            stderr=o.estimate.stderr,
        )
        for o in result.orbits
    ]
    return m.EstimateResponse(
        lambda_bar=result.lambda_bar,
        ci95=result.ci95,
        seed=req.estimate.seed,
        orbits=rows,
    )


def run_classify(req: m.ClassifyRequest) -> m.ClassifyResponse:
    base = req.base.to_base_map()
    cocycle = req.cocycle.to_cocycle(base)
    verdict = _classify.spectrum_class(
        cocycle, base, req.estimate.to_settings(), req.classify.to_settings()
    )
    name = _classify.verdict_name(verdict)
    if isinstance(verdict, _classify.UniformlyHyperbolic):
        return m.ClassifyResponse(
            verdict=name, lam=verdict.lam, cone_margin=verdict.cone_margin
        )
    if isinstance(verdict, _classify.TrivialSpectrum):
        return m.ClassifyResponse(verdict=name, lambda_bound=verdict.lambda_bound)
    if isinstance(verdict, _classify.SimpleNonuniform):
        return m.ClassifyResponse(verdict=name, lam=verdict.lam)
    return m.ClassifyResponse(verdict=name, reason=verdict.reason)


def run_scan(req: m.ScanRequest) -> m.ScanResponse:
    base = req.base.to_base_map()
    family: _exp.ScanFamily
    if req.family == "schrodinger_energy":
        family = _exp.SchrodingerEnergyScan(req.start, req.stop, req.steps)
    elif req.family == "standard_map_K":
        family = _exp.StandardMapKScan(req.start, req.stop, req.steps)
    else:
        family = _exp.PerturbationEpsScan(req.start, req.stop, req.steps)
    table = _exp.parameter_scan(
        family, base, req.estimate.to_settings(), req.classify.to_settings()
    )
    return m.ScanResponse(
        rows=[
            m.ScanRow(
                param=r["param"],
                lambda_bar=r["lambda_bar"],
                ci95=r["ci95"],
                verdict=r["verdict"],
            )
            for r in table.rows
        ]
    )


def _experiment_config(req: m.PerturbRequest) -> _exp.ExperimentConfig:
    base = req.base.to_base_map()
    cocycle = req.cocycle.to_cocycle(base)
    return _exp.ExperimentConfig(
        base=base,
        cocycle=cocycle,
        epsilon=req.epsilon,
        trials=req.trials,
        seed=req.seed,
        estimate=req.estimate.to_settings(),
        classify_settings=req.classify.to_settings(),
        search=_exp.SearchSettings(
            kind=req.search.kind,
            t0=req.search.t0,
            cooling=req.search.cooling,
            grid=req.search.grid,
        ),
        profile_orbits=req.profile_orbits,
        profile_steps=req.profile_steps,
    )


def run_perturb(req: m.PerturbRequest) -> m.PerturbResponse:
    cfg = _experiment_config(req)
    if req.mode == "probe":
        report = _exp.semicontinuity_probe(cfg, req.delta)
        return m.PerturbResponse(
            mode=req.mode,
            max_uplift=report.max_uplift,
            c_estimate=report.c_estimate,
            lambda_original=report.lambda_original,
            samples=report.samples,
            trials_run=report.samples,
        )
    runner = (
        _exp.simple_spectrum_search if req.mode == "raise" else _exp.exponent_lowering_search
    )
    result = runner(cfg)
    trail = [
        m.TrialRow(
            index=t.index,
            move=t.move,
            lambda_hat=None if math.isnan(t.lambda_hat) else t.lambda_hat,
            budget=t.budget,
            accepted=t.accepted,
        )
        for t in result.trail
    ]
    return m.PerturbResponse(
        mode=req.mode,
        lambda_before=result.lambda_before,
        lambda_after=result.lambda_after,
        verdict_before=_classify.verdict_name(result.verdict_before),
        verdict_after=_classify.verdict_name(result.verdict_after),
        trials_run=result.trials_run,
        wall_time=result.wall_time,
        budget_used=result.budget_used,
        success=result.success,
        trail=trail,
    )


def run_conjugacy(req: m.ConjugacyRequest) -> m.ConjugacyResponse:
    f = req.base.to_base_map()
    g = PerturbedToral(f, req.eps)
    h = _conjugacy.compute_conjugacy(f, g, req.resolution, req.tol)
    fit = _conjugacy.holder_exponent_estimate(h, pairs=2000, seed=0)
    rows = None
    if req.include_field:
        rows = [
            m.FieldRow(i=i, j=j, du=float(h.du[i, j]), dv=float(h.dv[i, j]))
            for i in range(h.resolution)
            for j in range(h.resolution)
        ]
    return m.ConjugacyResponse(
        resolution=h.resolution,
        residual=h.residual,
        max_displacement=h.max_displacement,
        gamma_hat=fit.gamma_hat,
        gamma_r2=fit.r2,
        gamma_degenerate=fit.degenerate,
        field=rows,
    )
