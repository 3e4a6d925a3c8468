"""coclab command line: a thin client over the service layer.

Subcommands estimate / classify / scan / perturb / conjugacy parse a
sectioned config file, build the service request, run it (in process by
default, over HTTP against a running server with --server), and own all
file writes.  Stdout carries exactly one summary line; data goes to files;
exit codes: 0 definite result, 2 inconclusive verdict, 1 error.
"""

from __future__ import annotations

import dataclasses
import json
import time
from pathlib import Path
from typing import Optional

import click

from . import configio
from .cocycles import piecewise_angles_from_csv
from .errors import CoclabError
from .experiments import Table
from .service import handlers
from .service import models as m

_SUBCOMMANDS = ("estimate", "classify", "scan", "perturb", "conjugacy")


def _load_config(config_path: str) -> tuple[configio.RunConfig, Path]:
    path = Path(config_path)
    cfg = configio.parse_config(path.read_text())
    return cfg, path.parent


def _map_spec(cfg: configio.RunConfig) -> m.MapSpec:
    b = cfg.base
    return m.MapSpec(
        kind=b.kind,
        l11=b.l11,
        l12=b.l12,
        l21=b.l21,
        l22=b.l22,
        eps=b.eps,
        K=b.K,
        alpha=b.alpha,
        beta=b.beta,
    )


def _cocycle_spec(cfg: configio.RunConfig, config_dir: Path) -> m.CocycleSpec:
    c = cfg.cocycle
    angles = None
    if c.kind == "piecewise" and c.angles_file:
        path = Path(c.angles_file)
        if not path.is_absolute():
            path = config_dir / path
        grid, parsed = piecewise_angles_from_csv(path.read_text())
        return m.CocycleSpec(
            kind="piecewise",
            v11=c.v11,
            v12=c.v12,
            v21=c.v21,
            v22=c.v22,
            nu=c.nu,
            grid=grid,
            angles=list(parsed),
        )
    return m.CocycleSpec(
        kind=c.kind,
        v11=c.v11,
        v12=c.v12,
        v21=c.v21,
        v22=c.v22,
        energy=c.energy,
        potential=c.potential,
        amp=c.amp,
        nu=c.nu,
        grid=c.grid,
        angles=angles,
        angle0=c.angle0,
        angle_amp=c.angle_amp,
        angle_ku=c.angle_ku,
        angle_kv=c.angle_kv,
    )


def _estimate_spec(cfg: configio.RunConfig, seed: Optional[int]) -> m.EstimateSpec:
    e = cfg.estimate
    return m.EstimateSpec(
        n_steps=e.n_steps,
        n_orbits=e.n_orbits,
        seed=e.seed if seed is None else seed,
        measure=e.measure,
    )


def _classify_spec(cfg: configio.RunConfig) -> m.ClassifySpec:
    return m.ClassifySpec(grid=cfg.classify.grid, n_window=cfg.classify.n_window)


def _call(server: Optional[str], endpoint: str, request_model, response_type):
    """Dispatch a request in process or to a remote coclab server."""
    if server is None:
        fn = {
            "estimate": handlers.run_estimate,
            "classify": handlers.run_classify,
            "scan": handlers.run_scan,
            "perturb": handlers.run_perturb,
            "conjugacy": handlers.run_conjugacy,
        }[endpoint]
        return fn(request_model)
    import httpx

    reply = httpx.post(
        server.rstrip("/") + "/" + endpoint,
        json=request_model.model_dump(),
        timeout=600.0,
    )
    if reply.status_code != 200:
        raise CoclabError(f"server error {reply.status_code}: {reply.text}")
    return response_type.model_validate(reply.json())


def _write(out_dir: Path, name: str, content: str, outputs: list[str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(content)
    outputs.append(name)


def _finish(cfg, out_dir: Path, outputs: list[str], t0: float) -> None:
    record = configio.RunRecord(
        config_hash=configio.config_hash(cfg),
        tool_version=configio.TOOL_VERSION,
        wall_time=time.monotonic() - t0,
        outputs=tuple(outputs),
    )
    (out_dir / "run_record.json").write_text(record.to_json() + "\n")


def run(
    cfg: configio.RunConfig,
    subcommand: str,
    *,
    config_dir: Path = Path("."),
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
    server: Optional[str] = None,
    results_file: Optional[str] = None,
) -> int:
    """Dispatch one subcommand; returns the process exit code."""
    if subcommand not in _SUBCOMMANDS:
        raise CoclabError(f"unknown subcommand {subcommand!r}")
    t0 = time.monotonic()
    out = Path(out_dir if out_dir is not None else cfg.run.out_dir)
    outputs: list[str] = []
    try:
        if subcommand == "estimate":
            req = m.EstimateRequest(
                base=_map_spec(cfg),
                cocycle=_cocycle_spec(cfg, config_dir),
                estimate=_estimate_spec(cfg, seed),
            )
            resp = _call(server, "estimate", req, m.EstimateResponse)
            orbit_lines = ["orbit_id,start_u,start_v,lambda,n,renorms"]
            for o in resp.orbits:
                orbit_lines.append(
                    f"{o.orbit_id},{configio.format_float(o.start_u)},"
                    f"{configio.format_float(o.start_v)},{configio.format_float(o.lam)},"
                    f"{o.n},{o.renorms}"
                )
            _write(out, "orbits.csv", "\n".join(orbit_lines) + "\n", outputs)
            summary = {
                "lambda_bar": resp.lambda_bar,
                "ci95": resp.ci95,
                "seed": resp.seed,
            }
            _write(out, "summary.jsonl", configio.summary_jsonl(summary), outputs)
            _finish(cfg, out, outputs, t0)
            ci = "none" if resp.ci95 is None else f"{resp.ci95:.6g}"
            click.echo(f"lambda_bar={resp.lambda_bar:.6g} ci95={ci} orbits={len(resp.orbits)}")
            return 0

        if subcommand == "classify":
            req = m.ClassifyRequest(
                base=_map_spec(cfg),
                cocycle=_cocycle_spec(cfg, config_dir),
                estimate=_estimate_spec(cfg, seed),
                classify=_classify_spec(cfg),
            )
            resp = _call(server, "classify", req, m.ClassifyResponse)
            line = {
                "verdict": resp.verdict,
                "lambda": resp.lam if resp.lam is not None else resp.lambda_bound,
                "cone_margin": resp.cone_margin,
                "witness": resp.witness,
            }
            if resp.reason is not None:
                line["reason"] = resp.reason
            _write(out, "verdict.jsonl", configio.summary_jsonl(line), outputs)
            _finish(cfg, out, outputs, t0)
            click.echo(f"verdict={resp.verdict}")
            return 2 if resp.verdict == "inconclusive" else 0

        if subcommand == "scan":
            x = cfg.experiment
            req = m.ScanRequest(
                family=x.scan_family,
                start=x.scan_min,
                stop=x.scan_max,
                steps=x.scan_steps,
                base=_map_spec(cfg),
                estimate=_estimate_spec(cfg, seed),
                classify=_classify_spec(cfg),
            )
            resp = _call(server, "scan", req, m.ScanResponse)
            table = Table(
                columns=("param", "lambda_bar", "ci95", "verdict"),
                rows=tuple(r.model_dump() for r in resp.rows),
            )
            _write(out, "scan.csv", configio.scan_table_csv(table), outputs)
            _write(
                out,
                "scan.dat",
                configio.emit_plot_data(table, "param", ("lambda_bar",), ("ci95",)),
                outputs,
            )
            _finish(cfg, out, outputs, t0)
            click.echo(f"rows={len(resp.rows)} family={x.scan_family}")
            return 0

        if subcommand == "perturb":
            x = cfg.experiment
            if x.mode not in ("raise", "lower", "probe"):
                raise CoclabError(
                    f"[experiment].mode = {x.mode} is not a perturb mode; "
                    "use --mode raise|lower|probe"
                )
            req = m.PerturbRequest(
                mode=x.mode,
                base=_map_spec(cfg),
                cocycle=_cocycle_spec(cfg, config_dir),
                epsilon=x.epsilon,
                trials=x.trials,
                seed=x.seed if seed is None else seed,
                delta=x.delta,
                estimate=_estimate_spec(cfg, seed),
                classify=_classify_spec(cfg),
                search=m.SearchSpec(
                    kind=x.search, t0=x.t0, cooling=x.cooling, grid=x.grid
                ),
            )
            resp = _call(server, "perturb", req, m.PerturbResponse)
            lines = []
            for t in resp.trail:
                lines.append(
                    json.dumps(
                        {
                            "trial": t.index,
                            "move": t.move,
                            "lambda_hat": t.lambda_hat,
                            "budget": t.budget,
                            "accepted": t.accepted,
                        },
                        sort_keys=True,
                    )
                )
            summary: dict = {"mode": resp.mode}
            if resp.mode == "probe":
                summary.update(
                    max_uplift=resp.max_uplift,
                    c_estimate=resp.c_estimate,
                    lambda_original=resp.lambda_original,
                    samples=resp.samples,
                )
            else:
                summary.update(
                    lambda_before=resp.lambda_before,
                    lambda_after=resp.lambda_after,
                    verdict_before=resp.verdict_before,
                    verdict_after=resp.verdict_after,
                    trials_run=resp.trials_run,
                    budget_used=resp.budget_used,
                    success=resp.success,
                )
            lines.append(json.dumps(summary, sort_keys=True))
            name = results_file if results_file else "results.jsonl"
            _write(out, name, "\n".join(lines) + "\n", outputs)
            _finish(cfg, out, outputs, t0)
            if resp.mode == "probe":
                click.echo(f"mode=probe max_uplift={resp.max_uplift:.6g} samples={resp.samples}")
            else:
                click.echo(
                    f"mode={resp.mode} lambda_before={resp.lambda_before:.6g} "
                    f"lambda_after={resp.lambda_after:.6g} verdict_after={resp.verdict_after}"
                )
            return 0

        # conjugacy
        cj = cfg.conjugacy
        req = m.ConjugacyRequest(
            base=_map_spec(cfg),
            eps=cj.eps,
            resolution=cj.resolution,
            tol=cj.tol,
            include_field=True,
        )
        resp = _call(server, "conjugacy", req, m.ConjugacyResponse)
        header = f"conjugacy v1 resolution={resp.resolution} residual={resp.residual!r}"
        body = [header]
        for row in resp.field or []:
            body.append(f"{row.i} {row.j} {row.du!r} {row.dv!r}")
        _write(out, "conjugacy.txt", "\n".join(body) + "\n", outputs)
        summary = {
            "residual": resp.residual,
            "resolution": resp.resolution,
            "max_displacement": resp.max_displacement,
            "gamma_hat": resp.gamma_hat,
            "gamma_r2": resp.gamma_r2,
        }
        _write(out, "conjugacy_summary.jsonl", configio.summary_jsonl(summary), outputs)
        _finish(cfg, out, outputs, t0)
        click.echo(
            f"residual={resp.residual:.6g} resolution={resp.resolution} "
            f"gamma_hat={resp.gamma_hat:.4g}"
        )
        return 0
    except CoclabError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        return 1


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--server", type=str, default=None, help="URL of a running coclab server.")
@click.pass_context
def main(ctx, config_path, seed, out_dir, server):
    """Numerical laboratory for SL(2,R) cocycles over torus maps."""
    ctx.ensure_object(dict)
    ctx.obj.update(config_path=config_path, seed=seed, out_dir=out_dir, server=server)


def _dispatch(ctx, subcommand: str, **kwargs) -> None:
    opts = ctx.obj
    if not opts.get("config_path"):
        click.echo("a --config file is required", err=True)
        ctx.exit(1)
    try:
        cfg, config_dir = _load_config(opts["config_path"])
    except CoclabError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        ctx.exit(1)
        return
    code = run(
        cfg,
        subcommand,
        config_dir=config_dir,
        seed=opts.get("seed"),
        out_dir=opts.get("out_dir"),
        server=opts.get("server"),
        **kwargs,
    )
    ctx.exit(code)


@main.command()
@click.pass_context
def estimate(ctx):
    """Estimate the integrated top exponent."""
    _dispatch(ctx, "estimate")


@main.command()
@click.pass_context
def classify(ctx):
    """Emit a trichotomy verdict (exit 2 when inconclusive)."""
    _dispatch(ctx, "classify")


@main.command()
@click.pass_context
def scan(ctx):
    """Scan a one-parameter family and write CSV plus plot data."""
    _dispatch(ctx, "scan")


@main.command()
@click.option("--mode", type=click.Choice(["raise", "lower", "probe"]), default=None)
@click.option("--epsilon", type=float, default=None)
@click.option("--trials", type=int, default=None)
@click.option("--seed", "local_seed", type=int, default=None)
@click.option("--out", "results_file", type=str, default=None,
              help="Name of the per-trial JSON-lines file.")
@click.pass_context
def perturb(ctx, mode, epsilon, trials, local_seed, results_file):
    """Run a perturbation experiment, one JSON line per trial."""
    opts = ctx.obj
    if not opts.get("config_path"):
        click.echo("a --config file is required", err=True)
        ctx.exit(1)
    try:
        cfg, config_dir = _load_config(opts["config_path"])
    except CoclabError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        ctx.exit(1)
        return
    x = cfg.experiment
    overrides = {}
    if mode is not None:
        overrides["mode"] = mode
    if epsilon is not None:
        overrides["epsilon"] = epsilon
    if trials is not None:
        overrides["trials"] = trials
    if local_seed is not None:
        overrides["seed"] = local_seed
    if overrides:
        cfg = dataclasses.replace(cfg, experiment=dataclasses.replace(x, **overrides))
    code = run(
        cfg,
        "perturb",
        config_dir=config_dir,
        seed=opts.get("seed"),
        out_dir=opts.get("out_dir"),
        server=opts.get("server"),
        results_file=results_file,
    )
    ctx.exit(code)


@main.command()
@click.pass_context
def conjugacy(ctx):
    """Compute and serialize the conjugacy to the perturbed map."""
    _dispatch(ctx, "conjugacy")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the coclab HTTP service."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
