"""Sectioned key = value configuration and the laboratory's file formats.

The config grammar is flat: ``[section]`` headers, ``key = value`` lines,
``#`` comments.  Unknown keys are hard errors; parsing validates every
numeric field against its module's preconditions and reports all
violations at once.  Output formats: CSV for per-orbit tables, JSON-lines
for trial streams, ``#``-headed whitespace columns for plot data.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path
from typing import Optional

from .classify import EstimateSettings, HyperbolicitySettings
from .cocycles import (
    Cocycle,
    ConstantCocycle,
    CosinePotential,
    PiecewisePerturbedCocycle,
    PointwiseRotatedCocycle,
    SchrodingerCocycle,
    ZeroPotential,
    derivative_cocycle,
    piecewise_angles_from_csv,
)
from .errors import ConfigError, EmptyTableError, InvalidParameterError
from .experiments import Table
from .lyapunov import (
    LebesgueSpec,
    MeasureSpec,
    PeriodicEquidistributionSpec,
    SingleOrbitSpec,
)
from .matrices import Mat2
from .torus import (
    PERTURBATION_EPS_MAX,
    BaseMap,
    LinearToral,
    PerturbedToral,
    Rotation,
    StandardMap,
    TorusPoint,
)

TOOL_VERSION = "0.1.0"


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    out_dir: str = "."


@dataclass(frozen=True)
class BaseSection:
    kind: str = "linear_toral"
    l11: int = 2
    l12: int = 1
    l21: int = 1
    l22: int = 1
    eps: float = 0.0
    K: float = 1.0
    alpha: float = 0.5
    beta: float = 0.30901699437494745


@dataclass(frozen=True)
class CocycleSection:
    kind: str = "constant"
    v11: float = 1.0
    v12: float = 0.0
    v21: float = 0.0
    v22: float = 1.0
    energy: float = 3.0
    potential: str = "zero"
    amp: float = 1.0
    nu: float = 1.0
    grid: int = 8
    angles_file: str = ""
    angle0: float = 0.0
    angle_amp: float = 0.0
    angle_ku: int = 1
    angle_kv: int = 0


@dataclass(frozen=True)
class EstimateSection:
    n_steps: int = 10000
    n_orbits: int = 10
    seed: int = 0
    measure: str = "lebesgue"


@dataclass(frozen=True)
class ClassifySection:
    grid: int = 16
    n_window: int = 8


@dataclass(frozen=True)
class ExperimentSection:
    mode: str = "raise"
    epsilon: float = 0.1
    trials: int = 100
    seed: int = 0
    delta: float = 0.01
    search: str = "random"
    t0: float = 0.1
    cooling: float = 0.995
    grid: int = 8
    scan_family: str = "schrodinger_energy"
    scan_min: float = 2.5
    scan_max: float = 3.5
    scan_steps: int = 3


@dataclass(frozen=True)
class ConjugacySection:
    eps: float = 0.01
    resolution: int = 64
    tol: float = 1e-4


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = RunSection()
    base: BaseSection = BaseSection()
    cocycle: CocycleSection = CocycleSection()
    estimate: EstimateSection = EstimateSection()
    classify: ClassifySection = ClassifySection()
    experiment: ExperimentSection = ExperimentSection()
    conjugacy: ConjugacySection = ConjugacySection()


_SECTIONS = {
    "run": RunSection,
    "base": BaseSection,
    "cocycle": CocycleSection,
    "estimate": EstimateSection,
    "classify": ClassifySection,
    "experiment": ExperimentSection,
    "conjugacy": ConjugacySection,
}

_BASE_KINDS = ("linear_toral", "perturbed_toral", "standard_map", "rotation")
_COCYCLE_KINDS = ("constant", "schrodinger", "derivative", "piecewise", "rotated")


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate; raises ConfigError listing all violations."""
    violations: list[str] = []
    sections: dict[str, dict[str, str]] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                violations.append(f"line {lineno}: unknown section [{name}]")
                current = None
            else:
                current = name
                sections.setdefault(name, {})
            continue
        if "=" not in line:
            violations.append(f"line {lineno}: expected key = value, got {raw.strip()!r}")
            continue
        if current is None:
            violations.append(f"line {lineno}: key outside any section")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        schema = _SECTIONS[current]
        known = {f.name for f in dc_fields(schema)}
        if key not in known:
            violations.append(f"line {lineno}: unknown key [{current}].{key}")
            continue
        if key in sections[current]:
            violations.append(f"line {lineno}: duplicate key [{current}].{key}")
            continue
        sections[current][key] = value

    built = {}
    for name, schema in _SECTIONS.items():
        kwargs = {}
        for f in dc_fields(schema):
            if name in sections and f.name in sections[name]:
                raw_val = sections[name][f.name]
                try:
                    kwargs[f.name] = _convert(f.type, raw_val)
                except ValueError:
                    violations.append(
                        f"[{name}].{f.name}: cannot parse {raw_val!r} as {f.type}"
                    )
        built[name] = schema(**kwargs)
    cfg = RunConfig(**built)
    violations.extend(_validate(cfg))
    if violations:
        raise ConfigError(violations)
    return cfg


def _convert(type_name: str, raw: str):
    if type_name == "int":
        as_float = float(raw)
        if as_float != int(as_float):
            raise ValueError(raw)
        return int(as_float)
    if type_name == "float":
        return float(raw)
    return raw


def _validate(cfg: RunConfig) -> list[str]:
    v: list[str] = []
    b = cfg.base
    if b.kind not in _BASE_KINDS:
        v.append(f"[base].kind: {b.kind!r} not one of {_BASE_KINDS}")
    if b.kind in ("linear_toral", "perturbed_toral"):
        det = b.l11 * b.l22 - b.l12 * b.l21
        if det not in (1, -1):
            v.append(f"[base].l11..l22: determinant {det} must be +-1")
    if b.kind == "perturbed_toral" and not (0.0 <= b.eps <= PERTURBATION_EPS_MAX):
        v.append(f"[base].eps: {b.eps} outside [0, {PERTURBATION_EPS_MAX}]")
    if b.kind == "standard_map" and b.K < 0.0:
        v.append(f"[base].K: {b.K} must be >= 0")
    if b.kind == "rotation":
        if not (0.0 < b.alpha < 1.0):
            v.append(f"[base].alpha: {b.alpha} outside (0, 1)")
        if not (0.0 < b.beta < 1.0):
            v.append(f"[base].beta: {b.beta} outside (0, 1)")
    c = cfg.cocycle
    if c.kind not in _COCYCLE_KINDS:
        v.append(f"[cocycle].kind: {c.kind!r} not one of {_COCYCLE_KINDS}")
    if c.potential not in ("zero", "cosine"):
        v.append(f"[cocycle].potential: {c.potential!r} not one of ('zero', 'cosine')")
    if not (0.0 < c.nu <= 1.0):
        v.append(f"[cocycle].nu: {c.nu} outside (0, 1]")
    if c.kind == "piecewise" and c.grid < 1:
        v.append(f"[cocycle].grid: {c.grid} must be >= 1")
    e = cfg.estimate
    if e.n_steps < 100:
        v.append(f"[estimate].n_steps: {e.n_steps} must be >= 100")
    if e.n_orbits < 1:
        v.append(f"[estimate].n_orbits: {e.n_orbits} must be >= 1")
    if not _measure_ok(e.measure):
        v.append(f"[estimate].measure: {e.measure!r} is not lebesgue | periodic:<k> | point:<u>,<v>")
    cl = cfg.classify
    if cl.grid < 16:
        v.append(f"[classify].grid: {cl.grid} must be >= 16")
    if cl.n_window < 8:
        v.append(f"[classify].n_window: {cl.n_window} must be >= 8")
    x = cfg.experiment
    if x.mode not in ("raise", "lower", "probe", "scan"):
        v.append(f"[experiment].mode: {x.mode!r} not one of ('raise', 'lower', 'probe', 'scan')")
    if x.epsilon < 0.0:
        v.append(f"[experiment].epsilon: {x.epsilon} must be >= 0")
    if x.trials < 0:
        v.append(f"[experiment].trials: {x.trials} must be >= 0")
    if x.delta < 0.0:
        v.append(f"[experiment].delta: {x.delta} must be >= 0")
    if x.search not in ("random", "greedy", "anneal"):
        v.append(f"[experiment].search: {x.search!r} not one of ('random', 'greedy', 'anneal')")
    if x.t0 <= 0.0:
        v.append(f"[experiment].t0: {x.t0} must be > 0")
    if not (0.0 < x.cooling < 1.0):
        v.append(f"[experiment].cooling: {x.cooling} outside (0, 1)")
    if x.scan_family not in ("schrodinger_energy", "standard_map_K", "perturbation_eps"):
        v.append(f"[experiment].scan_family: {x.scan_family!r} unknown")
    if x.scan_steps < 2:
        v.append(f"[experiment].scan_steps: {x.scan_steps} must be >= 2")
    if x.scan_max < x.scan_min:
        v.append("[experiment].scan_max: range is empty")
    cj = cfg.conjugacy
    if not (0.0 <= cj.eps <= PERTURBATION_EPS_MAX):
        v.append(f"[conjugacy].eps: {cj.eps} outside [0, {PERTURBATION_EPS_MAX}]")
    if cj.resolution < 64:
        v.append(f"[conjugacy].resolution: {cj.resolution} must be >= 64")
    if cj.tol <= 0.0:
        v.append(f"[conjugacy].tol: {cj.tol} must be > 0")
    return v


def _measure_ok(measure: str) -> bool:
    if measure == "lebesgue":
        return True
    if measure.startswith("periodic:"):
        try:
            return int(measure.split(":", 1)[1]) >= 1
        except ValueError:
            return False
    if measure.startswith("point:"):
        parts = measure.split(":", 1)[1].split(",")
        if len(parts) != 2:
            return False
        try:
            float(parts[0])
            float(parts[1])
            return True
        except ValueError:
            return False
    return False


def canonical_print(cfg: RunConfig) -> str:
    """Deterministic full rendering; parse_config round-trips it exactly."""
    lines = []
    for name in _SECTIONS:
        section = getattr(cfg, name)
        lines.append(f"[{name}]")
        for f in dc_fields(section):
            val = getattr(section, f.name)
            rendered = val if isinstance(val, str) else repr(val)
            lines.append(f"{f.name} = {rendered}")
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg: RunConfig) -> str:
    """Stable digest of the canonicalized config text."""
    return hashlib.sha256(canonical_print(cfg).encode("utf-8")).hexdigest()


def build_base(cfg: RunConfig) -> BaseMap:
    b = cfg.base
    if b.kind == "linear_toral":
        return LinearToral(b.l11, b.l12, b.l21, b.l22)
    if b.kind == "perturbed_toral":
        return PerturbedToral(LinearToral(b.l11, b.l12, b.l21, b.l22), b.eps)
    if b.kind == "standard_map":
        return StandardMap(K=b.K)
    return Rotation(alpha=b.alpha, beta=b.beta)


def build_cocycle(cfg: RunConfig, base: BaseMap, config_dir: Optional[Path] = None) -> Cocycle:
    c = cfg.cocycle
    if c.kind == "constant":
        return ConstantCocycle(Mat2(c.v11, c.v12, c.v21, c.v22), nu=c.nu)
    if c.kind == "schrodinger":
        pot = ZeroPotential() if c.potential == "zero" else CosinePotential(c.amp)
        return SchrodingerCocycle(energy=c.energy, potential=pot, nu=c.nu)
    if c.kind == "derivative":
        return derivative_cocycle(base)
    if c.kind == "piecewise":
        inner = ConstantCocycle(Mat2(c.v11, c.v12, c.v21, c.v22), nu=c.nu)
        if c.angles_file:
            path = Path(c.angles_file)
            if not path.is_absolute() and config_dir is not None:
                path = config_dir / path
            grid, angles = piecewise_angles_from_csv(path.read_text())
            return PiecewisePerturbedCocycle(base=inner, grid=grid, angles=angles)
        return PiecewisePerturbedCocycle(
            base=inner, grid=c.grid, angles=tuple([0.0] * (c.grid * c.grid))
        )
    return PointwiseRotatedCocycle(
        base=ConstantCocycle(Mat2(c.v11, c.v12, c.v21, c.v22), nu=c.nu),
        angle0=c.angle0,
        amplitude=c.angle_amp,
        ku=c.angle_ku,
        kv=c.angle_kv,
        nu=c.nu,
    )


def build_measure(cfg: RunConfig) -> MeasureSpec:
    e = cfg.estimate
    if e.measure == "lebesgue":
        return LebesgueSpec(n_orbits=e.n_orbits, seed=e.seed)
    if e.measure.startswith("periodic:"):
        return PeriodicEquidistributionSpec(period=int(e.measure.split(":", 1)[1]))
    u, v = (float(t) for t in e.measure.split(":", 1)[1].split(","))
    return SingleOrbitSpec(start=TorusPoint(u, v))


def build_estimate_settings(cfg: RunConfig) -> EstimateSettings:
    return EstimateSettings(n_steps=cfg.estimate.n_steps, measure=build_measure(cfg))


def build_hyperbolicity_settings(cfg: RunConfig) -> HyperbolicitySettings:
    return HyperbolicitySettings(grid=cfg.classify.grid, n_window=cfg.classify.n_window)


def format_float(x: float) -> str:
    """Shortest exact decimal; keeps reruns byte-identical."""
    return repr(float(x))


def scan_table_csv(table: Table) -> str:
    lines = [",".join(table.columns)]
    for row in table.rows:
        cells = []
        for col in table.columns:
            val = row[col]
            cells.append(format_float(val) if isinstance(val, float) else str(val))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def summary_jsonl(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True) + "\n"


def emit_plot_data(
    table: Table,
    x_col: str,
    y_cols: tuple[str, ...],
    band_cols: tuple[str, ...] = (),
) -> str:
    """Whitespace columns with a '#' header, floats at 9 significant digits."""
    if not table.rows:
        raise EmptyTableError("empty table")
    wanted = (x_col, *y_cols, *band_cols)
    for col in wanted:
        if col not in table.columns:
            raise InvalidParameterError(f"missing column {col!r}")
    lines = ["# " + " ".join(wanted)]
    for row in table.rows:
        cells = []
        for col in wanted:
            val = row[col]
            cells.append(f"{val:.9g}" if isinstance(val, (int, float)) else str(val))
        lines.append(" ".join(cells))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunRecord:
    config_hash: str
    tool_version: str
    wall_time: float
    outputs: tuple[str, ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "config_hash": self.config_hash,
                "tool_version": self.tool_version,
                "wall_time": self.wall_time,
                "outputs": list(self.outputs),
            },
            sort_keys=True,
        )
