"""Pydantic request/response models for the coclab service.

These are the wire contract: the HTTP app and the CLI thin client both
speak these models, translating to and from the core value types at the
service boundary.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .. import classify as _classify
from .. import lyapunov as _lyap
from ..cocycles import (
    ConstantCocycle,
    Cocycle,
    CosinePotential,
    PiecewisePerturbedCocycle,
    PointwiseRotatedCocycle,
    SchrodingerCocycle,
    ZeroPotential,
    derivative_cocycle,
)
from ..matrices import Mat2
from ..torus import (
    BaseMap,
    LinearToral,
    PerturbedToral,
    Rotation,
    StandardMap,
    TorusPoint,
)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MapSpec(StrictModel):
    kind: Literal["linear_toral", "perturbed_toral", "standard_map", "rotation"]
    l11: int = 2
    l12: int = 1
    l21: int = 1
    l22: int = 1
    eps: float = 0.0
    K: float = 1.0
    alpha: float = 0.5
    beta: float = 0.30901699437494745

    def to_base_map(self) -> BaseMap:
        if self.kind == "linear_toral":
            return LinearToral(self.l11, self.l12, self.l21, self.l22)
        if self.kind == "perturbed_toral":
            return PerturbedToral(
                LinearToral(self.l11, self.l12, self.l21, self.l22), self.eps
            )
        if self.kind == "standard_map":
            return StandardMap(K=self.K)
        return Rotation(alpha=self.alpha, beta=self.beta)


class CocycleSpec(StrictModel):
    kind: Literal["constant", "schrodinger", "derivative", "piecewise", "rotated"]
    v11: float = 1.0
    v12: float = 0.0
    v21: float = 0.0
    v22: float = 1.0
    energy: float = 3.0
    potential: Literal["zero", "cosine"] = "zero"
    amp: float = 1.0
    nu: float = 1.0
    grid: int = 8
    angles: Optional[list[float]] = None
    angle0: float = 0.0
    angle_amp: float = 0.0
    angle_ku: int = 1
    angle_kv: int = 0
    base: Optional["CocycleSpec"] = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind in ("piecewise", "rotated") and self.base is not None:
            if self.base.kind in ("piecewise", "rotated"):
                raise ValueError("nested perturbation wrappers are not supported")
        return self

    def to_cocycle(self, base_map: BaseMap) -> Cocycle:
        if self.kind == "constant":
            return ConstantCocycle(Mat2(self.v11, self.v12, self.v21, self.v22), nu=self.nu)
        if self.kind == "schrodinger":
            pot = ZeroPotential() if self.potential == "zero" else CosinePotential(self.amp)
            return SchrodingerCocycle(energy=self.energy, potential=pot, nu=self.nu)
        if self.kind == "derivative":
            return derivative_cocycle(base_map)
        inner_spec = self.base or CocycleSpec(
            kind="constant", v11=self.v11, v12=self.v12, v21=self.v21, v22=self.v22, nu=self.nu
        )
        inner = inner_spec.to_cocycle(base_map)
        if self.kind == "piecewise":
            angles = self.angles or [0.0] * (self.grid * self.grid)
            return PiecewisePerturbedCocycle(
                base=inner, grid=self.grid, angles=tuple(angles)
            )
        return PointwiseRotatedCocycle(
            base=inner,
            angle0=self.angle0,
            amplitude=self.angle_amp,
            ku=self.angle_ku,
            kv=self.angle_kv,
            nu=self.nu,
        )


class EstimateSpec(StrictModel):
    n_steps: int = Field(default=10000, ge=100)
    n_orbits: int = Field(default=10, ge=1)
    seed: int = 0
    measure: str = "lebesgue"

    @model_validator(mode="after")
    def _measure_format(self):
        m = self.measure
        ok = m == "lebesgue"
        if m.startswith("periodic:"):
            tail = m.split(":", 1)[1]
            ok = tail.isdigit() and int(tail) >= 1
        elif m.startswith("point:"):
            parts = m.split(":", 1)[1].split(",")
            try:
                ok = len(parts) == 2 and bool([float(t) for t in parts])
            except ValueError:
                ok = False
        if not ok:
            raise ValueError(
                f"measure {m!r} is not lebesgue | periodic:<k> | point:<u>,<v>"
            )
        return self

    def to_settings(self) -> _classify.EstimateSettings:
        return _classify.EstimateSettings(
            n_steps=self.n_steps, measure=self.to_measure()
        )

    def to_measure(self) -> _lyap.MeasureSpec:
        if self.measure == "lebesgue":
            return _lyap.LebesgueSpec(n_orbits=self.n_orbits, seed=self.seed)
        if self.measure.startswith("periodic:"):
            return _lyap.PeriodicEquidistributionSpec(
                period=int(self.measure.split(":", 1)[1])
            )
        if self.measure.startswith("point:"):
            u, v = (float(t) for t in self.measure.split(":", 1)[1].split(","))
            return _lyap.SingleOrbitSpec(start=TorusPoint(u, v))
        raise ValueError(f"bad measure {self.measure!r}")


class ClassifySpec(StrictModel):
    grid: int = Field(default=16, ge=16)
    n_window: int = Field(default=8, ge=8)

    def to_settings(self) -> _classify.HyperbolicitySettings:
        return _classify.HyperbolicitySettings(grid=self.grid, n_window=self.n_window)


class EstimateRequest(StrictModel):
    base: MapSpec
    cocycle: CocycleSpec
    estimate: EstimateSpec = EstimateSpec()


class OrbitRow(StrictModel):
    orbit_id: int
    start_u: float
    start_v: float
    lam: float
    n: int
    renorms: int
    stderr: Optional[float] = None


class EstimateResponse(StrictModel):
    lambda_bar: float
    ci95: Optional[float]
    seed: int
    orbits: list[OrbitRow]


class ClassifyRequest(StrictModel):
    base: MapSpec
    cocycle: CocycleSpec
    estimate: EstimateSpec = EstimateSpec()
    classify: ClassifySpec = ClassifySpec()


class ClassifyResponse(StrictModel):
    verdict: Literal[
        "uniformly_hyperbolic", "trivial_spectrum", "simple_nonuniform", "inconclusive"
    ]
    lam: Optional[float] = None
    cone_margin: Optional[float] = None
    lambda_bound: Optional[float] = None
    reason: Optional[str] = None
    witness: Optional[list[float]] = None


class ScanRequest(StrictModel):
    family: Literal["schrodinger_energy", "standard_map_K", "perturbation_eps"]
    start: float
    stop: float
    steps: int = Field(ge=2)
    base: MapSpec
    estimate: EstimateSpec = EstimateSpec()
    classify: ClassifySpec = ClassifySpec()


class ScanRow(StrictModel):
    param: float
    lambda_bar: float
    ci95: float
    verdict: str


class ScanResponse(StrictModel):
    rows: list[ScanRow]


class SearchSpec(StrictModel):
    kind: Literal["random", "greedy", "anneal"] = "random"
    t0: float = 0.1
    cooling: float = 0.995
    grid: int = Field(default=8, ge=1)


class PerturbRequest(StrictModel):
    mode: Literal["raise", "lower", "probe"]
    base: MapSpec
    cocycle: CocycleSpec
    epsilon: float = Field(ge=0.0)
    trials: int = Field(ge=0)
    seed: int = 0
    delta: float = Field(default=0.01, ge=0.0)
    estimate: EstimateSpec = EstimateSpec()
    classify: ClassifySpec = ClassifySpec()
    search: SearchSpec = SearchSpec()
    profile_orbits: int = Field(default=5, ge=1)
    profile_steps: int = Field(default=10000, ge=100)


class TrialRow(StrictModel):
    index: int
    move: str
    lambda_hat: Optional[float]
    budget: float
    accepted: bool


class PerturbResponse(StrictModel):
    mode: str
    lambda_before: Optional[float] = None
    lambda_after: Optional[float] = None
    verdict_before: Optional[str] = None
    verdict_after: Optional[str] = None
    trials_run: int = 0
    wall_time: float = 0.0
    budget_used: Optional[float] = None
    success: Optional[bool] = None
    max_uplift: Optional[float] = None
    c_estimate: Optional[float] = None
    lambda_original: Optional[float] = None
    samples: Optional[int] = None
    trail: list[TrialRow] = []


class ConjugacyRequest(StrictModel):
    base: MapSpec
    eps: float = Field(ge=0.0)
    resolution: int = Field(ge=64)
    tol: float = Field(gt=0.0)
    include_field: bool = False

    @model_validator(mode="after")
    def _linear_only(self):
        if self.base.kind != "linear_toral":
            raise ValueError("conjugacy needs a linear_toral reference map")
        return self


class FieldRow(StrictModel):
    i: int
    j: int
    du: float
    dv: float


class ConjugacyResponse(StrictModel):
    resolution: int
    residual: float
    max_displacement: float
    gamma_hat: float
    gamma_r2: float
    gamma_degenerate: bool
    field: Optional[list[FieldRow]] = None


class ErrorPayload(StrictModel):
    error: str
    message: str
