"""SL(2,R) cocycle families and overflow-safe iterated products.

A cocycle maps torus points to determinant-one matrices; iterating it along
an orbit multiplies matrices in orbit order.  Long products are stored as a
unit-scale matrix plus an accumulated natural-log scale so products of any
length stay finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import InvalidParameterError
from .matrices import Mat2, op_norm, require_sl2
from .torus import TWO_PI, BaseMap, LinearToral, PerturbedToral, TorusPoint

# Renormalization window for the unit-scale factor of a running product.
NORM_WINDOW_LO = 0.5
NORM_WINDOW_HI = 2.0

EvalFn = Callable[[float, float], tuple[float, float, float, float]]


@dataclass(frozen=True, slots=True)
class ScaledProduct:
    """A matrix product stored as exp(logscale) * m with ||m|| in [1/2, 2]."""

    m: Mat2
    logscale: float
    renorms: int = 0

    def log_norm(self) -> float:
        """log of the operator norm of the represented product."""
        return self.logscale + math.log(self.m.norm())

    def reconstruct(self) -> Mat2:
        """The literal product matrix; only safe while exp(logscale) fits."""
        if self.logscale > 700.0:
            raise InvalidParameterError("product too large to reconstruct literally")
        return self.m.scale(math.exp(self.logscale))

    def compose(self, later: "ScaledProduct") -> "ScaledProduct":
        """later * self, renormalized back into the norm window."""
        m = later.m.mul(self.m)
        logscale = self.logscale + later.logscale
        nrm = m.norm()
        renorms = self.renorms + later.renorms
        if nrm > NORM_WINDOW_HI or nrm < NORM_WINDOW_LO:
            m = m.scale(1.0 / nrm)
            logscale += math.log(nrm)
            renorms += 1
        return ScaledProduct(m, logscale, renorms)


class Cocycle:
    """Common surface of the cocycle families.

    ``nu`` is the nominal Holder exponent of the family (None for the
    piecewise-constant family, which is not Holder continuous).
    """

    nu: Optional[float] = 1.0

    def eval(self, p: TorusPoint) -> Mat2:
        a, b, c, d = self.eval_fn()(p.u, p.v)
        return Mat2(a, b, c, d)

    def eval_fn(self) -> EvalFn:
        raise NotImplementedError

    def constant_value(self) -> Optional[Mat2]:
        """The matrix when the family is x-independent, else None."""
        return None

    @property
    def is_holder(self) -> bool:
        return self.nu is not None


@dataclass(frozen=True)
class ConstantCocycle(Cocycle):
    matrix: Mat2
    nu: float = 1.0

    def __post_init__(self):
        require_sl2(self.matrix)

    def eval_fn(self):
        vals = (self.matrix.a, self.matrix.b, self.matrix.c, self.matrix.d)

        def ev(u, v):
            return vals

        return ev

    def constant_value(self):
        return self.matrix


class Potential:
    def value(self, u: float, v: float) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroPotential(Potential):
    def value(self, u, v):
        return 0.0


@dataclass(frozen=True)
class CosinePotential(Potential):
    amplitude: float = 1.0

    def value(self, u, v):
        return self.amplitude * math.cos(TWO_PI * u)


@dataclass(frozen=True)
class SchrodingerCocycle(Cocycle):
    """Transfer matrices [[E - V(x), -1], [1, 0]]."""

    energy: float
    potential: Potential = ZeroPotential()
    nu: float = 1.0

    def eval_fn(self):
        e = self.energy
        pot = self.potential
        if isinstance(pot, ZeroPotential):
            vals = (e, -1.0, 1.0, 0.0)

            def ev_const(u, v):
                return vals

            return ev_const
        amp = pot.amplitude
        cos = math.cos

        def ev(u, v):
            return e - amp * cos(TWO_PI * u), -1.0, 1.0, 0.0

        return ev

    def constant_value(self):
        if isinstance(self.potential, ZeroPotential):
            return Mat2(self.energy, -1.0, 1.0, 0.0)
        return None


@dataclass(frozen=True)
class DerivativeCocycle(Cocycle):
    """The tangent dynamics Df of an area-preserving base map."""

    base: BaseMap
    nu: float = 1.0

    def __post_init__(self):
        if isinstance(self.base, LinearToral) and self.base.det() != 1:
            raise InvalidParameterError(
                "derivative cocycle needs Jacobian determinant +1; "
                "orientation-reversing linear map has det -1"
            )
        if isinstance(self.base, PerturbedToral) and self.base.linear.det() != 1:
            raise InvalidParameterError(
                "derivative cocycle needs Jacobian determinant +1"
            )

    def eval_fn(self):
        const = self.base.constant_jacobian()
        if const is not None:
            def ev_const(u, v):
                return const

            return ev_const
        jac = self.base.jacobian

        def ev(u, v):
            return jac(u, v)

        return ev

    def constant_value(self):
        const = self.base.constant_jacobian()
        if const is None:
            return None
        return Mat2(*const)


def derivative_cocycle(base: BaseMap) -> DerivativeCocycle:
    """Closed-form Jacobian field of an area-preserving base map."""
    return DerivativeCocycle(base)


@dataclass(frozen=True)
class PiecewisePerturbedCocycle(Cocycle):
    """Per-cell rotation composed with a base cocycle on a g x g grid.

    This is the bounded measurable (not continuous) perturbation family;
    angles are frozen at construction.  max_angle documents the bound the
    angles were drawn under, giving sup-distance control
    <= 4 sin(max_angle / 2) * sup ||base||.
    """

    base: Cocycle
    grid: int
    angles: tuple[float, ...]
    max_angle: float = math.pi

    def __post_init__(self):
        if self.grid < 1:
            raise InvalidParameterError("grid must be >= 1")
        if len(self.angles) != self.grid * self.grid:
            raise InvalidParameterError(
                f"need {self.grid * self.grid} angles, got {len(self.angles)}"
            )
        if any(abs(t) > self.max_angle + 1e-15 for t in self.angles):
            raise InvalidParameterError("angle exceeds the declared bound")
        object.__setattr__(self, "angles", tuple(float(t) for t in self.angles))

    nu = None  # not a Holder family

    def eval_fn(self):
        g = self.grid
        angles = self.angles
        base_ev = self.base.eval_fn()
        cos, sin, floor = math.cos, math.sin, math.floor

        def ev(u, v):
            i = int(floor(u * g))
            j = int(floor(v * g))
            if i >= g:
                i = g - 1
            if j >= g:
                j = g - 1
            t = angles[i * g + j]
            a, b, c, d = base_ev(u, v)
            ct, st = cos(t), sin(t)
            return ct * a - st * c, ct * b - st * d, st * a + ct * c, st * b + ct * d

        return ev


@dataclass(frozen=True)
class PointwiseRotatedCocycle(Cocycle):
    """Rotation by a trigonometric angle field composed with a base cocycle.

    angle(u, v) = angle0 + amplitude * sin(2 pi (ku u + kv v)).
    """

    base: Cocycle
    angle0: float = 0.0
    amplitude: float = 0.0
    ku: int = 1
    kv: int = 0
    nu: float = 1.0

    def eval_fn(self):
        base_ev = self.base.eval_fn()
        a0, amp, ku, kv = self.angle0, self.amplitude, self.ku, self.kv
        cos, sin = math.cos, math.sin

        def ev(u, v):
            t = a0 + amp * sin(TWO_PI * (ku * u + kv * v))
            a, b, c, d = base_ev(u, v)
            ct, st = cos(t), sin(t)
            return ct * a - st * c, ct * b - st * d, st * a + ct * c, st * b + ct * d

        return ev

    def constant_value(self):
        if self.amplitude != 0.0:
            return None
        inner = self.base.constant_value()
        if inner is None:
            return None
        return Mat2.rotation(self.angle0).mul(inner)


@dataclass(frozen=True)
class DiagonalBoostCocycle(Cocycle):
    """diag(1 + t, 1/(1 + t)) composed pointwise with a base cocycle."""

    base: Cocycle
    t: float
    nu: float = 1.0

    def __post_init__(self):
        if self.t <= -1.0:
            raise InvalidParameterError("boost parameter must exceed -1")

    def eval_fn(self):
        base_ev = self.base.eval_fn()
        s = 1.0 + self.t
        si = 1.0 / s

        def ev(u, v):
            a, b, c, d = base_ev(u, v)
            return s * a, s * b, si * c, si * d

        return ev

    def constant_value(self):
        inner = self.base.constant_value()
        if inner is None:
            return None
        return Mat2.diagonal(1.0 + self.t, 1.0 / (1.0 + self.t)).mul(inner)


@dataclass(frozen=True)
class InverseCocycle(Cocycle):
    """The cocycle of the inverted skew product: x -> A(f^{-1} x)^{-1}."""

    base_cocycle: Cocycle
    base_map: BaseMap

    @property
    def nu(self):  # type: ignore[override]
        return self.base_cocycle.nu

    def eval_fn(self):
        ev = self.base_cocycle.eval_fn()
        back = self.base_map.inverse_step_fn()

        def inv_ev(u, v):
            pu, pv = back(u, v)
            a, b, c, d = ev(pu, pv)
            return d, -b, -c, a

        return inv_ev


def iterate(cocycle: Cocycle, base: BaseMap, start: TorusPoint, n: int) -> ScaledProduct:
    """Ordered product A(f^{n-1} x) ... A(f x) A(x) as a ScaledProduct."""
    prod, _ = iterate_logs(cocycle, base, start, n, 0)
    return prod


def iterate_logs(
    cocycle: Cocycle,
    base: BaseMap,
    start: TorusPoint,
    n: int,
    n_checkpoints: int,
) -> tuple[ScaledProduct, list[float]]:
    """Iterate and record log||product|| at n_checkpoints equal strides.

    Checkpoint k holds the log-norm after (k+1) * (n // n_checkpoints) steps.
    The returned product is identical to ``iterate``'s bit for bit.
    """
    if n < 1:
        raise InvalidParameterError("iteration length must be >= 1")
    stride = (n // n_checkpoints) if n_checkpoints > 0 else 0
    if stride == 0:
        n_checkpoints = 0
    const = cocycle.constant_value()
    sqrt, log = math.sqrt, math.log
    ma, mb, mc, md = 1.0, 0.0, 0.0, 1.0
    logscale = 0.0
    renorms = 0
    checkpoints: list[float] = []

    if const is not None:
        aa, ab, ac, ad = const.a, const.b, const.c, const.d
        for i in range(n):
            na = aa * ma + ab * mc
            nb = aa * mb + ab * md
            nc = ac * ma + ad * mc
            nd = ac * mb + ad * md
            ma, mb, mc, md = na, nb, nc, nd
            q = ma * ma + mb * mb + mc * mc + md * md
            dt = ma * md - mb * mc
            disc = q * q - 4.0 * dt * dt
            nrm = sqrt(0.5 * (q + sqrt(disc if disc > 0.0 else 0.0)))
            if nrm > NORM_WINDOW_HI or nrm < NORM_WINDOW_LO:
                inv = 1.0 / nrm
                ma *= inv
                mb *= inv
                mc *= inv
                md *= inv
                logscale += log(nrm)
                renorms += 1
            if n_checkpoints and (i + 1) % stride == 0 and len(checkpoints) < n_checkpoints:
                checkpoints.append(logscale + log(op_norm(ma, mb, mc, md)))
    else:
        ev = cocycle.eval_fn()
        step = base.step_fn()
        u, v = start.u, start.v
        for i in range(n):
            aa, ab, ac, ad = ev(u, v)
            na = aa * ma + ab * mc
            nb = aa * mb + ab * md
            nc = ac * ma + ad * mc
            nd = ac * mb + ad * md
            ma, mb, mc, md = na, nb, nc, nd
            q = ma * ma + mb * mb + mc * mc + md * md
            dt = ma * md - mb * mc
            disc = q * q - 4.0 * dt * dt
            nrm = sqrt(0.5 * (q + sqrt(disc if disc > 0.0 else 0.0)))
            if nrm > NORM_WINDOW_HI or nrm < NORM_WINDOW_LO:
                inv = 1.0 / nrm
                ma *= inv
                mb *= inv
                mc *= inv
                md *= inv
                logscale += log(nrm)
                renorms += 1
            u, v = step(u, v)
            if n_checkpoints and (i + 1) % stride == 0 and len(checkpoints) < n_checkpoints:
                checkpoints.append(logscale + log(op_norm(ma, mb, mc, md)))

    return ScaledProduct(Mat2(ma, mb, mc, md), logscale, renorms), checkpoints


def backward_window_product(
    cocycle: Cocycle, base: BaseMap, endpoint: TorusPoint, n: int
) -> ScaledProduct:
    """A^n evaluated at f^{-n}(endpoint), multiplied along the recorded orbit.

    Walking backward and re-iterating forward would diverge from the
    endpoint at the expansion rate (back-then-forward roundtrips amplify
    rounding), so the product is accumulated directly over the recorded
    backward orbit: the window is pinned to end exactly at ``endpoint``.
    """
    if n < 1:
        raise InvalidParameterError("window length must be >= 1")
    back = base.inverse_step_fn()
    u, v = endpoint.u, endpoint.v
    pts = []
    for _ in range(n):
        u, v = back(u, v)
        pts.append((u, v))
    ev = cocycle.eval_fn()
    sqrt, log = math.sqrt, math.log
    ma, mb, mc, md = 1.0, 0.0, 0.0, 1.0
    logscale = 0.0
    renorms = 0
    # pts[k] = f^{-(k+1)}(endpoint); rightmost factor first
    for u, v in reversed(pts):
        aa, ab, ac, ad = ev(u, v)
        na = aa * ma + ab * mc
        nb = aa * mb + ab * md
        nc = ac * ma + ad * mc
        nd = ac * mb + ad * md
        ma, mb, mc, md = na, nb, nc, nd
        q = ma * ma + mb * mb + mc * mc + md * md
        dt = ma * md - mb * mc
        disc = q * q - 4.0 * dt * dt
        nrm = sqrt(0.5 * (q + sqrt(disc if disc > 0.0 else 0.0)))
        if nrm > NORM_WINDOW_HI or nrm < NORM_WINDOW_LO:
            inv = 1.0 / nrm
            ma *= inv
            mb *= inv
            mc *= inv
            md *= inv
            logscale += log(nrm)
            renorms += 1
    return ScaledProduct(Mat2(ma, mb, mc, md), logscale, renorms)


def product_defect(p1: ScaledProduct, p2: ScaledProduct) -> float:
    """Relative Frobenius distance between two represented products.

    Scale-aware: the second product is brought to the first one's log scale
    before differencing, so the comparison is exact even when both live at
    huge magnitudes.  Frobenius (not operator) norm keeps the metric well
    conditioned when singular values coincide.
    """
    shift = p2.logscale - p1.logscale
    if abs(shift) > 200.0:
        return math.inf
    m2 = p2.m.scale(math.exp(shift))
    denom = p1.m.frobenius()
    if denom == 0.0:
        return m2.frobenius()
    return p1.m.sub(m2).frobenius() / denom


def sup_distance(a: Cocycle, b: Cocycle, grid: int) -> float:
    """Grid-sampled sup-norm distance, including the inverse term.

    max over the grid x grid lattice of ||A(x) - B(x)|| + ||A(x)^-1 - B(x)^-1||.
    This is a lower bound for the true essential sup (grid-based sampling).
    """
    if grid < 2:
        raise InvalidParameterError("grid must be >= 2")
    ev_a = a.eval_fn()
    ev_b = b.eval_fn()
    worst = 0.0
    inv_g = 1.0 / grid
    for i in range(grid):
        u = i * inv_g
        for j in range(grid):
            v = j * inv_g
            aa, ab, ac, ad = ev_a(u, v)
            ba, bb, bc, bd = ev_b(u, v)
            direct = op_norm(aa - ba, ab - bb, ac - bc, ad - bd)
            # SL(2,R) inverses via adjugate
            inv = op_norm(ad - bd, -(ab - bb), -(ac - bc), aa - ba)
            tot = direct + inv
            if tot > worst:
                worst = tot
    return worst


def piecewise_angles_to_csv(cocycle: PiecewisePerturbedCocycle) -> str:
    """Flat row-major CSV serialization with a ``grid=g`` header line."""
    lines = [f"grid={cocycle.grid}"]
    g = cocycle.grid
    for i in range(g):
        row = cocycle.angles[i * g : (i + 1) * g]
        lines.append(",".join(repr(t) for t in row))
    return "\n".join(lines) + "\n"


def piecewise_angles_from_csv(text: str) -> tuple[int, tuple[float, ...]]:
    """Parse the ``grid=g`` headed flat CSV angle serialization."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("grid="):
        raise InvalidParameterError("angle file must start with a grid=<g> header")
    try:
        g = int(lines[0].split("=", 1)[1])
    except ValueError as exc:
        raise InvalidParameterError(f"bad grid header {lines[0]!r}") from exc
    values: list[float] = []
    for ln in lines[1:]:
        values.extend(float(tok) for tok in ln.split(",") if tok.strip())
    if len(values) != g * g:
        raise InvalidParameterError(
            f"expected {g * g} angles for grid={g}, got {len(values)}"
        )
    return g, tuple(values)
