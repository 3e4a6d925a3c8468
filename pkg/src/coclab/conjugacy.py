"""Topological conjugacy between a linear Anosov map and its perturbation.

Solves g o h = h o f for h = id + u with f linear hyperbolic and g the
trigonometric-shear perturbation sharing f's linear part.  The displacement
u lives on a g x g lattice with periodic bilinear interpolation; the
functional equation is split along the stable/unstable eigendirections of
the linear part and iterated as a contraction (stable component pulled
forward through the map, unstable component pulled backward through the
inverse), with the achieved quality measured afterwards as the sup defect
of the equation on a finer independent audit lattice.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .classify import holder_seminorm
from .cocycles import Cocycle, ScaledProduct
from .errors import (
    ConjugacyConvergenceError,
    InvalidParameterError,
    InversionError,
)
from .matrices import Mat2, op_norm
from .torus import TWO_PI, LinearToral, PerturbedToral, TorusPoint, distance, mod1

MAX_DISPLACEMENT = 0.25
_STALL_TOL = 1e-15
_INVERSION_TOL = 1e-10


class ConjugacyMap:
    """h = id + u with u a doubly periodic bilinear lattice field."""

    def __init__(self, du: np.ndarray, dv: np.ndarray, resolution: int, residual: float):
        if du.shape != (resolution, resolution) or dv.shape != du.shape:
            raise InvalidParameterError("displacement grids must be resolution x resolution")
        self.du = np.array(du, dtype=float)
        self.dv = np.array(dv, dtype=float)
        self.resolution = int(resolution)
        self.residual = float(residual)
        sup = self.max_displacement
        if sup > MAX_DISPLACEMENT:
            raise InvalidParameterError(
                f"displacement {sup:.4f} exceeds the {MAX_DISPLACEMENT} identity-neighborhood bound"
            )

    @property
    def max_displacement(self) -> float:
        return float(np.max(np.hypot(self.du, self.dv))) if self.du.size else 0.0

    def displacement(self, u: float, v: float) -> tuple[float, float]:
        """Bilinear periodic interpolation of the displacement field."""
        g = self.resolution
        x = mod1(u) * g
        y = mod1(v) * g
        i0 = int(x)
        j0 = int(y)
        fx = x - i0
        fy = y - j0
        i0 %= g
        j0 %= g
        i1 = (i0 + 1) % g
        j1 = (j0 + 1) % g
        w00 = (1.0 - fx) * (1.0 - fy)
        w10 = fx * (1.0 - fy)
        w01 = (1.0 - fx) * fy
        w11 = fx * fy
        du = self.du
        dv = self.dv
        return (
            du[i0, j0] * w00 + du[i1, j0] * w10 + du[i0, j1] * w01 + du[i1, j1] * w11,
            dv[i0, j0] * w00 + dv[i1, j0] * w10 + dv[i0, j1] * w01 + dv[i1, j1] * w11,
        )

    def forward(self, p: TorusPoint) -> TorusPoint:
        eu, ev = self.displacement(p.u, p.v)
        return TorusPoint(p.u + eu, p.v + ev)

    def inverse(self, p: TorusPoint) -> TorusPoint:
        """Solve z + u(z) = p by (optionally damped) fixed-point iteration."""
        for damping, iters in ((1.0, 100), (0.5, 400)):
            zu, zv = p.u, p.v
            for _ in range(iters):
                eu, ev = self.displacement(zu, zv)
                ru = p.u - zu - eu
                rv = p.v - zv - ev
                # wrap the residual to the nearest representative
                ru -= round(ru)
                rv -= round(rv)
                if math.hypot(ru, rv) <= _INVERSION_TOL:
                    return TorusPoint(zu, zv)
                zu = mod1(zu + damping * ru)
                zv = mod1(zv + damping * rv)
        raise InversionError(
            f"inversion did not converge at ({p.u}, {p.v})", point=(p.u, p.v)
        )

    def displacement_arrays(self, U: np.ndarray, V: np.ndarray):
        return _interp(self.du, U, V, self.resolution), _interp(
            self.dv, U, V, self.resolution
        )


def _interp(arr: np.ndarray, U: np.ndarray, V: np.ndarray, g: int) -> np.ndarray:
    x = (U % 1.0) * g
    y = (V % 1.0) * g
    i0 = np.floor(x).astype(np.int64)
    j0 = np.floor(y).astype(np.int64)
    fx = x - i0
    fy = y - j0
    i0 %= g
    j0 %= g
    i1 = (i0 + 1) % g
    j1 = (j0 + 1) % g
    return (
        arr[i0, j0] * (1.0 - fx) * (1.0 - fy)
        + arr[i1, j0] * fx * (1.0 - fy)
        + arr[i0, j1] * (1.0 - fx) * fy
        + arr[i1, j1] * fx * fy
    )


def _eigen_splitting(lin: LinearToral):
    """Unit eigenvectors and eigenvalues of L, unstable first."""
    a, b, c, d = (float(x) for x in lin.matrix())
    tr = a + d
    det = a * d - b * c
    disc = tr * tr - 4.0 * det
    if disc <= 0.0:
        raise InvalidParameterError("linear part has no real hyperbolic splitting")
    root = math.sqrt(disc)
    lam1 = 0.5 * (tr + root)
    lam2 = 0.5 * (tr - root)
    lam_u, lam_s = (lam1, lam2) if abs(lam1) >= abs(lam2) else (lam2, lam1)
    if not (abs(lam_u) > 1.0 > abs(lam_s)):
        raise InvalidParameterError("linear part is not hyperbolic")

    def eigvec(lam):
        # rows of (L - lam I) are both orthogonal to the eigenvector
        v1 = (b, lam - a)
        v2 = (lam - d, c)
        n1 = math.hypot(*v1)
        n2 = math.hypot(*v2)
        vx, vy = v1 if n1 >= n2 else v2
        n = math.hypot(vx, vy)
        return vx / n, vy / n

    wu = eigvec(lam_u)
    ws = eigvec(lam_s)
    return lam_u, lam_s, wu, ws


def _shear_displacement(lin: LinearToral, eps: float, U: np.ndarray, V: np.ndarray):
    """G(y) = g(y) - L y for the shear perturbation, exact and periodic."""
    l11, l12, l21, l22 = lin.matrix()
    u1 = (l11 * U + l12 * V) % 1.0
    v1 = (l21 * U + l22 * V) % 1.0
    gu = eps * np.sin(TWO_PI * v1)
    gv = eps * np.sin(TWO_PI * (u1 + gu))
    return gu, gv


def compute_conjugacy(
    f: LinearToral,
    g: PerturbedToral,
    resolution: int,
    tol: float,
    max_sweeps: int = 10000,
) -> ConjugacyMap:
    """Solve the conjugacy equation on a lattice and audit the result.

    Raises ConjugacyConvergenceError (carrying the last residual) when the
    iteration's fixed point cannot meet ``tol`` on the audit lattice; the
    bilinear lattice representation has a resolution-dependent floor, so a
    too-small tol at a too-coarse resolution is reported, never papered
    over.
    """
    if resolution < 64:
        raise InvalidParameterError("resolution must be >= 64")
    if tol <= 0.0:
        raise InvalidParameterError("tol must be positive")
    if g.linear.matrix() != f.matrix():
        raise InvalidParameterError(
            "perturbed map must share the linear part of the reference map"
        )
    lam_u, lam_s, wu, ws = _eigen_splitting(f)
    # coefficient projection: rows of the inverse of [wu ws]
    det_w = wu[0] * ws[1] - ws[0] * wu[1]
    pu = (ws[1] / det_w, -ws[0] / det_w)
    ps = (-wu[1] / det_w, wu[0] / det_w)

    gsize = resolution
    idx = np.arange(gsize) / gsize
    LU, LV = np.meshgrid(idx, idx, indexing="ij")
    l11, l12, l21, l22 = f.matrix()
    FXU = (l11 * LU + l12 * LV) % 1.0
    FXV = (l21 * LU + l22 * LV) % 1.0
    i11, i12, i21, i22 = f.inverse_matrix()
    BXU = (i11 * LU + i12 * LV) % 1.0
    BXV = (i21 * LU + i22 * LV) % 1.0

    DU = np.zeros((gsize, gsize))
    DV = np.zeros((gsize, gsize))
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        AU = pu[0] * DU + pu[1] * DV
        AS = ps[0] * DU + ps[1] * DV
        # unstable coefficient pulled backward through L^{-1}
        gu_here, gv_here = _shear_displacement(f, g.eps, LU + DU, LV + DV)
        au_new = (_interp(AU, FXU, FXV, gsize) - (pu[0] * gu_here + pu[1] * gv_here)) / lam_u
        # stable coefficient pulled forward from the preimage
        du_pre = _interp(DU, BXU, BXV, gsize)
        dv_pre = _interp(DV, BXU, BXV, gsize)
        gu_pre, gv_pre = _shear_displacement(f, g.eps, BXU + du_pre, BXV + dv_pre)
        as_new = lam_s * _interp(AS, BXU, BXV, gsize) + (ps[0] * gu_pre + ps[1] * gv_pre)
        DU_new = wu[0] * au_new + ws[0] * as_new
        DV_new = wu[1] * au_new + ws[1] * as_new
        change = max(
            float(np.max(np.abs(DU_new - DU))), float(np.max(np.abs(DV_new - DV)))
        )
        DU, DV = DU_new, DV_new
        if change < _STALL_TOL:
            break

    h = ConjugacyMap(DU, DV, resolution, residual=0.0)
    residual = audit_residual(h, f, g)
    h.residual = residual
    if residual > tol:
        raise ConjugacyConvergenceError(
            f"no conjugacy at this resolution: residual {residual:.3e} > tol {tol:.3e}",
            last_residual=residual,
            sweeps=sweeps,
        )
    return h


def audit_residual(
    h: ConjugacyMap,
    f: LinearToral,
    g: PerturbedToral,
    factor: int = 4,
    offset: float = 0.0,
) -> float:
    """Sup over a (factor*g)^2 lattice of d(g(h(x)), h(f(x)))."""
    n = factor * h.resolution
    idx = (np.arange(n) + offset) / n
    U, V = np.meshgrid(idx, idx, indexing="ij")
    eu, ev = h.displacement_arrays(U, V)
    hu = U + eu
    hv = V + ev
    l11, l12, l21, l22 = f.matrix()
    # g(h(x)) through the exact shear decomposition
    gu, gv = _shear_displacement(f, g.eps, hu, hv)
    ghu = (l11 * hu + l12 * hv + gu) % 1.0
    ghv = (l21 * hu + l22 * hv + gv) % 1.0
    # h(f(x))
    fu = (l11 * U + l12 * V) % 1.0
    fv = (l21 * U + l22 * V) % 1.0
    eu2, ev2 = h.displacement_arrays(fu, fv)
    hfu = (fu + eu2) % 1.0
    hfv = (fv + ev2) % 1.0
    dmu = np.abs(ghu - hfu) % 1.0
    dmu = np.minimum(dmu, 1.0 - dmu)
    dmv = np.abs(ghv - hfv) % 1.0
    dmv = np.minimum(dmv, 1.0 - dmv)
    return float(np.max(np.hypot(dmu, dmv)))


def check_invertible_on_grid(h: ConjugacyMap) -> None:
    """Require det D(id + u) > 0 at lattice points (central differences)."""
    g = h.resolution
    step = 1.0 / g
    dud_u = (np.roll(h.du, -1, axis=0) - np.roll(h.du, 1, axis=0)) / (2 * step)
    dud_v = (np.roll(h.du, -1, axis=1) - np.roll(h.du, 1, axis=1)) / (2 * step)
    dvd_u = (np.roll(h.dv, -1, axis=0) - np.roll(h.dv, 1, axis=0)) / (2 * step)
    dvd_v = (np.roll(h.dv, -1, axis=1) - np.roll(h.dv, 1, axis=1)) / (2 * step)
    det = (1.0 + dud_u) * (1.0 + dvd_v) - dud_v * dvd_u
    if float(np.min(det)) <= 0.0:
        raise InvalidParameterError(
            "displacement Jacobian of id + u is singular on the lattice"
        )


@dataclass(frozen=True)
class TransportedCocycle(Cocycle):
    """B composed with h or with h^{-1}; matrix values are untouched."""

    base_cocycle: Cocycle
    h: ConjugacyMap
    through_inverse: bool

    @property
    def nu(self):  # type: ignore[override]
        # nominal; composition with a Holder homeomorphism keeps Holder
        # continuity though generally with a smaller exponent
        return self.base_cocycle.nu

    def eval_fn(self):
        ev = self.base_cocycle.eval_fn()
        h = self.h
        if self.through_inverse:
            def inv_ev(u, v):
                z = h.inverse(TorusPoint(u, v))
                return ev(z.u, z.v)

            return inv_ev

        def fwd_ev(u, v):
            eu, evv = h.displacement(u, v)
            return ev(mod1(u + eu), mod1(v + evv))

        return fwd_ev


def transport_cocycle(
    cocycle: Cocycle, h: ConjugacyMap, direction: str = "inverse"
) -> TransportedCocycle:
    """B o h (direction 'forward') or B o h^{-1} (direction 'inverse')."""
    if direction not in ("forward", "inverse"):
        raise InvalidParameterError("direction must be 'forward' or 'inverse'")
    check_invertible_on_grid(h)
    return TransportedCocycle(
        base_cocycle=cocycle, h=h, through_inverse=direction == "inverse"
    )


@dataclass(frozen=True)
class TransportIdentityReport:
    max_defect: float
    n: int
    bound_constant: Optional[float]


def verify_transport_identity(
    cocycle: Cocycle,
    f,
    g,
    h: ConjugacyMap,
    start: TorusPoint,
    n: int,
) -> TransportIdentityReport:
    """Compare (B o h^{-1}) iterated over g against B iterated over f.

    The two products agree identically for the exact conjugacy; the report
    carries the worst step defect (log-norm difference plus distance of the
    unit-scale factors) and the defect constant normalized by
    n * residual * seminorm(B) when that denominator is positive.
    """
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    ev = cocycle.eval_fn()
    step_g = g.step_fn()
    step_f = f.step_fn()
    xu, xv = start.u, start.v
    z0 = h.inverse(start)
    yu, yv = z0.u, z0.v
    pa = ScaledProduct(Mat2.identity(), 0.0)
    pb = ScaledProduct(Mat2.identity(), 0.0)
    max_defect = 0.0
    for _ in range(n):
        z = h.inverse(TorusPoint(xu, xv))
        ea = ev(z.u, z.v)
        pa = pa.compose(ScaledProduct(Mat2(*ea), 0.0))
        eb = ev(yu, yv)
        pb = pb.compose(ScaledProduct(Mat2(*eb), 0.0))
        defect = abs(pa.log_norm() - pb.log_norm())
        na = pa.m.norm()
        nb = pb.m.norm()
        ma = pa.m.scale(1.0 / na)
        mb = pb.m.scale(1.0 / nb)
        diff = ma.sub(mb)
        defect += op_norm(diff.a, diff.b, diff.c, diff.d)
        if defect > max_defect:
            max_defect = defect
        xu, xv = step_g(xu, xv)
        yu, yv = step_f(yu, yv)
    bound_constant = None
    if h.residual > 0.0 and cocycle.is_holder:
        sem = holder_seminorm(cocycle, cocycle.nu, pairs=200, seed=0)
        if sem > 0.0:
            bound_constant = max_defect / (n * h.residual * sem)
    return TransportIdentityReport(max_defect=max_defect, n=n, bound_constant=bound_constant)


@dataclass(frozen=True)
class PullbackExponent:
    """Transported-cocycle exponent sampled on the pulled-back measure."""

    value: float
    n: int
    max_orbit_defect: float


def transported_exponent_pullback(
    cocycle: Cocycle,
    f,
    g,
    h: ConjugacyMap,
    start: TorusPoint,
    n: int,
) -> PullbackExponent:
    """Exponent of (g, B o h^{-1}) with respect to the pulled-back measure.

    The maximal entropy class of g is the h-image of Lebesgue on the linear
    model, and it is generically singular, so g-generated floating orbits
    drift off it toward Lebesgue-of-g.  This estimator walks y_k = h(f^k x)
    instead, which samples exactly the pulled-back class, and verifies at
    every step that the walk is a genuine g-pseudo-orbit
    (d(g(y_{k-1}), y_k) stays at the conjugacy residual scale); a field
    that does not solve the conjugacy equation fails that check loudly.
    """
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    defect_cap = max(10.0 * h.residual, 1e-12)
    ev = cocycle.eval_fn()
    step_f = f.step_fn()
    step_g = g.step_fn()
    xu, xv = start.u, start.v
    y_prev = h.forward(start)
    prod = ScaledProduct(Mat2.identity(), 0.0)
    max_defect = 0.0
    for k in range(n):
        z = h.inverse(y_prev)
        prod = prod.compose(ScaledProduct(Mat2(*ev(z.u, z.v)), 0.0))
        gu, gv = step_g(y_prev.u, y_prev.v)
        xu, xv = step_f(xu, xv)
        y_next = h.forward(TorusPoint(xu, xv))
        defect = distance(TorusPoint(gu, gv), y_next)
        if defect > max_defect:
            max_defect = defect
        if defect > defect_cap:
            raise InvalidParameterError(
                f"pullback walk is not a g-pseudo-orbit at step {k}: defect {defect:.3e}"
            )
        y_prev = y_next
    return PullbackExponent(
        value=max(prod.log_norm() / n, 0.0), n=n, max_orbit_defect=max_defect
    )


@dataclass(frozen=True)
class HolderFit:
    gamma_hat: float
    r2: float
    degenerate: bool


def holder_exponent_estimate(h: ConjugacyMap, pairs: int, seed: int) -> HolderFit:
    """Slope of log displacement increments against log separation.

    Pairs are drawn at dyadic separations 2^-k, k = 2..10; per bin the
    upper envelope of ||u(x) - u(y)|| feeds a least-squares line whose
    slope estimates the Holder exponent of h = id + u.  When every
    increment sits below 1e-12 the map is the identity for this purpose:
    flagged degenerate with slope 1.
    """
    if pairs < 1000:
        raise InvalidParameterError("need at least 1000 pairs")
    rng = random.Random(seed)
    ks = list(range(2, 11))
    per_bin = max(pairs // len(ks), 1)
    xs = []
    ys = []
    for k in ks:
        sep = 2.0 ** (-k)
        best = 0.0
        for _ in range(per_bin):
            p = TorusPoint(rng.random(), rng.random())
            phi = rng.random() * 2.0 * math.pi
            q = TorusPoint(p.u + sep * math.cos(phi), p.v + sep * math.sin(phi))
            pu, pv = h.displacement(p.u, p.v)
            qu, qv = h.displacement(q.u, q.v)
            d = math.hypot(pu - qu, pv - qv)
            if d > best:
                best = d
        if best > 1e-12:
            xs.append(math.log(sep))
            ys.append(math.log(best))
    if len(xs) < 3:
        return HolderFit(gamma_hat=1.0, r2=1.0, degenerate=True)
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    syy = sum((y - my) ** 2 for y in ys)
    r2 = 0.0 if syy == 0.0 else (sxy * sxy) / (sxx * syy)
    return HolderFit(gamma_hat=slope, r2=r2, degenerate=False)


@dataclass(frozen=True)
class SeminormCheck:
    seminorm: float
    bound: float


def transported_seminorm_check(
    cocycle_a: Cocycle,
    cocycle_b: Cocycle,
    h: ConjugacyMap,
    nu: float,
    pairs: int,
    seed: int = 0,
) -> SeminormCheck:
    """Sampled nu-seminorm of (B o h - A) against its transport majorant.

    The majorant is assembled on the same pair set: sampled Lipschitz
    seminorm of (A - B) (over the pairs and their h-images) times the worst
    d(h x, h y)/d(x,y)^nu ratio, plus the sampled nu-seminorm of
    (A o h - A).  By construction the sampled seminorm never exceeds it.
    """
    if not (0.0 < nu <= 1.0):
        raise InvalidParameterError("nu must lie in (0, 1]")
    if not (cocycle_a.is_holder and cocycle_b.is_holder):
        raise InvalidParameterError("both cocycles must be Holder families")
    if pairs < 100:
        raise InvalidParameterError("need at least 100 pairs")
    rng = random.Random(seed)
    pair_set: list[tuple[TorusPoint, TorusPoint]] = []
    for _ in range(pairs):
        pair_set.append(
            (TorusPoint(rng.random(), rng.random()), TorusPoint(rng.random(), rng.random()))
        )
    for k in range(3, 11):
        sep = 2.0 ** (-k)
        for _ in range(max(pairs // 20, 5)):
            p = TorusPoint(rng.random(), rng.random())
            phi = rng.random() * 2.0 * math.pi
            pair_set.append(
                (p, TorusPoint(p.u + sep * math.cos(phi), p.v + sep * math.sin(phi)))
            )
    ev_a = cocycle_a.eval_fn()
    ev_b = cocycle_b.eval_fn()

    def diff_ab(p: TorusPoint):
        aa, ab, ac, ad = ev_a(p.u, p.v)
        ba, bb, bc, bd = ev_b(p.u, p.v)
        return aa - ba, ab - bb, ac - bc, ad - bd

    seminorm = 0.0
    lip = 0.0
    ratio = 0.0
    sem_ah = 0.0
    for p, q in pair_set:
        d = distance(p, q)
        if d < 1e-15:
            continue
        dnu = d ** nu
        hp = h.forward(p)
        hq = h.forward(q)
        dh = distance(hp, hq)
        ratio = max(ratio, dh / dnu)
        # difference cocycle D = B o h - A sampled directly
        b_hp = ev_b(hp.u, hp.v)
        b_hq = ev_b(hq.u, hq.v)
        a_p = ev_a(p.u, p.v)
        a_q = ev_a(q.u, q.v)
        dm = tuple(
            (b_hp[i] - a_p[i]) - (b_hq[i] - a_q[i]) for i in range(4)
        )
        seminorm = max(seminorm, op_norm(*dm) / dnu)
        # Lipschitz proxy of (A - B) over the pairs and their images
        for x, y, dist_xy in ((p, q, d), (hp, hq, dh)):
            if dist_xy < 1e-15:
                continue
            mx = diff_ab(x)
            my = diff_ab(y)
            lip = max(
                lip,
                op_norm(mx[0] - my[0], mx[1] - my[1], mx[2] - my[2], mx[3] - my[3])
                / dist_xy,
            )
        a_hp = ev_a(hp.u, hp.v)
        a_hq = ev_a(hq.u, hq.v)
        dm2 = tuple((a_hp[i] - a_p[i]) - (a_hq[i] - a_q[i]) for i in range(4))
        sem_ah = max(sem_ah, op_norm(*dm2) / dnu)
    return SeminormCheck(seminorm=seminorm, bound=lip * ratio + sem_ah)


def serialize_conjugacy(h: ConjugacyMap) -> str:
    """Text serialization, bit-exact round trip via repr floats."""
    lines = [f"conjugacy v1 resolution={h.resolution} residual={h.residual!r}"]
    g = h.resolution
    for i in range(g):
        for j in range(g):
            lines.append(f"{i} {j} {float(h.du[i, j])!r} {float(h.dv[i, j])!r}")
    return "\n".join(lines) + "\n"


def parse_conjugacy(text: str) -> ConjugacyMap:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("conjugacy v1 "):
        raise InvalidParameterError("missing 'conjugacy v1' header")
    header = lines[0].split()
    fields = dict(tok.split("=", 1) for tok in header[2:])
    try:
        resolution = int(fields["resolution"])
        residual = float(fields["residual"])
    except (KeyError, ValueError) as exc:
        raise InvalidParameterError(f"bad conjugacy header {lines[0]!r}") from exc
    if len(lines) - 1 != resolution * resolution:
        raise InvalidParameterError(
            f"expected {resolution * resolution} grid lines, got {len(lines) - 1}"
        )
    du = np.zeros((resolution, resolution))
    dv = np.zeros((resolution, resolution))
    for ln in lines[1:]:
        stoks = ln.split()
        if len(stoks) != 4:
            raise InvalidParameterError(f"bad grid line {ln!r}")
        i, j = int(stoks[0]), int(stoks[1])
        du[i, j] = float(stoks[2])
        dv[i, j] = float(stoks[3])
    return ConjugacyMap(du, dv, resolution, residual)
