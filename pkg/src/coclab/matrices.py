"""Closed-form 2x2 linear algebra used in the cocycle inner loops.

Everything here is exact-formula arithmetic (no iterative decompositions):
operator norms and singular pairs come from the 2x2 singular value formula,
inverses from the adjugate.  Hot paths work on unpacked floats; the Mat2
dataclass is the value type at API boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParameterError

SL2_DET_TOL = 1e-9


def op_norm(a: float, b: float, c: float, d: float) -> float:
    """Operator 2-norm of [[a,b],[c,d]] via the singular value formula."""
    q = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = q * q - 4.0 * det * det
    if disc < 0.0:
        disc = 0.0
    return math.sqrt(0.5 * (q + math.sqrt(disc)))


def singular_values(a: float, b: float, c: float, d: float) -> tuple[float, float]:
    """Both singular values, largest first.

    The small one is recovered as |det|/s1 which avoids the cancellation in
    the direct formula when the matrix is ill conditioned.
    """
    s1 = op_norm(a, b, c, d)
    det = a * d - b * c
    if s1 == 0.0:
        return 0.0, 0.0
    return s1, abs(det) / s1


def top_right_singular_vector(a: float, b: float, c: float, d: float) -> tuple[float, float]:
    """Unit right singular vector for the largest singular value.

    Eigenvector of M^T M for its top eigenvalue; sign is unspecified.
    """
    p = a * a + c * c
    r = a * b + c * d
    s = b * b + d * d
    s1sq = op_norm(a, b, c, d) ** 2
    # Pick the better conditioned of the two eigenvector expressions.
    vx1, vy1 = s1sq - s, r
    vx2, vy2 = r, s1sq - p
    n1 = math.hypot(vx1, vy1)
    n2 = math.hypot(vx2, vy2)
    if n1 == 0.0 and n2 == 0.0:
        # M^T M is a multiple of the identity; any direction works.
        return 1.0, 0.0
    if n1 >= n2:
        return vx1 / n1, vy1 / n1
    return vx2 / n2, vy2 / n2


def bottom_right_singular_vector(a: float, b: float, c: float, d: float) -> tuple[float, float]:
    """Unit right singular vector for the smallest singular value."""
    vx, vy = top_right_singular_vector(a, b, c, d)
    return -vy, vx


def top_left_singular_vector(a: float, b: float, c: float, d: float) -> tuple[float, float]:
    """Unit left singular vector for the largest singular value (image direction)."""
    vx, vy = top_right_singular_vector(a, b, c, d)
    ux = a * vx + b * vy
    uy = c * vx + d * vy
    n = math.hypot(ux, uy)
    if n == 0.0:
        return 1.0, 0.0
    return ux / n, uy / n


def line_angle(v: tuple[float, float], w: tuple[float, float]) -> float:
    """Angle in [0, pi/2] between the lines spanned by v and w."""
    cross = v[0] * w[1] - v[1] * w[0]
    dot = v[0] * w[0] + v[1] * w[1]
    return math.atan2(abs(cross), abs(dot))


def rotate_vec(x: float, y: float, angle: float) -> tuple[float, float]:
    ca, sa = math.cos(angle), math.sin(angle)
    return ca * x - sa * y, sa * x + ca * y


@dataclass(frozen=True, slots=True)
class Mat2:
    """Row-major 2x2 real matrix."""

    a: float
    b: float
    c: float
    d: float

    @staticmethod
    def identity() -> "Mat2":
        return Mat2(1.0, 0.0, 0.0, 1.0)

    @staticmethod
    def rotation(angle: float) -> "Mat2":
        ca, sa = math.cos(angle), math.sin(angle)
        return Mat2(ca, -sa, sa, ca)

    @staticmethod
    def diagonal(x: float, y: float) -> "Mat2":
        return Mat2(float(x), 0.0, 0.0, float(y))

    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def trace(self) -> float:
        return self.a + self.d

    def norm(self) -> float:
        return op_norm(self.a, self.b, self.c, self.d)

    def frobenius(self) -> float:
        return math.sqrt(self.a ** 2 + self.b ** 2 + self.c ** 2 + self.d ** 2)

    def mul(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def sub(self, other: "Mat2") -> "Mat2":
        return Mat2(self.a - other.a, self.b - other.b, self.c - other.c, self.d - other.d)

    def scale(self, t: float) -> "Mat2":
        return Mat2(self.a * t, self.b * t, self.c * t, self.d * t)

    def matvec(self, x: float, y: float) -> tuple[float, float]:
        return self.a * x + self.b * y, self.c * x + self.d * y

    def inverse(self) -> "Mat2":
        det = self.det()
        if abs(det) < 1e-300:
            raise InvalidParameterError("matrix is singular, no inverse")
        inv = 1.0 / det
        return Mat2(self.d * inv, -self.b * inv, -self.c * inv, self.a * inv)

    def sl2_inverse(self) -> "Mat2":
        """Adjugate inverse, exact for determinant-one matrices."""
        return Mat2(self.d, -self.b, -self.c, self.a)


def require_sl2(m: Mat2, tol: float = SL2_DET_TOL) -> Mat2:
    """Validate |det - 1| <= tol for SL(2,R)-tagged values."""
    if abs(m.det() - 1.0) > tol:
        raise InvalidParameterError(
            f"matrix determinant {m.det()!r} is not 1 within {tol}"
        )
    return m
