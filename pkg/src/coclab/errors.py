"""Exception hierarchy shared by all coclab modules."""

from __future__ import annotations


class CoclabError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidParameterError(CoclabError, ValueError):
    """A constructor or operation argument violates its documented range."""


class UnsupportedOperationError(CoclabError):
    """The requested variant/parameter combination is outside the shipped contracts."""


class BaseNotHyperbolicError(CoclabError):
    """The base map carries no certified hyperbolicity rate."""


class NonHolderFamilyError(CoclabError):
    """Holder seminorms are refused for discontinuous cocycle families."""


class MeasureUnsupportedError(CoclabError):
    """The measure specification is not valid for the given base map."""


class NotPeriodicError(CoclabError):
    """A point claimed periodic fails the return-distance check."""

    def __init__(self, message: str, return_distance: float):
        super().__init__(message)
        self.return_distance = return_distance


class ConjugacyConvergenceError(CoclabError):
    """The conjugacy iteration could not reach the requested residual."""

    def __init__(self, message: str, last_residual: float, sweeps: int):
        super().__init__(message)
        self.last_residual = last_residual
        self.sweeps = sweeps


class InversionError(CoclabError):
    """Pointwise inversion of a near-identity map failed to converge."""

    def __init__(self, message: str, point: tuple[float, float]):
        super().__init__(message)
        self.point = point


class SearchPreconditionError(CoclabError):
    """A perturbation search was started from a state its contract excludes."""


class ConfigError(CoclabError):
    """Aggregated configuration violations; carries every failure found."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


class EmptyTableError(CoclabError):
    """Plot-data emission was asked to format an empty table."""
