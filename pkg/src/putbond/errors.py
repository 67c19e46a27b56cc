"""Exception and warning types shared across the engine."""
from __future__ import annotations


class PutBondError(Exception):
    """Base class for all engine errors."""


class DomainError(PutBondError):
    """An input value lies outside the operation's domain (e.g. V <= 0)."""


class ConfigError(PutBondError):
    """A run configuration is malformed or incomplete."""


class UnknownFigure(ConfigError):
    """Requested sweep figure id is not registered."""


class MalformedSequence(DomainError):
    """A gradient-cap sequence is not strictly decreasing inside (recovery, 1)."""


class NonIncreasingTimes(DomainError):
    """Observation times must be strictly increasing and after the value date."""


class NotPositiveDefinite(DomainError):
    """Correlation matrix failed its Cholesky factorization."""


class ExpiredOption(DomainError):
    """Valuation date is at or past the first observation date."""


class BracketFailure(PutBondError):
    """Root bracketing found no sign change on the search interval."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class MultipleRoots(PutBondError):
    """A boundary residual changed sign more than once; result is ambiguous."""


class DegenerateBond(PutBondError):
    """Coupons are too small to support early redemption; use the zero-coupon fallback."""


class UnstableScheme(PutBondError):
    """Finite-difference solution violated its a-priori bounds."""


class ZeroPrice(PutBondError):
    """Bond price is non-positive where a positive value is required."""


class UndefinedSpread(PutBondError):
    """Credit spread is undefined (zero price or zero remaining life)."""


class BudgetExceeded(UserWarning):
    """Integrator hit its point budget before reaching the requested tolerance.

    Issued as a warning; the best available estimate is still returned.
    """
