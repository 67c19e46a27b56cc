"""Core bond/market value types, derived quantities and design-parameter checks.

Indexing convention used throughout the package: ``dates[j]`` is the
(j+1)-th coupon date, so arrays aligned with coupon dates are 0-based
while prose ("the i-th coupon date") stays 1-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedSequence


@dataclass(frozen=True)
class BondSpec:
    """Contractual terms of a discrete-coupon bond with early-redemption right.

    Args:
        maturity_dates: strictly increasing coupon dates T_1..T_N in years
            (the implicit issue date is 0; the last date is the maturity).
        coupons: coupon amounts paid at each date, all >= 0.
        face_value: principal repaid at maturity, > 0.
    """

    maturity_dates: tuple[float, ...]
    coupons: tuple[float, ...]
    face_value: float

    def __post_init__(self):
        object.__setattr__(self, "maturity_dates", tuple(float(t) for t in self.maturity_dates))
        object.__setattr__(self, "coupons", tuple(float(c) for c in self.coupons))
        object.__setattr__(self, "face_value", float(self.face_value))
        if len(self.maturity_dates) < 1:
            raise ValueError("at least one coupon date is required")
        if len(self.coupons) != len(self.maturity_dates):
            raise ValueError("coupons and maturity_dates must have equal length")
        prev = 0.0
        for t in self.maturity_dates:
            if not t > prev:
                raise ValueError("maturity_dates must satisfy 0 < T_1 < ... < T_N")
            prev = t
        if any(c < 0 for c in self.coupons):
            raise ValueError("coupons must be nonnegative")
        if not self.face_value > 0:
            raise ValueError("face_value must be positive")

    @property
    def n_dates(self) -> int:
        return len(self.maturity_dates)

    @property
    def maturity(self) -> float:
        return self.maturity_dates[-1]


@dataclass(frozen=True)
class MarketParams:
    """Flat market environment for the firm-value diffusion.

    Args:
        short_rate: continuously compounded risk-free rate, >= 0.
        payout_rate: firm payout (dividend-like) rate, >= 0.
        volatility: firm-value volatility per sqrt-year, > 0.
        recovery: fraction of firm value paid out on default, in [0, 1).
    """

    short_rate: float
    payout_rate: float
    volatility: float
    recovery: float

    def __post_init__(self):
        if self.short_rate < 0 or self.payout_rate < 0:
            raise ValueError("rates must be nonnegative")
        if not self.volatility > 0:
            raise ValueError("volatility must be strictly positive")
        if not 0 <= self.recovery < 1:
            raise ValueError("recovery must lie in [0, 1)")


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the design-parameter checks for a bond/market pair."""

    coupon_condition_holds: bool
    coupon_condition_margin: float
    volatility_condition_holds: bool
    gradient_cap_sequence: tuple[float, ...]
    last_redeemable_index: int
    warnings: tuple[str, ...] = field(default=())


def adjusted_coupons(spec: BondSpec) -> np.ndarray:
    """Cash amounts due at each coupon date; the final one includes principal."""
    cbar = np.asarray(spec.coupons, dtype=float).copy()
    cbar[-1] += spec.face_value
    return cbar


def redemption_amount(spec: BondSpec, date_index: int) -> float:
    """Amount received when redeeming early at coupon date ``date_index`` (0-based).

    Equals the face value less all coupons already collected at earlier dates.
    """
    if not 0 <= date_index < spec.n_dates:
        raise IndexError("date_index out of range")
    return spec.face_value - float(sum(spec.coupons[:date_index]))


def check_coupon_lower_bound(spec: BondSpec, mkt: MarketParams) -> tuple[bool, float]:
    """Test whether the coupon stream is rich enough to support early redemption.

    Compounded to maturity, the coupons must strictly out-earn the interest
    the face value would have accrued past the first coupon date:

        sum_j C_j e^{r (T_N - T_j)}  >  F (e^{r (T_N - T_1)} - 1)

    Returns ``(holds, margin)`` with ``margin = LHS - RHS``.  Exact equality
    counts as a failure.
    """
    r = mkt.short_rate
    t_n = spec.maturity
    lhs = sum(c * math.exp(r * (t_n - t)) for c, t in zip(spec.coupons, spec.maturity_dates))
    rhs = spec.face_value * (math.exp(r * (t_n - spec.maturity_dates[0])) - 1.0)
    margin = lhs - rhs
    return margin > 0.0, margin


def compute_last_redeemable_index(spec: BondSpec) -> int:
    """Smallest k in [0, N-1] whose cumulative adjusted coupons exceed the face.

    Early redemption can only be preferable at the first k+1 coupon dates;
    afterwards the bond behaves like a plain coupon bond.  The final adjusted
    coupon exceeds the face value, so the index always exists.
    """
    cum = np.cumsum(adjusted_coupons(spec))
    hits = np.nonzero(cum > spec.face_value)[0]
    if hits.size == 0:
        # Only possible when every coupon is zero (cumulative sum tops out at
        # exactly the face value); the bond is degenerate and has no interior
        # redemption dates, so the index is pinned at the last date.
        return spec.n_dates - 1
    return int(hits[0])


def default_gradient_caps(spec: BondSpec, mkt: MarketParams) -> tuple[float, ...]:
    """Equally spaced decreasing caps between 1 and the recovery fraction.

    The i-th cap bounds the price slope at the i-th coupon date.  Uniform
    spacing maximizes the smallest gap between consecutive caps, which makes
    the sufficient volatility condition easiest to satisfy.
    """
    n = spec.n_dates
    delta = mkt.recovery
    return tuple(delta + (1.0 - delta) * (n - i) / n for i in range(1, n + 1))


def check_volatility_condition(
    spec: BondSpec, mkt: MarketParams, caps: tuple[float, ...] | None = None
) -> bool:
    """Sufficient condition for price slopes to stay below the given caps.

    ``caps`` must decrease strictly from below 1 down to the recovery
    fraction.  For every consecutive date pair the volatility must exceed a
    threshold driven by the gap between the caps; with a positive payout rate
    the later cap is discounted before taking the gap.
    """
    if caps is None:
        caps = default_gradient_caps(spec, mkt)
    caps = tuple(float(d) for d in caps)
    delta, b, s_v = mkt.recovery, mkt.payout_rate, mkt.volatility
    if len(caps) != spec.n_dates:
        raise MalformedSequence("need one cap per coupon date")
    if not caps[0] < 1.0 or abs(caps[-1] - delta) > 1e-12:
        raise MalformedSequence("caps must start below 1 and end at the recovery fraction")
    if any(not hi > lo for hi, lo in zip(caps, caps[1:])):
        raise MalformedSequence("caps must be strictly decreasing")

    dates = (0.0,) + spec.maturity_dates
    for i in range(1, spec.n_dates):
        dt = dates[i + 1] - dates[i]
        if b == 0.0:
            bound = (1.0 - delta) / (math.sqrt(2.0 * math.pi * dt) * (caps[i - 1] - caps[i]))
        else:
            damp = math.exp(-b * dt)
            gap = caps[i - 1] - caps[i] * damp
            if gap <= 0:
                return False
            bound = (1.0 - delta) * damp / (math.sqrt(2.0 * math.pi * dt) * gap)
        if s_v < bound:
            return False
    return True


def validate(spec: BondSpec, mkt: MarketParams) -> ValidationReport:
    """Run all design-parameter checks and collect them into a report."""
    holds, margin = check_coupon_lower_bound(spec, mkt)
    caps = default_gradient_caps(spec, mkt)
    vol_ok = check_volatility_condition(spec, mkt, caps)
    warnings: list[str] = []
    if not holds:
        warnings.append(
            "coupon lower bound fails: early redemption dominates at the first "
            "coupon date; the bond degenerates to a zero-coupon note"
        )
    if not vol_ok:
        warnings.append(
            "volatility condition not met for the default cap sequence; "
            "boundary uniqueness is not guaranteed a priori"
        )
    return ValidationReport(
        coupon_condition_holds=holds,
        coupon_condition_margin=margin,
        volatility_condition_holds=vol_ok,
        gradient_cap_sequence=caps,
        last_redeemable_index=compute_last_redeemable_index(spec),
        warnings=tuple(warnings),
    )
