"""Backward induction of default and early-redemption boundaries.

At each coupon date (walking from the penultimate one to the first) the
keep-value function is priced with the boundaries already known above it,
then two scalar roots are located: the firm value below which default
occurs and, where redemption can pay, the firm value below which redeeming
beats keeping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import (
    BondSpec,
    MarketParams,
    adjusted_coupons,
    redemption_amount,
    validate,
)
from .errors import BracketFailure, DegenerateBond, MultipleRoots
from .mvncdf import MvnAccuracy


@dataclass(frozen=True)
class BoundarySchedule:
    """Per-coupon-date decision boundaries (arrays 0-based over dates).

    ``default_boundaries`` has one entry per coupon date, the last one
    pinned at the final adjusted coupon.  ``redemption_boundaries`` exist
    only for the first ``last_redeemable_index`` dates.  ``upper`` /
    ``lower`` are the pointwise max/min of the two where both exist;
    ``redemption_active[k]`` records whether the redemption band at date k
    is nonempty (default boundary strictly below the redemption one).
    """

    default_boundaries: tuple[float, ...]
    redemption_boundaries: tuple[float, ...]
    upper_boundaries: tuple[float, ...]
    lower_boundaries: tuple[float, ...]
    redemption_active: tuple[bool, ...]
    last_redeemable_index: int
    recovery: float
    degenerate: bool = False
    warnings: tuple[str, ...] = ()
    boundary_tol: float = 1e-3


def default_boundary_tol(spec: BondSpec) -> float:
    return 1e-6 * spec.face_value


def search_ceiling(spec: BondSpec) -> float:
    """Upper end of the root bracket; far above any keep-value saturation."""
    return 10.0 * (float(adjusted_coupons(spec).sum()) + spec.face_value)


def _illinois_root(f, lo, hi, f_lo, f_hi, tol, max_iter=200):
    """Bracketed root by false position with the Illinois anti-stall damping."""
    side = 0
    for _ in range(max_iter):
        x = (f_hi * lo - f_lo * hi) / (f_hi - f_lo)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        fx = f(x)
        if fx == 0.0:
            return x
        if (fx < 0.0) == (f_lo < 0.0):
            lo, f_lo = x, fx
            if side == -1:
                f_hi *= 0.5
            side = -1
        else:
            hi, f_hi = x, fx
            if side == 1:
                f_lo *= 0.5
            side = 1
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
    return 0.5 * (lo + hi)


def _expanding_bracket(f, lo, hi, ceiling_growths=2):
    """Evaluate at both ends, doubling the top up to twice on a missing sign."""
    f_lo = f(lo)
    f_hi = f(hi)
    grows = 0
    while f_lo * f_hi > 0 and grows < ceiling_growths:
        hi *= 2.0
        f_hi = f(hi)
        grows += 1
    return lo, hi, f_lo, f_hi


def solve_default_boundary(
    date_index: int,
    price_at_date,
    spec: BondSpec,
    mkt: MarketParams,
    boundary_tol: float | None = None,
) -> float:
    """Firm value at which assets just cover the better of keeping/redeeming.

    ``price_at_date`` maps firm value to the keep value (next subinterval's
    price at this date, coupon excluded).  When even the redemption floor
    cannot be beaten by keeping, the floor itself is the exact root and no
    iteration runs.
    """
    tol = boundary_tol if boundary_tol is not None else default_boundary_tol(spec)
    cbar = adjusted_coupons(spec)
    if date_index == spec.n_dates - 1:
        return float(cbar[-1])
    floor = redemption_amount(spec, date_index)
    coupon = float(cbar[date_index])
    if floor > 0 and price_at_date(floor) + coupon <= floor:
        return floor

    def residual(v):
        keep = price_at_date(v) + coupon
        return v - max(floor, keep)

    lo = max(floor, tol)
    if residual(lo) >= 0.0:
        return lo
    lo, hi, f_lo, f_hi = _expanding_bracket(residual, lo, search_ceiling(spec))
    if f_lo * f_hi > 0:
        raise BracketFailure(
            f"no default-boundary sign change below {hi:g}", index=date_index
        )
    return _illinois_root(residual, lo, hi, f_lo, f_hi, tol)


def solve_early_redemption_boundary(
    date_index: int,
    price_at_date,
    spec: BondSpec,
    mkt: MarketParams,
    boundary_tol: float | None = None,
) -> float:
    """Firm value at which keeping the bond stops beating early redemption.

    Only defined for dates up to the last redeemable index; past it the
    keep value exceeds the redemption amount for every firm value.
    """
    from .domain import check_coupon_lower_bound, compute_last_redeemable_index

    holds, _ = check_coupon_lower_bound(spec, mkt)
    if not holds:
        raise DegenerateBond("coupon bound fails; no early-redemption boundary exists")
    if date_index >= compute_last_redeemable_index(spec):
        raise BracketFailure(
            "keep value always exceeds the redemption amount at this date",
            index=date_index,
        )
    tol = boundary_tol if boundary_tol is not None else default_boundary_tol(spec)
    cbar = adjusted_coupons(spec)
    target = redemption_amount(spec, date_index) - float(cbar[date_index])

    def residual(v):
        return price_at_date(v) - target

    lo, hi, f_lo, f_hi = _expanding_bracket(residual, tol, search_ceiling(spec))
    if f_lo * f_hi > 0:
        raise BracketFailure(
            f"no redemption-boundary sign change below {hi:g}", index=date_index
        )
    return _illinois_root(residual, lo, hi, f_lo, f_hi, tol)


def _uniqueness_scan(residual_vec, spec: BondSpec, points: int) -> None:
    """Reject residuals whose sign flips more than once over the scan grid."""
    grid = np.geomspace(default_boundary_tol(spec), search_ceiling(spec), points)
    values = residual_vec(grid)
    sign = np.sign(values)
    sign = sign[sign != 0]
    flips = int(np.count_nonzero(sign[:-1] != sign[1:]))
    if flips > 1:
        raise MultipleRoots(
            f"boundary residual changed sign {flips} times; volatility too low "
            "for a well-defined boundary"
        )


def build_schedule(
    spec: BondSpec,
    mkt: MarketParams,
    acc: MvnAccuracy | None = None,
    boundary_tol: float | None = None,
    uniqueness_points: int = 256,
) -> BoundarySchedule:
    """Solve every boundary by backward induction over coupon dates.

    When the coupon bound fails the bond degenerates to a zero-coupon note
    redeemed at the first date, and the schedule only carries that date's
    default boundary (the face value).  When the volatility condition
    fails, each solved boundary is double-checked by a sign-change scan and
    every result carries a warning flag.
    """
    from .pricer import PriceQuery, price_at

    acc = acc or MvnAccuracy()
    tol = boundary_tol if boundary_tol is not None else default_boundary_tol(spec)
    report = validate(spec, mkt)
    if not report.coupon_condition_holds:
        return BoundarySchedule(
            default_boundaries=(spec.face_value,),
            redemption_boundaries=(),
            upper_boundaries=(spec.face_value,),
            lower_boundaries=(),
            redemption_active=(),
            last_redeemable_index=0,
            recovery=mkt.recovery,
            degenerate=True,
            warnings=report.warnings,
            boundary_tol=tol,
        )

    n = spec.n_dates
    m_idx = report.last_redeemable_index
    cbar = adjusted_coupons(spec)
    dates = spec.maturity_dates
    scan = uniqueness_points if not report.volatility_condition_holds else 0

    d_arr = np.full(n, np.nan)
    e_arr = np.full(m_idx, np.nan)
    u_arr = np.full(n, np.nan)
    l_arr = np.full(m_idx, np.nan)
    active = np.zeros(m_idx, dtype=bool)
    d_arr[n - 1] = cbar[-1]
    u_arr[n - 1] = cbar[-1]

    def partial_schedule() -> BoundarySchedule:
        return BoundarySchedule(
            default_boundaries=tuple(d_arr),
            redemption_boundaries=tuple(e_arr),
            upper_boundaries=tuple(u_arr),
            lower_boundaries=tuple(l_arr),
            redemption_active=tuple(bool(a) for a in active),
            last_redeemable_index=m_idx,
            recovery=mkt.recovery,
            warnings=report.warnings,
            boundary_tol=tol,
        )

    for k in range(n - 2, -1, -1):
        sched_above = partial_schedule()

        def keep_value(v, _s=sched_above, _t=dates[k], _i=k + 1):
            return price_at(PriceQuery(v, _t, subinterval=_i), spec, mkt, _s, acc).price

        d_arr[k] = solve_default_boundary(k, keep_value, spec, mkt, tol)
        if k < m_idx:
            e_arr[k] = solve_early_redemption_boundary(k, keep_value, spec, mkt, tol)
            u_arr[k] = max(d_arr[k], e_arr[k])
            l_arr[k] = min(d_arr[k], e_arr[k])
            active[k] = e_arr[k] - d_arr[k] > tol
        else:
            u_arr[k] = d_arr[k]

        if scan:
            floor = redemption_amount(spec, k)
            coupon = float(cbar[k])

            def default_residual(v, _fn=keep_value, _floor=floor, _c=coupon):
                return v - np.maximum(_floor, np.asarray(_fn(v)) + _c)

            _uniqueness_scan(default_residual, spec, scan)

    return partial_schedule()
