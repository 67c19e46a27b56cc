"""Closed-form bond price built from chains of binary claims.

On each inter-coupon subinterval the conditional bond price decomposes into
three legs driven by the boundary schedule:

* a coupon leg: each future coupon paid only while the firm clears every
  upper boundary on the way;
* a recovery leg: the recovery fraction of firm value collected when the
  default boundary is first breached;
* a redemption leg: the early-redemption amount collected between the lower
  and upper boundary at the dates where redeeming can be preferable.

All legs accept a vector of firm values and price in one batched pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .binaries import BinarySpec, binary_price
from .domain import BondSpec, MarketParams, adjusted_coupons, redemption_amount
from .errors import DegenerateBond, DomainError
from .mvncdf import MvnAccuracy

if TYPE_CHECKING:
    from .boundaries import BoundarySchedule

_DATE_TOL = 1e-9


@dataclass(frozen=True)
class PriceQuery:
    """Where to evaluate the conditional bond price.

    ``subinterval`` picks the price function when ``t`` is ambiguous: at a
    coupon date the default mapping uses the earlier subinterval, whose
    value there is the post-decision payoff; passing the later subinterval
    index instead gives the smooth left-endpoint value.
    """

    firm_value: float | np.ndarray
    t: float
    subinterval: int | None = None


@dataclass(frozen=True)
class PriceResult:
    price: float | np.ndarray
    subinterval: int
    coupon_leg: float | np.ndarray
    recovery_leg: float | np.ndarray
    redemption_leg: float | np.ndarray
    warnings: tuple[str, ...] = ()


def locate_subinterval(spec: BondSpec, t: float) -> int:
    """Index i with T_i < t <= T_{i+1} (t = 0 maps to the first subinterval)."""
    if t < -_DATE_TOL or t > spec.maturity + _DATE_TOL:
        raise DomainError("t outside the bond's life")
    if t <= 0.0:
        return 0
    idx = int(np.searchsorted(np.asarray(spec.maturity_dates), t - _DATE_TOL, side="left"))
    return min(idx, spec.n_dates - 1)


def _as_rows(V) -> tuple[np.ndarray, bool]:
    arr = np.atleast_1d(np.asarray(V, dtype=float))
    return arr, bool(np.ndim(V))


def terminal_payoff(
    i: int,
    V,
    next_price: Callable | None,
    spec: BondSpec,
    sched: "BoundarySchedule",
):
    """Post-decision bond value at the right end of subinterval ``i``.

    At maturity the holder receives the final adjusted coupon or the
    recovery fraction.  At interior dates the keep value (``next_price``
    plus the coupon) applies above the upper boundary, the redemption
    amount between the lower and upper boundary when redemption is active,
    and recovery below the default boundary.  All value-side indicators are
    closed at their boundary.
    """
    v, vector = _as_rows(V)
    if np.any(v < 0):
        raise DomainError("firm value must be nonnegative")
    cbar = adjusted_coupons(spec)
    delta = sched.recovery
    if i == spec.n_dates - 1:
        out = np.where(v >= cbar[-1], cbar[-1], delta * v)
    else:
        keep = np.asarray(next_price(v if vector else float(v[0])), dtype=float) + cbar[i]
        upper = sched.upper_boundaries[i]
        default = sched.default_boundaries[i]
        out = np.where(v >= upper, keep, 0.0)
        if i < sched.last_redeemable_index and sched.redemption_active[i]:
            lower = sched.lower_boundaries[i]
            amount = redemption_amount(spec, i)
            out = out + amount * ((v >= lower).astype(float) - (v >= upper).astype(float))
        out = np.where(v < default, delta * v, out)
    return out if vector else float(out[0])


def _chain(kind: str, strikes, expiries, signs) -> BinarySpec:
    return BinarySpec(tuple(strikes), tuple(expiries), tuple(signs), kind)


def price_at(
    query: PriceQuery,
    spec: BondSpec,
    mkt: MarketParams,
    sched: "BoundarySchedule",
    acc: MvnAccuracy | None = None,
) -> PriceResult:
    """Conditional bond price on the subinterval containing ``query.t``.

    Evaluates the three-leg closed form away from coupon dates; exactly at
    a coupon date it returns the post-decision payoff (using the next
    subinterval's smooth value for the keep branch).  Zero firm value
    prices to zero.
    """
    acc = acc or MvnAccuracy()
    if sched.degenerate:
        raise DegenerateBond("coupon bound fails; price with the zero-coupon fallback")
    v, vector = _as_rows(query.firm_value)
    if np.any(v < 0):
        raise DomainError("firm value must be positive")
    i = query.subinterval if query.subinterval is not None else locate_subinterval(spec, query.t)
    if not 0 <= i < spec.n_dates:
        raise DomainError("subinterval out of range")
    dates = spec.maturity_dates
    t_lo = 0.0 if i == 0 else dates[i - 1]
    if not (t_lo - _DATE_TOL <= query.t <= dates[i] + _DATE_TOL):
        raise DomainError("t outside the requested subinterval")

    if abs(query.t - dates[i]) <= _DATE_TOL:
        return _payoff_result(i, v, vector, spec, mkt, sched, acc)

    n = spec.n_dates
    cbar = adjusted_coupons(spec)
    upper = sched.upper_boundaries
    lower = sched.lower_boundaries
    default = sched.default_boundaries
    m_idx = sched.last_redeemable_index
    t = query.t

    live = v > 0.0
    v_live = v[live]
    coupon_leg = np.zeros_like(v)
    recovery_leg = np.zeros_like(v)
    redemption_leg = np.zeros_like(v)
    if v_live.size:
        cpn = np.zeros_like(v_live)
        rec = np.zeros_like(v_live)
        red = np.zeros_like(v_live)
        for k in range(i, n):
            order = k - i + 1
            cpn_chain = _chain("bond", upper[i : k + 1], dates[i : k + 1], (1,) * order)
            cpn += cbar[k] * np.asarray(binary_price(cpn_chain, v_live, t, mkt, acc))
            rec_chain = _chain(
                "asset",
                tuple(upper[i:k]) + (default[k],),
                dates[i : k + 1],
                (1,) * (order - 1) + (-1,),
            )
            rec += mkt.recovery * np.asarray(binary_price(rec_chain, v_live, t, mkt, acc))
        for k in range(i, m_idx):
            if not sched.redemption_active[k]:
                continue
            amount = redemption_amount(spec, k)
            shared = tuple(upper[i:k])
            span = dates[i : k + 1]
            signs = (1,) * (k - i + 1)
            low_chain = _chain("bond", shared + (lower[k],), span, signs)
            up_chain = _chain("bond", shared + (upper[k],), span, signs)
            red += amount * (
                np.asarray(binary_price(low_chain, v_live, t, mkt, acc))
                - np.asarray(binary_price(up_chain, v_live, t, mkt, acc))
            )
        coupon_leg[live] = cpn
        recovery_leg[live] = rec
        redemption_leg[live] = red

    total = coupon_leg + recovery_leg + redemption_leg
    return PriceResult(
        price=total if vector else float(total[0]),
        subinterval=i,
        coupon_leg=coupon_leg if vector else float(coupon_leg[0]),
        recovery_leg=recovery_leg if vector else float(recovery_leg[0]),
        redemption_leg=redemption_leg if vector else float(redemption_leg[0]),
        warnings=sched.warnings,
    )


def _payoff_result(i, v, vector, spec, mkt, sched, acc) -> PriceResult:
    """Leg-style breakdown of the coupon-date payoff."""
    cbar = adjusted_coupons(spec)
    date = spec.maturity_dates[i]
    if i == spec.n_dates - 1:
        keep_part = np.where(v >= cbar[-1], cbar[-1], 0.0)
        rec_part = np.where(v < cbar[-1], mkt.recovery * v, 0.0)
        red_part = np.zeros_like(v)
    else:
        def next_price(x):
            q = PriceQuery(firm_value=x, t=date, subinterval=i + 1)
            return price_at(q, spec, mkt, sched, acc).price

        upper = sched.upper_boundaries[i]
        default = sched.default_boundaries[i]
        keep = np.asarray(next_price(v), dtype=float) + cbar[i]
        keep_part = np.where(v >= upper, keep, 0.0)
        red_part = np.zeros_like(v)
        if i < sched.last_redeemable_index and sched.redemption_active[i]:
            amount = redemption_amount(spec, i)
            red_part = amount * (
                (v >= sched.lower_boundaries[i]).astype(float) - (v >= upper).astype(float)
            )
        rec_part = np.where(v < default, mkt.recovery * v, 0.0)
    total = keep_part + red_part + rec_part
    return PriceResult(
        price=total if vector else float(total[0]),
        subinterval=i,
        coupon_leg=keep_part if vector else float(keep_part[0]),
        recovery_leg=rec_part if vector else float(rec_part[0]),
        redemption_leg=red_part if vector else float(red_part[0]),
        warnings=sched.warnings,
    )


def degenerate_price(
    V,
    t: float,
    spec: BondSpec,
    mkt: MarketParams,
    acc: MvnAccuracy | None = None,
):
    """Zero-coupon fallback when the coupon bound fails.

    The holder redeems at the first coupon date whatever the firm value, so
    the claim is face value against the firm clearing it there, plus
    recovery otherwise.
    """
    acc = acc or MvnAccuracy()
    v, vector = _as_rows(V)
    if np.any(v < 0):
        raise DomainError("firm value must be nonnegative")
    first = spec.maturity_dates[0]
    face = spec.face_value
    if t > first + _DATE_TOL:
        raise DomainError("degenerate bond only lives until the first coupon date")
    if abs(t - first) <= _DATE_TOL:
        out = np.where(v >= face, face, mkt.recovery * v)
        return out if vector else float(out[0])
    out = np.zeros_like(v)
    live = v > 0
    if np.any(live):
        cash = binary_price(_chain("bond", (face,), (first,), (1,)), v[live], t, mkt, acc)
        asset = binary_price(_chain("asset", (face,), (first,), (-1,)), v[live], t, mkt, acc)
        out[live] = face * np.asarray(cash) + mkt.recovery * np.asarray(asset)
    return out if vector else float(out[0])


def initial_price_normalized(
    leverage: float,
    coupon_ratios,
    maturity_dates,
    mkt: MarketParams,
    acc: MvnAccuracy | None = None,
) -> float:
    """Initial price per unit face value from the leverage and coupon ratios.

    The price is homogeneous of degree one in (face, coupons, firm value),
    so it only depends on the leverage ``face / V_0`` and the coupon-to-face
    ratios.  Degenerate coupon streams fall back to the zero-coupon form.
    """
    from .boundaries import build_schedule

    if not leverage > 0:
        raise DomainError("leverage must be positive")
    acc = acc or MvnAccuracy()
    face = 1.0
    spec = BondSpec(
        maturity_dates=tuple(maturity_dates),
        coupons=tuple(face * c for c in coupon_ratios),
        face_value=face,
    )
    v0 = face / leverage
    sched = build_schedule(spec, mkt, acc)
    if sched.degenerate:
        return degenerate_price(v0, 0.0, spec, mkt, acc) / face
    return price_at(PriceQuery(v0, 0.0), spec, mkt, sched, acc).price / face
