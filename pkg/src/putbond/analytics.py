"""Duration and credit spread of the early-redeemable coupon bond."""
from __future__ import annotations

import math

import numpy as np

from .boundaries import BoundarySchedule
from .domain import BondSpec, MarketParams, adjusted_coupons, redemption_amount
from .errors import UndefinedSpread, ZeroPrice
from .mvncdf import MvnAccuracy, build_correlation, mvn_cdf, mvn_cdf_partial
from .pricer import PriceQuery, price_at


def risk_free_value(i: int, t: float, spec: BondSpec, mkt: MarketParams) -> float:
    """Value of the remaining coupon stream if paid with certainty.

    Sums the discounted adjusted coupons at dates strictly inside the
    remaining life of subinterval ``i``; this is both the credit-spread
    reference and the firm-value-to-infinity price ceiling.
    """
    cbar = adjusted_coupons(spec)
    return float(
        sum(
            cbar[j] * math.exp(-mkt.short_rate * (spec.maturity_dates[j] - t))
            for j in range(i, spec.n_dates)
        )
    )


def _rate_arguments(v0: float, spec: BondSpec, mkt: MarketParams, sched: BoundarySchedule):
    """d-style limit chains at time zero for every horizon k.

    Returns per-k tuples (cash_chain, asset_chain, band_chain) where the
    cash chain uses the drift-minus arguments at the upper boundaries, the
    asset chain the drift-plus arguments with the flipped final coordinate
    at the default boundary, and the band chain swaps the last cash
    argument to the lower boundary.
    """
    s = mkt.volatility
    dates = np.asarray(spec.maturity_dates)
    sqrt_t = np.sqrt(dates)
    drift_minus = (mkt.short_rate - mkt.payout_rate - 0.5 * s * s) * dates
    drift_plus = (mkt.short_rate - mkt.payout_rate + 0.5 * s * s) * dates
    upper = np.asarray(sched.upper_boundaries)
    default = np.asarray(sched.default_boundaries)
    d_minus_u = (np.log(v0 / upper) + drift_minus) / (s * sqrt_t)
    d_plus_u = (np.log(v0 / upper) + drift_plus) / (s * sqrt_t)
    d_plus_d = (np.log(v0 / default) + drift_plus) / (s * sqrt_t)
    lower = np.asarray(sched.lower_boundaries)
    if lower.size:
        m = lower.size
        d_minus_l = (np.log(v0 / lower) + drift_minus[:m]) / (s * sqrt_t[:m])
    else:
        d_minus_l = np.empty(0)
    return d_minus_u, d_plus_u, d_plus_d, d_minus_l


def duration(
    v0: float,
    spec: BondSpec,
    mkt: MarketParams,
    sched: BoundarySchedule,
    acc: MvnAccuracy | None = None,
    full_sensitivity: bool = False,
    bump: float = 1e-5,
) -> float:
    """Rate sensitivity -dB/dr / B of the initial price.

    The closed form differentiates the price at a frozen boundary schedule:
    each joint CDF contributes one pinned-coordinate kernel per argument,
    scaled by the common d-argument rate sensitivity sqrt(T_i)/volatility.
    With ``full_sensitivity`` the boundaries are re-solved at the bumped
    rates instead and the derivative is taken by central differences
    through the whole pipeline.
    """
    acc = acc or MvnAccuracy()
    if full_sensitivity:
        from .boundaries import build_schedule

        base = price_at(PriceQuery(v0, 0.0), spec, mkt, sched, acc).price
        if base <= 1e-12 * spec.face_value:
            raise ZeroPrice("initial price is numerically zero")
        shifted = []
        for dr in (bump, -bump):
            mkt_b = MarketParams(
                mkt.short_rate + dr, mkt.payout_rate, mkt.volatility, mkt.recovery
            )
            sched_b = build_schedule(spec, mkt_b, acc)
            shifted.append(price_at(PriceQuery(v0, 0.0), spec, mkt_b, sched_b, acc).price)
        return -(shifted[0] - shifted[1]) / (2.0 * bump * base)

    n = spec.n_dates
    m_idx = sched.last_redeemable_index
    cbar = adjusted_coupons(spec)
    dates = spec.maturity_dates
    s = mkt.volatility
    delta = mkt.recovery
    d_minus_u, d_plus_u, d_plus_d, d_minus_l = _rate_arguments(v0, spec, mkt, sched)
    rate_sens = np.sqrt(np.asarray(dates)) / s

    value = 0.0
    slope = 0.0  # accumulates -dB/dr
    for k in range(1, n + 1):
        corr = build_correlation(dates[:k], 0.0)
        corr_flip = build_correlation(dates[:k], 0.0, flip_last=True)
        cash_args = d_minus_u[:k]
        asset_args = np.concatenate([d_plus_u[: k - 1], [-d_plus_d[k - 1]]])

        f_k = mvn_cdf(cash_args, corr, acc)
        g_k = mvn_cdf(asset_args, corr_flip, acc)
        f_sens = sum(
            mvn_cdf_partial(cash_args, corr, j, acc) * rate_sens[j - 1] for j in range(1, k + 1)
        )
        g_sens = (
            sum(
                mvn_cdf_partial(asset_args, corr_flip, j, acc) * rate_sens[j - 1]
                for j in range(1, k)
            )
            - mvn_cdf_partial(asset_args, corr_flip, k, acc) * rate_sens[k - 1]
        )

        cash_df = math.exp(-mkt.short_rate * dates[k - 1])
        asset_df = math.exp(-mkt.payout_rate * dates[k - 1])
        value += cbar[k - 1] * cash_df * f_k + delta * v0 * asset_df * g_k
        slope += cbar[k - 1] * cash_df * (dates[k - 1] * f_k - f_sens)
        slope -= delta * v0 * asset_df * g_sens

        if k <= m_idx and sched.redemption_active[k - 1]:
            band_args = np.concatenate([d_minus_u[: k - 1], [d_minus_l[k - 1]]])
            h_k = mvn_cdf(band_args, corr, acc)
            h_sens = sum(
                mvn_cdf_partial(band_args, corr, j, acc) * rate_sens[j - 1]
                for j in range(1, k + 1)
            )
            amount = redemption_amount(spec, k - 1)
            value += amount * cash_df * (h_k - f_k)
            slope += amount * cash_df * (
                dates[k - 1] * (h_k - f_k) - (h_sens - f_sens)
            )

    if value <= 1e-12 * spec.face_value:
        raise ZeroPrice("initial price is numerically zero")
    return slope / value


def credit_spread(
    i: int,
    V: float,
    t: float,
    spec: BondSpec,
    mkt: MarketParams,
    sched: BoundarySchedule,
    acc: MvnAccuracy | None = None,
) -> float:
    """Excess log yield over the sure coupon stream, per remaining year."""
    acc = acc or MvnAccuracy()
    horizon = spec.maturity - t
    if horizon <= 0:
        raise UndefinedSpread("no remaining life at or past maturity")
    price = price_at(PriceQuery(V, t, subinterval=i), spec, mkt, sched, acc).price
    if price <= 0:
        raise UndefinedSpread("non-positive bond price")
    return -(math.log(price) - math.log(risk_free_value(i, t, spec, mkt))) / horizon
