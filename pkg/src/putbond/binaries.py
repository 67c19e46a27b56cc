"""First- and higher-order cash (bond) and asset binary claims.

An m-order binary pays only if the firm value clears (sign ``+``) or falls
short of (sign ``-``) a strike at each of m successive observation dates.
Bond binaries pay one unit of cash at the last date, asset binaries pay the
firm value itself.  Prices reduce to joint normal probabilities under the
sqrt-of-remaining-time correlation; a ``-`` sign reflects that coordinate,
which negates its limit and flips the sign of its correlation row/column.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import MarketParams
from .errors import DomainError, ExpiredOption
from .mvncdf import MvnAccuracy, build_correlation, mvn_cdf_batch


@dataclass(frozen=True)
class BinarySpec:
    """One chain of strikes/dates/signs plus the payout kind.

    Args:
        strikes: positive strike per observation date.
        expiries: strictly increasing observation dates.
        signs: '+'/'-' (or +1/-1) per date; '+' pays on exceedance.
        kind: 'bond' for a cash payout, 'asset' for a firm-value payout.
    """

    strikes: tuple[float, ...]
    expiries: tuple[float, ...]
    signs: tuple[int, ...]
    kind: str

    def __post_init__(self):
        strikes = tuple(float(k) for k in self.strikes)
        expiries = tuple(float(t) for t in self.expiries)
        signs = tuple(1 if s in (1, "+") else -1 if s in (-1, "-") else 0 for s in self.signs)
        object.__setattr__(self, "strikes", strikes)
        object.__setattr__(self, "expiries", expiries)
        object.__setattr__(self, "signs", signs)
        if not (len(strikes) == len(expiries) == len(signs) >= 1):
            raise ValueError("strikes, expiries and signs must have equal positive length")
        if any(k <= 0 for k in strikes):
            raise ValueError("strikes must be positive")
        if any(b >= a for a, b in zip(expiries[1:], expiries)):
            raise ValueError("expiries must be strictly increasing")
        if 0 in signs:
            raise ValueError("signs must be '+'/'-' or +1/-1")
        if self.kind not in ("bond", "asset"):
            raise ValueError("kind must be 'bond' or 'asset'")

    @property
    def order(self) -> int:
        return len(self.strikes)


def _log_moneyness_limits(spec: BinarySpec, V: np.ndarray, t: float, mkt: MarketParams):
    """Signed standardized limits, one row per firm value."""
    tau = np.asarray(spec.expiries) - t
    s_rt = mkt.volatility * np.sqrt(tau)
    half_var = 0.5 * mkt.volatility**2
    drift = mkt.short_rate - mkt.payout_rate + (half_var if spec.kind == "asset" else -half_var)
    d = (np.log(V[:, None] / np.asarray(spec.strikes)) + drift * tau) / s_rt
    return d * np.asarray(spec.signs)


def binary_price(
    spec: BinarySpec,
    V,
    t: float,
    mkt: MarketParams,
    acc: MvnAccuracy | None = None,
):
    """Value of the binary claim at time ``t`` for firm value(s) ``V``.

    Accepts a scalar or an array of firm values and returns the same shape.
    Raises ``ExpiredOption`` when ``t`` has reached the first observation
    date and ``DomainError`` for non-positive firm values.
    """
    acc = acc or MvnAccuracy()
    if t >= spec.expiries[0]:
        raise ExpiredOption("valuation time must precede the first observation date")
    v_arr = np.atleast_1d(np.asarray(V, dtype=float))
    if np.any(v_arr <= 0):
        raise DomainError("firm value must be positive")

    corr = build_correlation(spec.expiries, t)
    matrix = corr.matrix() * np.outer(spec.signs, spec.signs)
    prob = mvn_cdf_batch(_log_moneyness_limits(spec, v_arr, t, mkt), matrix, acc)
    horizon = spec.expiries[-1] - t
    if spec.kind == "bond":
        out = math.exp(-mkt.short_rate * horizon) * prob
    else:
        out = v_arr * math.exp(-mkt.payout_rate * horizon) * prob
    return out if np.ndim(V) else float(out[0])


def replicate_parity(
    spec: BinarySpec,
    V,
    t: float,
    mkt: MarketParams,
    acc: MvnAccuracy | None = None,
):
    """Residual of the last-date sign parity; ideally zero.

    Summing the claim over both signs of the final date removes that
    condition, leaving the one-order-lower claim carried across the last
    period at the payout's own discount rate.
    """
    acc = acc or MvnAccuracy()
    plus = BinarySpec(spec.strikes, spec.expiries, spec.signs[:-1] + (1,), spec.kind)
    minus = BinarySpec(spec.strikes, spec.expiries, spec.signs[:-1] + (-1,), spec.kind)
    total = binary_price(plus, V, t, mkt, acc) + binary_price(minus, V, t, mkt, acc)

    rate = mkt.short_rate if spec.kind == "bond" else mkt.payout_rate
    if spec.order == 1:
        carry = math.exp(-rate * (spec.expiries[0] - t))
        base = carry if spec.kind == "bond" else carry * np.asarray(V, dtype=float)
    else:
        dropped = BinarySpec(spec.strikes[:-1], spec.expiries[:-1], spec.signs[:-1], spec.kind)
        carry = math.exp(-rate * (spec.expiries[-1] - spec.expiries[-2]))
        base = carry * np.asarray(binary_price(dropped, V, t, mkt, acc))
    return total - base
