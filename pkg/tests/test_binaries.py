"""Binary option prices: closed-form anchors, parity and bounds."""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.special import ndtr

from putbond.binaries import BinarySpec, binary_price, replicate_parity
from putbond.domain import MarketParams
from putbond.errors import DomainError, ExpiredOption
from putbond.mvncdf import MvnAccuracy

ACC = MvnAccuracy()
MKT = MarketParams(short_rate=0.03, payout_rate=0.0, volatility=1.0, recovery=0.5)


def first_order(kind, sign, strike=1040.0, expiry=1.0):
    return BinarySpec((strike,), (expiry,), (sign,), kind)


class TestFirstOrder:
    def test_cash_claim_matches_univariate_formula(self):
        # strike 1040, V = 1040, one year, r = 3%, unit volatility:
        # d_minus = (0 + 0.03 - 0.5) / 1 = -0.47
        spec = first_order("bond", "+")
        got = binary_price(spec, 1040.0, 0.0, MKT, ACC)
        ref = math.exp(-0.03) * float(ndtr(-0.47))
        assert got == pytest.approx(ref, abs=1e-14)
        assert got == pytest.approx(0.3098, abs=2e-4)

    def test_asset_claim_matches_univariate_formula(self):
        spec = first_order("asset", "-")
        got = binary_price(spec, 800.0, 0.0, MKT, ACC)
        d_plus = (math.log(800.0 / 1040.0) + 0.03 + 0.5) / 1.0
        assert got == pytest.approx(800.0 * float(ndtr(-d_plus)), abs=1e-10)

    def test_deep_in_the_money_saturates_to_discount(self):
        spec = first_order("bond", "+")
        got = binary_price(spec, 1e12, 0.0, MKT, ACC)
        assert got == pytest.approx(math.exp(-0.03), abs=1e-12)

    def test_asset_short_claim_vanishes_for_tiny_firm(self):
        spec = first_order("asset", "-")
        assert binary_price(spec, 1e-9, 0.0, MKT, ACC) == pytest.approx(0.0, abs=1e-9)

    def test_expired_and_domain_errors(self):
        spec = first_order("bond", "+")
        with pytest.raises(ExpiredOption):
            binary_price(spec, 1000.0, 1.0, MKT, ACC)
        with pytest.raises(DomainError):
            binary_price(spec, 0.0, 0.5, MKT, ACC)


class TestSecondOrder:
    def test_positive_chain_against_direct_mvn(self):
        from putbond.mvncdf import build_correlation, mvn_cdf

        spec = BinarySpec((5099.0, 1040.0), (2.0, 3.0), "++", "bond")
        V, t = 8000.0, 1.0
        got = binary_price(spec, V, t, MKT, ACC)
        d = [
            (math.log(V / k) + (0.03 - 0.5) * (T - t)) / math.sqrt(T - t)
            for k, T in zip(spec.strikes, spec.expiries)
        ]
        ref = math.exp(-0.03 * 2.0) * mvn_cdf(d, build_correlation(spec.expiries, t), ACC)
        assert got == pytest.approx(ref, abs=1e-12)

    def test_mixed_sign_flips_row_and_column(self):
        from putbond.mvncdf import build_correlation, mvn_cdf

        spec = BinarySpec((5099.0, 1040.0), (2.0, 3.0), "+-", "asset")
        V, t = 8000.0, 0.5
        got = binary_price(spec, V, t, MKT, ACC)
        d = [
            (math.log(V / k) + (0.03 + 0.5) * (T - t)) / math.sqrt(T - t)
            for k, T in zip(spec.strikes, spec.expiries)
        ]
        corr = build_correlation(spec.expiries, t, flip_last=True)
        ref = V * mvn_cdf([d[0], -d[1]], corr, ACC)
        assert got == pytest.approx(ref, abs=1e-9)


class TestParity:
    def test_first_order_cash_parity_is_exact(self):
        spec = first_order("bond", "+", expiry=2.0)
        for v in (200.0, 1040.0, 30000.0):
            assert abs(replicate_parity(spec, v, 0.25, MKT, ACC)) <= 1e-12

    def test_first_order_asset_parity_is_exact(self):
        spec = first_order("asset", "+", expiry=2.0)
        for v in (200.0, 1040.0, 30000.0):
            assert abs(replicate_parity(spec, v, 0.25, MKT, ACC)) <= 1e-12 * max(1.0, v)

    @pytest.mark.parametrize("kind", ["bond", "asset"])
    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_higher_order_parity_within_tolerance(self, kind, m):
        strikes = (900.0, 950.0, 1000.0, 1040.0)[:m]
        expiries = (1.0, 2.0, 3.0, 4.0)[:m]
        spec = BinarySpec(strikes, expiries, "+" * m, kind)
        grid_v = np.geomspace(100.0, 50000.0, 5)
        grid_t = (0.0, 0.5)
        for t in grid_t:
            res = replicate_parity(spec, grid_v, t, MKT, ACC)
            scale = np.maximum(1.0, grid_v) if kind == "asset" else 1.0
            assert np.all(np.abs(res / scale) <= 2.0 * ACC.abs_tol)


class TestBounds:
    def test_cash_claims_bounded_by_discount_factor(self):
        spec = BinarySpec((900.0, 1000.0), (1.0, 2.0), "++", "bond")
        v = np.geomspace(10.0, 1e6, 25)
        prices = binary_price(spec, v, 0.0, MKT, ACC)
        assert np.all(prices >= 0.0)
        assert np.all(prices <= math.exp(-0.03 * 2.0) + 1e-12)

    def test_cash_positive_chain_monotone_in_firm_value(self):
        spec = BinarySpec((900.0, 1000.0), (1.0, 2.0), "++", "bond")
        v = np.geomspace(10.0, 1e6, 25)
        prices = binary_price(spec, v, 0.0, MKT, ACC)
        assert np.all(np.diff(prices) >= -1e-12)

    def test_asset_claim_bounded_by_carried_firm_value(self):
        mkt = MarketParams(short_rate=0.03, payout_rate=0.02, volatility=1.0, recovery=0.5)
        spec = BinarySpec((900.0, 1000.0), (1.0, 2.0), "+-", "asset")
        v = np.geomspace(10.0, 1e6, 25)
        prices = binary_price(spec, v, 0.0, mkt, ACC)
        assert np.all(prices >= 0.0)
        assert np.all(prices <= v * math.exp(-0.02 * 2.0) + 1e-9)

    def test_vector_and_scalar_agree(self):
        spec = BinarySpec((900.0, 1000.0), (1.0, 2.0), "++", "bond")
        vec = binary_price(spec, np.array([500.0, 2000.0]), 0.0, MKT, ACC)
        assert vec[0] == binary_price(spec, 500.0, 0.0, MKT, ACC)
        assert vec[1] == binary_price(spec, 2000.0, 0.0, MKT, ACC)
