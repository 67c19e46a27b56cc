"""Value types, derived quantities and the design-parameter checks."""
from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from putbond.domain import (
    BondSpec,
    MarketParams,
    adjusted_coupons,
    check_coupon_lower_bound,
    check_volatility_condition,
    compute_last_redeemable_index,
    default_gradient_caps,
    redemption_amount,
    validate,
)
from putbond.errors import MalformedSequence

# Direct evaluation of the coupon bound for the reference data:
# 40 (e^0.06 + e^0.03 + 1) - 1000 (e^0.06 - 1)
REF_MARGIN = 40.0 * (math.exp(0.06) + math.exp(0.03) + 1.0) - 1000.0 * (math.exp(0.06) - 1.0)


def make_bond(coupons=(40.0, 40.0, 40.0), face=1000.0, dates=(1.0, 2.0, 3.0)):
    return BondSpec(maturity_dates=dates, coupons=coupons, face_value=face)


def make_market(r=0.03, b=0.0, s=1.0, delta=0.5):
    return MarketParams(short_rate=r, payout_rate=b, volatility=s, recovery=delta)


class TestBondSpec:
    def test_rejects_nonincreasing_dates(self):
        with pytest.raises(ValueError):
            make_bond(dates=(1.0, 1.0, 3.0))
        with pytest.raises(ValueError):
            make_bond(dates=(-1.0, 2.0, 3.0))

    def test_rejects_negative_coupon_and_zero_face(self):
        with pytest.raises(ValueError):
            make_bond(coupons=(40.0, -1.0, 40.0))
        with pytest.raises(ValueError):
            make_bond(face=0.0)

    def test_market_bounds(self):
        with pytest.raises(ValueError):
            make_market(s=0.0)
        with pytest.raises(ValueError):
            make_market(delta=1.0)


class TestAdjustedCoupons:
    def test_reference_data(self):
        cbar = adjusted_coupons(make_bond())
        assert tuple(cbar) == (40.0, 40.0, 1040.0)

    def test_zero_coupon_single_date(self):
        cbar = adjusted_coupons(BondSpec((1.0,), (0.0,), 1.0))
        assert tuple(cbar) == (1.0,)

    def test_two_dates(self):
        cbar = adjusted_coupons(BondSpec((1.0, 2.0), (10.0, 20.0), 500.0))
        assert tuple(cbar) == (10.0, 520.0)

    @given(
        st.lists(st.floats(0.0, 1e3), min_size=1, max_size=8),
        st.floats(1.0, 1e6),
    )
    @settings(max_examples=50, deadline=None)
    def test_sum_identity(self, coupons, face):
        dates = tuple(float(i) for i in range(1, len(coupons) + 1))
        spec = BondSpec(dates, tuple(coupons), face)
        assert math.isclose(
            float(adjusted_coupons(spec).sum()), face + sum(coupons), rel_tol=1e-12
        )


class TestRedemptionAmount:
    def test_deducts_collected_coupons(self):
        spec = make_bond()
        assert redemption_amount(spec, 0) == 1000.0
        assert redemption_amount(spec, 1) == 960.0
        assert redemption_amount(spec, 2) == 920.0


class TestCouponLowerBound:
    def test_reference_margin(self):
        holds, margin = check_coupon_lower_bound(make_bond(), make_market())
        assert holds
        assert margin == pytest.approx(REF_MARGIN, abs=1e-12)
        assert margin == pytest.approx(61.855, abs=1e-3)

    def test_zero_coupons_fail(self):
        holds, margin = check_coupon_lower_bound(make_bond(coupons=(0.0, 0.0, 0.0)), make_market())
        assert not holds and margin < 0

    def test_zero_rate_reduces_to_positive_coupon_sum(self):
        holds, _ = check_coupon_lower_bound(make_bond(), make_market(r=0.0))
        assert holds
        holds, margin = check_coupon_lower_bound(
            make_bond(coupons=(0.0, 0.0, 0.0)), make_market(r=0.0)
        )
        assert not holds and margin == 0.0

    def test_marginal_small_coupon_case(self):
        # C = 20 sits just above the bound: margin ~ +9.3e-3.
        holds, margin = check_coupon_lower_bound(make_bond(coupons=(20.0,) * 3), make_market())
        assert holds
        assert margin == pytest.approx(0.00930, abs=5e-4)

    @given(st.floats(0.1, 1e4))
    @settings(max_examples=50, deadline=None)
    def test_margin_scales_linearly_with_currency(self, scale):
        spec = make_bond()
        scaled = make_bond(coupons=tuple(scale * c for c in spec.coupons), face=scale * 1000.0)
        _, margin = check_coupon_lower_bound(spec, make_market())
        holds_s, margin_s = check_coupon_lower_bound(scaled, make_market())
        assert holds_s
        assert margin_s == pytest.approx(scale * margin, rel=1e-9)


class TestLastRedeemableIndex:
    def test_reference_data(self):
        assert compute_last_redeemable_index(make_bond()) == 2

    def test_large_coupons(self):
        spec = BondSpec((1.0, 2.0, 3.0), (60.0, 60.0, 60.0), 100.0)
        assert compute_last_redeemable_index(spec) == 1

    def test_single_date(self):
        assert compute_last_redeemable_index(BondSpec((1.0,), (5.0,), 100.0)) == 0

    @given(st.integers(0, 2), st.floats(1.0, 200.0))
    @settings(max_examples=40, deadline=None)
    def test_increasing_coupon_weakly_decreases_index(self, which, bump):
        spec = make_bond(coupons=(40.0, 40.0, 40.0), face=100.0)
        coupons = list(spec.coupons)
        coupons[which] += bump
        bumped = make_bond(coupons=tuple(coupons), face=100.0)
        assert compute_last_redeemable_index(bumped) <= compute_last_redeemable_index(spec)


class TestVolatilityCondition:
    def test_reference_data_fails_at_unit_volatility(self):
        # equally spaced caps (0.8333.., 0.6667.., 0.5): threshold ~ 1.1968
        spec, mkt = make_bond(), make_market(s=1.0)
        caps = default_gradient_caps(spec, mkt)
        assert caps == pytest.approx((5.0 / 6.0, 4.0 / 6.0, 0.5), abs=1e-12)
        threshold = 0.5 / (math.sqrt(2.0 * math.pi) * (1.0 / 6.0))
        assert threshold == pytest.approx(1.19683, abs=1e-5)
        assert not check_volatility_condition(spec, mkt, caps)
        assert check_volatility_condition(spec, make_market(s=threshold + 1e-9), caps)

    def test_huge_volatility_passes(self):
        assert check_volatility_condition(make_bond(), make_market(s=50.0))

    def test_vanishing_gap_fails(self):
        spec, mkt = make_bond(), make_market(s=100.0)
        caps = (0.500002, 0.500001, 0.5)
        assert not check_volatility_condition(spec, mkt, caps)

    def test_positive_payout_branch(self):
        spec = make_bond()
        mkt = make_market(s=2.0, b=0.05)
        caps = default_gradient_caps(spec, mkt)
        damp = math.exp(-0.05)
        bound = 0.5 * damp / (math.sqrt(2.0 * math.pi) * (caps[0] - caps[1] * damp))
        assert check_volatility_condition(spec, mkt, caps) == (2.0 >= bound)

    def test_malformed_caps(self):
        spec, mkt = make_bond(), make_market()
        with pytest.raises(MalformedSequence):
            check_volatility_condition(spec, mkt, (0.5, 0.7, 0.5))
        with pytest.raises(MalformedSequence):
            check_volatility_condition(spec, mkt, (1.2, 0.7, 0.5))
        with pytest.raises(MalformedSequence):
            check_volatility_condition(spec, mkt, (0.9, 0.7, 0.4))


class TestValidate:
    def test_reference_report(self):
        report = validate(make_bond(), make_market())
        assert report.coupon_condition_holds
        assert report.last_redeemable_index == 2
        assert not report.volatility_condition_holds
        assert any("volatility" in w for w in report.warnings)
        assert report.gradient_cap_sequence[-1] == 0.5

    def test_degenerate_flagged(self):
        report = validate(make_bond(coupons=(0.0, 0.0, 0.0)), make_market())
        assert not report.coupon_condition_holds
        assert any("zero-coupon" in w for w in report.warnings)
