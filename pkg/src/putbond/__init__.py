"""Structural pricing engine for discrete-coupon bonds with early redemption."""
from .domain import (
    BondSpec,
    MarketParams,
    ValidationReport,
    adjusted_coupons,
    check_coupon_lower_bound,
    check_volatility_condition,
    compute_last_redeemable_index,
    default_gradient_caps,
    redemption_amount,
    validate,
)
from .mvncdf import CorrelationSpec, MvnAccuracy, build_correlation, mvn_cdf, mvn_cdf_partial

__version__ = "0.1.0"

__all__ = [
    "BondSpec",
    "MarketParams",
    "ValidationReport",
    "adjusted_coupons",
    "check_coupon_lower_bound",
    "check_volatility_condition",
    "compute_last_redeemable_index",
    "default_gradient_caps",
    "redemption_amount",
    "validate",
    "CorrelationSpec",
    "MvnAccuracy",
    "build_correlation",
    "mvn_cdf",
    "mvn_cdf_partial",
    "__version__",
]
