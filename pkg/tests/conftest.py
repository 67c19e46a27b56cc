"""Shared fixtures: the reference bond data and expensive session artifacts."""
from __future__ import annotations

import pytest

from putbond.boundaries import build_schedule
from putbond.domain import BondSpec, MarketParams
from putbond.fdoracle import solve_backward
from putbond.mvncdf import MvnAccuracy


@pytest.fixture(scope="session")
def ref_bond() -> BondSpec:
    return BondSpec(maturity_dates=(1.0, 2.0, 3.0), coupons=(40.0, 40.0, 40.0),
                    face_value=1000.0)


@pytest.fixture(scope="session")
def ref_market() -> MarketParams:
    return MarketParams(short_rate=0.03, payout_rate=0.0, volatility=1.0, recovery=0.5)


@pytest.fixture(scope="session")
def acc() -> MvnAccuracy:
    return MvnAccuracy()


@pytest.fixture(scope="session")
def ref_schedule(ref_bond, ref_market, acc):
    return build_schedule(ref_bond, ref_market, acc)


@pytest.fixture(scope="session")
def fd_solution(ref_bond, ref_market):
    return solve_backward(ref_bond, ref_market)
