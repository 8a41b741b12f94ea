"""Core pool mechanics: invariants, trade legs, marginal prices, fees.

Frozen expected values were derived independently of the implementation
(closed-form algebra; the curve trade leg is cross-checked against the
explicit quadratic root of the invariant).
"""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from cfmmkit.errors import DomainExceeded, OutOfRange
from cfmmkit.pools import (
    PoolState,
    apply_trade,
    invariant_value,
    marginal_price,
    marginal_price_with_fee,
    min_portfolio_value,
    portfolio_value,
    quantity_fn,
    spot_price,
    swapped,
    trade_domain,
    trade_output,
    trade_output_with_fee,
)

from helpers import ALL_KINDS, random_pool


def sample_deltas(pool: PoolState, rng: np.random.Generator, n: int) -> np.ndarray:
    """Signed trades comfortably inside the pool's admissible range."""
    dom_lo, dom_hi = trade_domain(pool)
    hi = min(0.5 * pool.reserve_traded, 0.9 * dom_hi)
    lo = max(-0.5 * pool.reserve_traded, 0.9 * dom_lo)
    return rng.uniform(lo, hi, size=n)


class TestInvariantValue:
    def test_constant_product_value(self):
        pool = PoolState.constant_product(100.0, 100.0)
        assert invariant_value(pool) == 10000.0

    def test_curve_worked_value(self):
        pool = PoolState.curve(10.0, 10.0, alpha=1.0, beta=10.0)
        # 1*(10+10) - 10/(10*10)
        assert invariant_value(pool) == pytest.approx(19.9, abs=1e-15)

    def test_geometric_mean_value(self):
        pool = PoolState.geometric_mean(100.0, 25.0, tau=0.8)
        assert invariant_value(pool) == pytest.approx(
            100.0**0.8 * 25.0**0.2, rel=1e-15
        )


class TestTradeOutput:
    def test_constant_product_buy(self):
        pool = PoolState.constant_product(100.0, 100.0)
        assert trade_output(pool, 10.0) == pytest.approx(100.0 / 9.0, rel=1e-14)

    def test_constant_product_sell(self):
        pool = PoolState.constant_product(100.0, 100.0)
        assert trade_output(pool, -10.0) == pytest.approx(-100.0 / 11.0, rel=1e-14)

    def test_constant_sum_is_identity(self):
        pool = PoolState.constant_sum(50.0, 80.0)
        assert trade_output(pool, 7.25) == 7.25
        assert trade_output(pool, -7.25) == -7.25

    def test_geometric_mean_buy(self):
        pool = PoolState.geometric_mean(100.0, 25.0, tau=0.8)
        # y(x) = 25*(100/90)**4, xi = 4
        expected = 25.0 * (10.0 / 9.0) ** 4 - 25.0
        assert trade_output(pool, 10.0) == pytest.approx(expected, rel=1e-13)

    def test_curve_buy_matches_quadratic_root(self):
        # Independent oracle: a*x*y**2 + (a*x**2 - k*x)*y - b = 0 solved for y
        # at x = 9, k = 19.9, a = 1, b = 10.
        pool = PoolState.curve(10.0, 10.0, alpha=1.0, beta=10.0)
        y = (98.1 + math.sqrt(98.1**2 + 360.0)) / 18.0
        assert trade_output(pool, 1.0) == pytest.approx(y - 10.0, rel=1e-12)

    def test_conservation_across_kinds(self):
        rng = np.random.default_rng(101)
        for kind in ALL_KINDS:
            for _ in range(25):
                pool = random_pool(rng, kind)
                k0 = invariant_value(pool)
                for delta in sample_deltas(pool, rng, 4):
                    post = apply_trade(pool, float(delta))
                    assert invariant_value(post) == pytest.approx(k0, rel=1e-10), (
                        f"{kind}: invariant drifted on trade {delta}"
                    )

    def test_domain_guards(self):
        pool = PoolState.constant_product(100.0, 100.0)
        with pytest.raises(DomainExceeded):
            trade_output(pool, 100.0)
        with pytest.raises(DomainExceeded):
            trade_output(pool, 101.0)
        small = PoolState.constant_sum(10.0, 5.0)
        with pytest.raises(DomainExceeded):
            trade_output(small, -5.0 - 1e-6)

    def test_domain_edges_respect_floor(self):
        rng = np.random.default_rng(7)
        for kind in ALL_KINDS:
            pool = random_pool(rng, kind, r_lo=50.0, r_hi=500.0)
            lo, hi = trade_domain(pool)
            assert lo < 0 < hi
            post_buy = apply_trade(pool, hi)
            assert post_buy.reserve_traded >= 0.99e-9 * pool.reserve_traded
            # just inside the sell edge must evaluate cleanly
            apply_trade(pool, lo * (1.0 - 1e-9))

    def test_curve_convexity_precondition_enforced(self):
        pool = PoolState.curve(0.6, 0.6, alpha=1.0, beta=10.0)
        with pytest.raises(DomainExceeded):
            trade_output(pool, 0.1)


class TestMarginalPrice:
    def test_constant_product_closed_form(self):
        pool = PoolState.constant_product(100.0, 100.0)
        assert marginal_price(pool, -10.0) == pytest.approx(100.0 / 121.0, rel=1e-14)
        assert marginal_price(pool, 0.0) == 1.0

    def test_constant_sum_is_flat(self):
        pool = PoolState.constant_sum(3.0, 9.0)
        for delta in (-2.0, 0.0, 2.0):
            assert marginal_price(pool, delta) == 1.0

    def test_geometric_mean_spot(self):
        pool = PoolState.geometric_mean(100.0, 25.0, tau=0.8)
        # xi * R'/R = 4 * 25/100
        assert spot_price(pool) == pytest.approx(1.0, rel=1e-14)

    def test_curve_prices_regression(self):
        pool = PoolState.curve(10.0, 10.0, alpha=1.0, beta=10.0)
        assert marginal_price(pool, 0.0) == pytest.approx(1.0, rel=1e-14)
        assert marginal_price(pool, 1.0) == pytest.approx(1.0020226874159979, rel=1e-12)
        assert marginal_price(pool, -1.0) == pytest.approx(0.997983490691668, rel=1e-12)

    def test_matches_trade_output_derivative(self):
        # g(delta) must equal d(trade_output)/d(delta), central difference.
        rng = np.random.default_rng(22)
        for kind in ALL_KINDS:
            for _ in range(10):
                pool = random_pool(rng, kind, r_lo=50.0, r_hi=5e4)
                h = 1e-6 * pool.reserve_traded
                for delta in sample_deltas(pool, rng, 3):
                    delta = float(delta)
                    fd = (trade_output(pool, delta + h) - trade_output(pool, delta - h)) / (
                        2.0 * h
                    )
                    g = marginal_price(pool, delta)
                    assert g == pytest.approx(fd, rel=1e-5), f"{kind} at {delta}"

    def test_monotone_nondecreasing(self):
        rng = np.random.default_rng(33)
        for kind in ALL_KINDS:
            for _ in range(5):
                pool = random_pool(rng, kind)
                dom_lo, dom_hi = trade_domain(pool)
                grid = np.linspace(
                    max(-0.6 * pool.reserve_traded, 0.9 * dom_lo),
                    min(0.6 * pool.reserve_traded, 0.9 * dom_hi),
                    1000,
                )
                prices = [marginal_price(pool, float(d)) for d in grid]
                diffs = np.diff(prices)
                assert np.all(diffs >= -1e-12 * np.abs(prices[:-1]).max()), (
                    f"{kind}: marginal price decreased along the grid"
                )


class TestFees:
    def test_gamma_one_identity_exact(self):
        pool = PoolState.constant_product(100.0, 100.0, fee_gamma=1.0)
        for delta in (-25.0, -1.0, 0.0):
            assert marginal_price_with_fee(pool, delta) == marginal_price(pool, delta)

    def test_fee_price_worked_values(self):
        pool = PoolState.constant_product(100.0, 100.0, fee_gamma=0.997)
        assert marginal_price_with_fee(pool, 0.0) == pytest.approx(0.997, abs=1e-15)
        # 0.997 * 10000 / 109.97**2
        assert marginal_price_with_fee(pool, -10.0) == pytest.approx(
            0.8244165625899328, rel=1e-14
        )

    def test_buy_side_requires_swap(self):
        pool = PoolState.constant_product(100.0, 100.0, fee_gamma=0.997)
        with pytest.raises(OutOfRange):
            marginal_price_with_fee(pool, 1.0)

    def test_fee_price_matches_payout_derivative(self):
        # Independent route: one-sided difference of the fee-bearing payout.
        pool = PoolState.constant_product(100.0, 100.0, fee_gamma=0.997)
        h = 1e-6
        for delta in (-20.0, -10.0, -1.0):
            fd = (
                trade_output_with_fee(pool, delta - h)
                - trade_output_with_fee(pool, delta + h)
            ) / (-2.0 * h)
            assert marginal_price_with_fee(pool, delta) == pytest.approx(fd, rel=1e-6)

    def test_fee_never_improves_execution(self):
        rng = np.random.default_rng(44)
        for kind in ALL_KINDS:
            pool = random_pool(rng, kind, fee_gamma=0.99)
            for delta in sample_deltas(pool, rng, 5):
                delta = float(delta)
                gross = trade_output(pool, delta)
                net = trade_output_with_fee(pool, delta)
                if delta <= 0:
                    assert -net <= -gross + 1e-12, "fee increased sell payout"
                else:
                    assert net >= gross - 1e-12, "fee reduced buy cost"

    def test_fee_sequence_portfolio_bound(self):
        # After each fee-bearing trade, reserve value at a fixed price vector
        # dominates the pre-trade level-set minimum plus the fee take on that
        # trade's input leg.  The floor has to re-anchor every trade: summing
        # the fee takes against the starting floor is not a valid bound once
        # the valuation drifts from the pool's own quote.
        rng = np.random.default_rng(55)
        for kind in ALL_KINDS:
            for _ in range(5):
                pool = random_pool(rng, kind, r_lo=50.0, r_hi=5e3, fee_gamma=0.997)
                c1 = float(rng.uniform(0.5, 2.0))
                for _ in range(10):
                    delta = float(rng.uniform(-0.05, 0.05)) * pool.reserve_traded
                    if delta <= 0:
                        fee_take = c1 * (-delta)
                    else:
                        fee_take = trade_output_with_fee(pool, delta)
                    floor = min_portfolio_value(pool, c1)
                    pool = apply_trade(pool, delta, with_fee=True)
                    lhs = c1 * pool.reserve_traded + pool.reserve_numeraire
                    rhs = floor + (1.0 - pool.fee_gamma) * fee_take
                    assert lhs >= rhs - 1e-9 * max(1.0, abs(rhs)), (
                        f"{kind}: fee portfolio bound violated: {lhs} < {rhs}"
                    )


class TestQuantityFn:
    def test_matches_trade_output(self):
        rng = np.random.default_rng(66)
        for kind in ALL_KINDS:
            pool = random_pool(rng, kind, r_lo=50.0, r_hi=5e3)
            for delta in (-0.3, 0.4):
                d = delta * pool.reserve_traded
                closed = trade_output(pool, d)
                integral = quantity_fn(pool, d)
                assert integral == pytest.approx(closed, rel=1e-9, abs=1e-9), kind


class TestGeometricMeanSpecialization:
    def test_half_weight_equals_constant_product(self):
        gm = PoolState.geometric_mean(100.0, 80.0, tau=0.5)
        cp = PoolState.constant_product(100.0, 80.0)
        for delta in (-30.0, -5.0, 0.0, 5.0, 30.0):
            assert marginal_price(gm, delta) == pytest.approx(
                marginal_price(cp, delta), rel=1e-12
            )
            assert trade_output(gm, delta) == pytest.approx(
                trade_output(cp, delta), rel=1e-12, abs=1e-12
            )


class TestSwappedView:
    def test_round_trip(self):
        pool = PoolState.geometric_mean(100.0, 25.0, tau=0.8, fee_gamma=0.99)
        assert swapped(swapped(pool)) == pool

    def test_price_reciprocal(self):
        rng = np.random.default_rng(77)
        for kind in ALL_KINDS:
            pool = random_pool(rng, kind)
            assert spot_price(swapped(pool)) == pytest.approx(
                1.0 / spot_price(pool), rel=1e-12
            )


class TestSerialization:
    def test_json_round_trip_lossless(self):
        pool = PoolState.curve(
            10000.0 / 3.0, 9999.000001, alpha=0.1 + 1e-12, beta=17.23, fee_gamma=0.997
        )
        again = PoolState.from_json(pool.to_json())
        assert again == pool

    def test_json_shape(self):
        pool = PoolState.geometric_mean(100.0, 25.0, tau=0.8)
        data = json.loads(pool.to_json())
        assert set(data) == {
            "kind",
            "params",
            "reserve_traded",
            "reserve_numeraire",
            "fee_gamma",
        }
        assert data["params"] == {"tau": 0.8}

    def test_rejects_bad_parameters(self):
        with pytest.raises(OutOfRange):
            PoolState.constant_product(-1.0, 10.0)
        with pytest.raises(OutOfRange):
            PoolState.geometric_mean(10.0, 10.0, tau=1.0)
        with pytest.raises(OutOfRange):
            PoolState.curve(10.0, 10.0, alpha=0.0, beta=1.0)
        with pytest.raises(OutOfRange):
            PoolState.constant_product(10.0, 10.0, fee_gamma=1.5)


class TestValuation:
    def test_portfolio_value(self):
        pool = PoolState.constant_product(100.0, 100.0)
        assert portfolio_value(pool) == 200.0
        assert portfolio_value(pool, 0.9) == pytest.approx(190.0)

    def test_min_portfolio_value_constant_product(self):
        # min over xy = k of p*x + y is 2*sqrt(p*k)
        pool = PoolState.constant_product(100.0, 100.0)
        for p in (0.5, 1.0, 2.0):
            assert min_portfolio_value(pool, p) == pytest.approx(
                2.0 * math.sqrt(p * 10000.0), rel=1e-8
            )
