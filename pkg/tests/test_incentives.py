"""Subsidy sizing, verification against resolved arbitrage, and the
two-pool excess-loss schedule."""

import numpy as np
import pytest

from cfmmkit.arbitrage import check_interval_condition, normalize_orientation
from cfmmkit.errors import (
    DomainExceeded,
    KappaZero,
    OutOfRange,
    SpotPriceMismatch,
)
from cfmmkit.incentives import (
    SubsidyResult,
    SubsidyRow,
    balancer_excess_loss,
    cumulative_subsidy,
    subsidy_schedule,
    sufficient_subsidy,
    verify_subsidy,
)
from cfmmkit.pools import PoolState, apply_trade, spot_price

from helpers import CONVEX_KINDS, pool_with_price, random_pool


def worked_pair():
    # external quote 0.9, secondary quote 1.0, both constant product
    f = PoolState.constant_product(100.0, 90.0)
    g = PoolState.constant_product(100.0, 100.0)
    return normalize_orientation(f, g)


def weighted_pools():
    # tau 0.8 and tau 0.5, both quoting spot price 1
    return (
        PoolState.geometric_mean(100.0, 25.0, 0.8),
        PoolState.geometric_mean(100.0, 100.0, 0.5),
    )


def own_quote_value(pool: PoolState) -> float:
    # portfolio value in units of the traded coin at the pool's own quote
    return pool.reserve_traded + pool.reserve_numeraire / spot_price(pool)


class TestSubsidyResult:
    def test_negative_rejected(self):
        with pytest.raises(OutOfRange):
            SubsidyResult(-0.1, 0.0, 1.0, 0.0)

    def test_growth_range(self):
        with pytest.raises(OutOfRange):
            SubsidyResult(0.0, 0.0, 1.5, 0.0)
        with pytest.raises(OutOfRange):
            SubsidyResult(0.0, 0.0, 0.0, 0.0)

    def test_denomination_consistency_enforced(self):
        with pytest.raises(OutOfRange):
            SubsidyResult(0.1, 0.5, 0.9, 1.0)


class TestSufficientSubsidy:
    def test_worked_example(self):
        res = sufficient_subsidy(0.02, 0.018, 1.0, 0.9)
        assert res.subsidy_numeraire == pytest.approx(0.11111, abs=5e-6)
        assert res.subsidy_numeraire == pytest.approx((0.02 / 0.018) * 0.1, rel=1e-12)
        assert res.subsidy_traded == pytest.approx(res.subsidy_numeraire, rel=1e-12)
        assert res.growth_h == pytest.approx(0.9, rel=1e-12)

    def test_no_drift_no_subsidy(self):
        res = sufficient_subsidy(0.02, 0.018, 1.0, 1.0)
        assert res.subsidy_numeraire == 0.0
        assert res.subsidy_traded == 0.0
        assert res.growth_h == 1.0

    def test_growth_form(self):
        res = sufficient_subsidy(0.02, 0.01, 1.0, 0.95)
        assert res.ratio_mu_kappa == pytest.approx(2.0, rel=1e-12)
        assert res.subsidy_traded == pytest.approx(0.1, rel=1e-10)

    def test_kappa_zero(self):
        with pytest.raises(KappaZero):
            sufficient_subsidy(0.02, 0.0, 1.0, 0.9)

    def test_orientation_enforced(self):
        with pytest.raises(OutOfRange):
            sufficient_subsidy(0.02, 0.018, 0.9, 1.0)

    def test_growth_identity_randomized(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            mu = float(rng.uniform(0.0, 1.0))
            kappa = float(rng.uniform(1e-3, 1.0))
            m0_s = float(10 ** rng.uniform(-2, 2))
            m0_e = m0_s * float(rng.uniform(0.1, 1.0))
            res = sufficient_subsidy(mu, kappa, m0_s, m0_e)
            assert res.subsidy_traded == res.ratio_mu_kappa * (1.0 - res.growth_h)
            assert res.subsidy_numeraire >= 0.0
            assert res.subsidy_traded >= 0.0


class TestVerifySubsidy:
    def test_worked_pair_passes_with_slack(self):
        pair = worked_pair()
        sub = sufficient_subsidy(pair.mu, pair.kappa, pair.m0_s, pair.m0_e)
        rep = verify_subsidy(pair, sub)
        assert rep.passed
        assert rep.slack > 0.0
        assert rep.realized_cost < 0.0
        assert rep.delta_star > 0.0

    def test_zero_subsidy_fails_on_real_gap(self):
        pair = worked_pair()
        zero = SubsidyResult(0.0, 0.0, pair.m0_e / pair.m0_s, 0.0)
        rep = verify_subsidy(pair, zero)
        assert not rep.passed
        assert rep.slack == pytest.approx(rep.realized_cost, rel=1e-12)
        assert rep.realized_cost < -1e-3

    def test_flat_secondary_costless(self):
        # a flat quote sells every unit at its own price, so even zero subsidy
        # covers the round
        pair = normalize_orientation(
            PoolState.constant_product(100.0, 90.0),
            PoolState.constant_sum(100.0, 100.0),
        )
        assert pair.mu == 0.0
        sub = sufficient_subsidy(pair.mu, pair.kappa, pair.m0_s, pair.m0_e)
        assert sub.subsidy_numeraire == 0.0
        rep = verify_subsidy(pair, sub)
        assert rep.passed
        assert abs(rep.realized_cost) < 1e-9

    def test_sufficiency_and_denomination_randomized(self):
        # realized cost + subsidy stays nonnegative whenever the gap fits the
        # certified regime gap <= kappa * min(1, L) (the size-free certificate
        # needs delta* <= 1), and the traded-coin amount never exceeds the
        # numeraire amount converted at the settled price
        rng = np.random.default_rng(17)
        checked = 0
        attempts = 0
        while checked < 500 and attempts < 20_000:
            attempts += 1
            ext_kind = CONVEX_KINDS[rng.integers(len(CONVEX_KINDS))]
            sec_kinds = CONVEX_KINDS + ("constant_sum",)
            sec_kind = sec_kinds[rng.integers(len(sec_kinds))]
            # log-uniform relative gap: kappa spans decades with reserve size
            u = float(10 ** rng.uniform(-6.0, np.log10(0.15)))
            price = float(10 ** rng.uniform(-1, 1))
            sec_price = price * (1.0 + u)
            if sec_kind == "constant_sum":
                sec_price = 1.0
                price = 1.0 / (1.0 + u)
            try:
                ext = pool_with_price(rng, ext_kind, price)
                sec = pool_with_price(rng, sec_kind, sec_price)
                pair = normalize_orientation(ext, sec)
            except (OutOfRange, AssertionError):
                continue
            usable_L = 0.99 * min(-pair.secondary.domain[0], pair.external.domain[1])
            if pair.kappa <= 0.0 or not check_interval_condition(
                pair.kappa, min(1.0, usable_L), pair.m0_s, pair.m0_e
            ):
                continue
            sub = sufficient_subsidy(pair.mu, pair.kappa, pair.m0_s, pair.m0_e)
            rep = verify_subsidy(pair, sub)
            assert rep.slack >= -1e-9
            assert sub.subsidy_traded <= sub.subsidy_numeraire / rep.m_a + 1e-12
            checked += 1
        assert checked == 500


class TestBalancerExcessLoss:
    def test_worked_example(self):
        p1, p2 = weighted_pools()
        assert balancer_excess_loss(p1, p2, 10.0) == pytest.approx(67.5, rel=1e-12)

    def test_worked_example_value_oracle(self):
        p1, p2 = weighted_pools()
        a1, a2 = apply_trade(p1, 10.0), apply_trade(p2, 10.0)
        oracle = own_quote_value(a2) - own_quote_value(a1)
        assert balancer_excess_loss(p1, p2, 10.0) == pytest.approx(oracle, rel=1e-10)

    def test_equal_scaled_reserves_zero_at_no_trade(self):
        # R1/tau1 == R2/tau2 at a common quote makes the untraded values equal
        p1 = PoolState.geometric_mean(90.0, 22.5, 0.8)
        p2 = PoolState.geometric_mean(56.25, 56.25, 0.5)
        assert spot_price(p1) == pytest.approx(spot_price(p2), rel=1e-12)
        assert balancer_excess_loss(p1, p2, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_identical_pools_zero_for_all_trades(self):
        p = PoolState.geometric_mean(100.0, 50.0, 0.6)
        for delta in (-20.0, 0.0, 5.0, 40.0):
            assert balancer_excess_loss(p, p, delta) == 0.0

    def test_spot_mismatch_rejected(self):
        p1 = PoolState.geometric_mean(100.0, 25.0, 0.8)
        p2 = PoolState.geometric_mean(100.0, 90.0, 0.5)
        with pytest.raises(SpotPriceMismatch):
            balancer_excess_loss(p1, p2, 1.0)

    def test_unweighted_pool_rejected(self):
        p1, _ = weighted_pools()
        with pytest.raises(OutOfRange):
            balancer_excess_loss(p1, PoolState.constant_product(100.0, 100.0), 1.0)

    def test_domain_enforced(self):
        p1, p2 = weighted_pools()
        with pytest.raises(DomainExceeded):
            balancer_excess_loss(p1, p2, 100.0)

    def test_value_oracle_randomized(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            tau1 = float(rng.uniform(0.15, 0.85))
            tau2 = float(rng.uniform(0.15, 0.85))
            price = float(10 ** rng.uniform(-1, 1))
            r1 = float(10 ** rng.uniform(1, 4))
            r2 = float(10 ** rng.uniform(1, 4))
            # spot = (tau/(1-tau)) * (R'/R) pins the numeraire reserve
            p1 = PoolState.geometric_mean(r1, price * r1 * (1 - tau1) / tau1, tau1)
            p2 = PoolState.geometric_mean(r2, price * r2 * (1 - tau2) / tau2, tau2)
            delta = float(rng.uniform(-0.5, 0.9)) * min(r1, r2)
            got = balancer_excess_loss(p1, p2, delta)
            a1, a2 = apply_trade(p1, delta), apply_trade(p2, delta)
            oracle = own_quote_value(a2) - own_quote_value(a1)
            assert got == pytest.approx(oracle, rel=1e-10, abs=1e-10)


class TestCumulativeSubsidy:
    def test_empty_sequence(self):
        p1, p2 = weighted_pools()
        assert cumulative_subsidy(p1, p2, []) == 0.0
        assert subsidy_schedule(p1, p2, []) == []

    def test_single_trade_matches_excess_loss(self):
        p1, p2 = weighted_pools()
        total = cumulative_subsidy(p1, p2, [10.0])
        assert total == pytest.approx(balancer_excess_loss(p1, p2, 10.0), rel=1e-12)
        assert total == pytest.approx(67.5, rel=1e-12)

    def test_two_trades_stepwise_oracle(self):
        p1, p2 = weighted_pools()
        b1, b2 = apply_trade(p1, 5.0), apply_trade(p2, 5.0)
        oracle = (own_quote_value(b2) - own_quote_value(b1)) + (
            own_quote_value(apply_trade(b2, 5.0)) - own_quote_value(apply_trade(b1, 5.0))
        )
        assert cumulative_subsidy(p1, p2, [5.0, 5.0]) == pytest.approx(oracle, rel=1e-10)

    def test_schedule_rows(self):
        p1, p2 = weighted_pools()
        rows = subsidy_schedule(p1, p2, [5.0, -3.0, 2.0])
        assert [row.t for row in rows] == [0, 1, 2]
        assert [row.delta for row in rows] == [5.0, -3.0, 2.0]
        total = 0.0
        for row in rows:
            total += row.excess_loss
            assert row.cumulative == pytest.approx(total, rel=1e-12)
        assert rows[0].to_dict() == {
            "t": 0,
            "delta": 5.0,
            "excess_loss": rows[0].excess_loss,
            "cumulative": rows[0].cumulative,
        }

    def test_domain_error_propagates_mid_sequence(self):
        p1, p2 = weighted_pools()
        with pytest.raises(DomainExceeded):
            cumulative_subsidy(p1, p2, [50.0, 60.0])

    def test_entry_spot_mismatch_rejected(self):
        p1 = PoolState.geometric_mean(100.0, 25.0, 0.8)
        p2 = PoolState.geometric_mean(100.0, 90.0, 0.5)
        with pytest.raises(SpotPriceMismatch):
            cumulative_subsidy(p1, p2, [1.0])
