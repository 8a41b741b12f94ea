"""Liquidity subsidies: sufficiency bounds for LP compensation and the
two-pool weighted excess-loss schedule."""

from dataclasses import dataclass
from typing import Sequence

from .arbitrage import MarketPair, no_arb_pair
from .errors import DomainExceeded, KappaZero, OutOfRange, SpotPriceMismatch
from .pools import (
    KIND_GEOMETRIC_MEAN,
    PoolState,
    apply_trade,
    spot_price,
    trade_domain,
)

# A subsidy covering an exactly-zero-cost round can land a hair below zero
# because the pair root only settles to relative tolerance.
_SLACK_FLOOR = -1e-9


@dataclass(frozen=True)
class SubsidyResult:
    """Sufficient LP compensation in both denominations.

    growth_h is the price ratio m0_e / m0_s; the traded-coin amount restates
    the numeraire amount through it, subsidy_traded =
    ratio_mu_kappa * (1 - growth_h).
    """

    subsidy_numeraire: float
    subsidy_traded: float
    growth_h: float
    ratio_mu_kappa: float

    def __post_init__(self):
        if (
            min(self.subsidy_numeraire, self.subsidy_traded, self.ratio_mu_kappa)
            < 0.0
        ):
            raise OutOfRange("subsidies and the curvature ratio must be nonnegative")
        if not 0.0 < self.growth_h <= 1.0:
            raise OutOfRange(f"growth ratio {self.growth_h} outside (0, 1]")
        expected = self.ratio_mu_kappa * (1.0 - self.growth_h)
        if abs(self.subsidy_traded - expected) > 1e-12 * max(1.0, expected):
            raise OutOfRange(
                "subsidy_traded must equal ratio_mu_kappa * (1 - growth_h)"
            )

    def to_dict(self) -> dict:
        return {
            "subsidy_numeraire": self.subsidy_numeraire,
            "subsidy_traded": self.subsidy_traded,
            "growth_h": self.growth_h,
            "ratio_mu_kappa": self.ratio_mu_kappa,
        }


def sufficient_subsidy(
    mu: float, kappa: float, m0_s: float, m0_e: float
) -> SubsidyResult:
    """Compensation keeping an LP's payoff nonnegative after one
    no-arbitrage round against a kappa-liquid external market:
    (mu/kappa) * (m0_s - m0_e) in the numeraire, or the growth form
    (mu/kappa) * (1 - h) in the traded coin."""
    if kappa <= 0.0:
        raise KappaZero("subsidy sizing needs a kappa-liquid external market")
    if mu < 0.0:
        raise OutOfRange(f"mu must be nonnegative, got {mu}")
    if m0_s <= 0.0 or m0_e <= 0.0:
        raise OutOfRange("quotes must be positive")
    if m0_e > m0_s * (1.0 + 1e-12):
        raise OutOfRange(
            f"external quote {m0_e} above secondary {m0_s}; "
            "normalize the orientation first"
        )
    ratio = mu / kappa
    h = min(m0_e / m0_s, 1.0)
    return SubsidyResult(
        subsidy_numeraire=ratio * max(m0_s - m0_e, 0.0),
        subsidy_traded=ratio * (1.0 - h),
        growth_h=h,
        ratio_mu_kappa=ratio,
    )


@dataclass(frozen=True)
class SubsidyReport:
    """Outcome of checking a subsidy against one resolved arbitrage round.

    realized_cost marks the LP's reserve change at the settled price m_a; it
    is nonpositive because the pool sells down its own falling quote.  slack
    is realized_cost + subsidy_numeraire.
    """

    passed: bool
    realized_cost: float
    subsidy_numeraire: float
    slack: float
    delta_star: float
    m_a: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "realized_cost": self.realized_cost,
            "subsidy_numeraire": self.subsidy_numeraire,
            "slack": self.slack,
            "delta_star": self.delta_star,
            "m_a": self.m_a,
        }


def verify_subsidy(pair: MarketPair, subsidy: SubsidyResult) -> SubsidyReport:
    """Resolve the pair and check that the subsidy covers the realized cost.

    The secondary pool takes in delta* of the traded coin and pays out the
    integral of its quote along the way; marked at the settled price the net
    is m_a delta* minus that payout.
    """
    res = no_arb_pair(pair)
    realized = res.m_a * res.delta_star + pair.secondary.quantity(-res.delta_star)
    slack = realized + subsidy.subsidy_numeraire
    return SubsidyReport(
        passed=slack >= _SLACK_FLOOR,
        realized_cost=realized,
        subsidy_numeraire=subsidy.subsidy_numeraire,
        slack=slack,
        delta_star=res.delta_star,
        m_a=res.m_a,
    )


def _check_weighted_pair(pool1: PoolState, pool2: PoolState) -> None:
    for pool in (pool1, pool2):
        if pool.kind != KIND_GEOMETRIC_MEAN:
            raise OutOfRange(
                "excess loss is defined for weighted geometric-mean pools, "
                f"got {pool.kind}"
            )
    s1, s2 = spot_price(pool1), spot_price(pool2)
    if abs(s1 - s2) > 1e-9 * max(1.0, s1, s2):
        raise SpotPriceMismatch(f"spot prices disagree: {s1} vs {s2}")


def _excess_loss(pool1: PoolState, pool2: PoolState, delta: float) -> float:
    # post-trade portfolio value in the traded coin is (R - delta)/tau, so the
    # weights alone decide which pool loses more from the same size
    for pool in (pool1, pool2):
        lo, hi = trade_domain(pool)
        if not lo < delta < hi:
            raise DomainExceeded(f"trade {delta} outside pool domain ({lo}, {hi})")
    return (pool2.reserve_traded - delta) / pool2.tau - (
        pool1.reserve_traded - delta
    ) / pool1.tau


def balancer_excess_loss(pool1: PoolState, pool2: PoolState, delta: float) -> float:
    """Extra portfolio-value loss of holding pool1 over pool2 after the same
    trade hits both, in units of the traded coin.

    Both pools must quote the same spot price going in; per-LP amounts scale
    by the pool share outside this function.
    """
    _check_weighted_pair(pool1, pool2)
    return _excess_loss(pool1, pool2, delta)


@dataclass(frozen=True)
class SubsidyRow:
    t: int
    delta: float
    excess_loss: float
    cumulative: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "delta": self.delta,
            "excess_loss": self.excess_loss,
            "cumulative": self.cumulative,
        }


def subsidy_schedule(
    pool1: PoolState, pool2: PoolState, trades: Sequence[float]
) -> list[SubsidyRow]:
    """Apply each trade to both pools, recording the per-step excess loss.

    The common-quote precondition applies to the starting state only: the
    same size moves the two weights by different amounts, so the quotes part
    ways after the first step and each pool keeps being marked at its own.
    """
    sizes = [float(d) for d in trades]
    if not sizes:
        return []
    _check_weighted_pair(pool1, pool2)
    rows: list[SubsidyRow] = []
    total = 0.0
    for t, delta in enumerate(sizes):
        step = _excess_loss(pool1, pool2, delta)
        total += step
        pool1 = apply_trade(pool1, delta)
        pool2 = apply_trade(pool2, delta)
        rows.append(SubsidyRow(t=t, delta=delta, excess_loss=step, cumulative=total))
    return rows


def cumulative_subsidy(
    pool1: PoolState, pool2: PoolState, trades: Sequence[float]
) -> float:
    """Total excess loss over a trade sequence, paid on redemption."""
    rows = subsidy_schedule(pool1, pool2, trades)
    return rows[-1].cumulative if rows else 0.0
