"""Curvature bounds, arbitrage stability, trader games and sensitivities
for constant-function market makers."""

from .arbitrage import (
    MarketPair,
    NoArbResult,
    SimulationResult,
    TrajectoryRow,
    check_interval_condition,
    no_arb_infinite,
    no_arb_pair,
    normalize_orientation,
    series_process,
    signed_no_arb_trade,
    simulate_rounds,
    slope_at_zero,
    stability_bound,
    walk_process,
)
from .curvature import (
    ConvexityReport,
    CurvatureBounds,
    StabilityReport,
    curvature_bounds,
    curve_convexity_check,
    gaussian_curvature,
    interval_bounds,
    kappa_closed_form,
    kappa_numeric,
    mu_closed_form,
    mu_numeric,
    verify_stability,
)
from .errors import (
    CfmmKitError,
    ConfigError,
    Diverged,
    DomainExceeded,
    GridTooCoarse,
    KappaZero,
    NoCrossing,
    NonConvexDetected,
    NoRoot,
    NotDifferentiable,
    OutOfRange,
    PegRequired,
    SingularJacobian,
    SpotPriceMismatch,
)
from .games import (
    EdgeOptimum,
    GameSpec,
    GdaConfig,
    GdaResult,
    LpLossBound,
    MultiperiodResult,
    MultiperiodRow,
    gda_trade_solver,
    impermanent_loss_lb,
    informed_edge,
    informed_edge_opt,
    lp_expected_payoff,
    lp_loss_bound,
    max_profitable_trade,
    multiperiod_sim,
)
from .greeks import (
    CarrMadanCheck,
    GreeksReport,
    HedgeBounds,
    ReplicationPortfolio,
    carr_madan_check,
    carr_madan_weights,
    greeks_n_asset,
    greeks_two_asset,
    hedge_bounds,
    quote_slope,
    truncated_replication_integral,
)
from .impact import (
    CallablePriceImpact,
    FixedPriceImpact,
    PoolPriceImpact,
    PriceImpact,
    TablePriceImpact,
    as_price_impact,
)
from .incentives import (
    SubsidyReport,
    SubsidyResult,
    SubsidyRow,
    balancer_excess_loss,
    cumulative_subsidy,
    subsidy_schedule,
    sufficient_subsidy,
    verify_subsidy,
)
from .pools import (
    PoolState,
    apply_trade,
    invariant_value,
    marginal_price,
    marginal_price_with_fee,
    min_portfolio_value,
    portfolio_value,
    spot_price,
    swapped,
    trade_domain,
    trade_output,
    trade_output_with_fee,
)

__version__ = "0.1.0"
