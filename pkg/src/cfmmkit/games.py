"""Trader-vs-LP payoff bounds and the gradient trade solver.

Three layers: single-trade payoff bounds for uninformed flow (profit cap,
opportunity-cost floor), the one-shot informed-trader game (edge integral,
optimal size, LP loss bound), and a multiperiod simulation where an informed
trader hits the pool each round with a gradient-solved trade.

Sign conventions follow the sell-side analysis: the informed trader expects
the price to fall from m0 to m1 and sells delta >= 0 of the traded coin.
The LP side of every payoff is the exact negation (zero-sum transfer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .arbitrage import signed_no_arb_trade
from .curvature import curvature_bounds, interval_bounds, mu_closed_form
from .errors import Diverged, DomainExceeded, KappaZero, OutOfRange
from .impact import PoolPriceImpact, PriceImpact, as_price_impact
from .pools import (
    PoolState,
    apply_trade,
    invariant_value,
    marginal_price,
    psi_partials,
    psi_second_partials,
    psi_value,
    trade_output,
)


@dataclass(frozen=True)
class GameSpec:
    """One-shot informed-trader game parameters.

    alpha is the probability that the predicted move down to m1 happens.
    The setup anchors both markets at m0 = gamma * g(0), which the edge
    operations validate against the quote they are handed.
    """

    alpha: float
    m0: float
    m1: float
    gamma: float = 1.0
    interval_L: float = 1.0

    def __post_init__(self):
        if not 0.5 <= self.alpha < 1.0:
            raise OutOfRange("alpha must lie in [1/2, 1)")
        if self.m0 <= 0.0 or self.m1 <= 0.0:
            raise OutOfRange("prices must be positive")
        if self.m1 > self.m0 * (1.0 + 1e-12):
            raise OutOfRange("the predicted price m1 must not exceed m0")
        if not 0.0 < self.gamma <= 1.0:
            raise OutOfRange("gamma must lie in (0, 1]")
        if self.interval_L <= 0.0:
            raise OutOfRange("interval_L must be positive")

    @property
    def edge(self) -> float:
        """Expected per-unit price edge alpha * (m0 - m1)."""
        return self.alpha * (self.m0 - self.m1)


@dataclass(frozen=True)
class GdaConfig:
    """Settings for the gradient descent-ascent trade solver.

    Explicit eta_alpha / eta_beta switch the solver to plain normalized
    gradient steps of that size; left unset it takes damped Newton steps
    with backtracking, which is what the convergence tests pin down.
    """

    target_price: float
    tolerance: float = 1e-8
    max_steps: int = 10_000
    eta_alpha: float | None = None
    eta_beta: float | None = None

    def __post_init__(self):
        if self.target_price <= 0.0:
            raise OutOfRange("target price must be positive")
        if self.tolerance <= 0.0:
            raise OutOfRange("tolerance must be positive")
        if self.max_steps < 1:
            raise OutOfRange("max_steps must be at least 1")
        for name in ("eta_alpha", "eta_beta"):
            eta = getattr(self, name)
            if eta is not None and eta <= 0.0:
                raise OutOfRange(f"{name} must be positive")


def max_profitable_trade(pool: PoolState, m_a: float) -> float:
    """Largest sell size whose fee provably covers the LP's slippage loss.

    Returns (1 - gamma) * m_a / mu.  A flat quote (mu = 0) makes every
    size profitable and yields inf.
    """
    if m_a <= 0.0:
        raise OutOfRange("no-arbitrage price must be positive")
    mu = mu_closed_form(pool).mu
    if mu <= 0.0:
        return math.inf
    return (1.0 - pool.fee_gamma) * m_a / mu


def impermanent_loss_lb(pool: PoolState, delta: float) -> tuple[float, float]:
    """Exact LP opportunity cost of absorbing a sell and its curvature floor.

    Returns (g(-delta) * delta - delta_received, -mu * delta^2).  The exact
    cost marks the post-trade portfolio at the post-trade price against
    holding the pre-trade reserves; the floor uses a mu certificate valid
    on [0, delta], so exact >= bound always holds.
    """
    if delta < 0.0:
        raise OutOfRange("delta must be nonnegative")
    if delta == 0.0:
        return 0.0, 0.0
    received = -trade_output(pool, -delta)
    exact = marginal_price(pool, -delta) * delta - received
    mu = curvature_bounds(pool, delta).mu
    return exact, -mu * delta * delta


def _check_setup(spec: GameSpec, g: PriceImpact) -> None:
    # the edge/loss derivations anchor both markets at m0 = gamma * g(0)
    m0 = spec.gamma * g.price(0.0)
    if abs(m0 - spec.m0) > 1e-9 * max(spec.m0, m0):
        raise OutOfRange(
            f"spec.m0 = {spec.m0} but gamma * g(0) = {m0}; the game assumes they match"
        )


def informed_edge(spec: GameSpec, g, delta: float) -> float:
    """Expected edge E_V(delta) of the informed seller.

    Revenue integral of the fee-adjusted quote gamma * g(-gamma t) over
    [0, delta] minus the expected hold value (alpha m1 + (1 - alpha) m0)
    times delta.  The revenue integral equals the negated quantity function
    at -gamma delta, which pool quotes evaluate in closed form and
    table/closure quotes by quadrature.
    """
    g = as_price_impact(g)
    if delta < 0.0:
        raise OutOfRange("delta must be nonnegative")
    _check_setup(spec, g)
    z = -spec.gamma * delta
    lo, _ = g.domain
    if z < lo:
        raise DomainExceeded(
            f"gamma * delta = {-z:.6g} beyond the sell capacity {-lo:.6g}"
        )
    revenue = -g.quantity(z)
    hold = (spec.alpha * spec.m1 + (1.0 - spec.alpha) * spec.m0) * delta
    return revenue - hold


def lp_expected_payoff(spec: GameSpec, g, delta: float) -> float:
    """LP side of the zero-sum transfer: exactly -informed_edge."""
    return -informed_edge(spec, g, delta)


@dataclass(frozen=True)
class EdgeOptimum:
    delta_opt: float
    value: float
    lower_bound: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "delta_opt": self.delta_opt,
            "value": self.value,
            "lower_bound": self.lower_bound,
        }


def _mu_for_edge(g: PriceImpact, L: float) -> float:
    """Sell-side mu certificate on [0, L] for the edge floor."""
    if isinstance(g, PoolPriceImpact):
        return curvature_bounds(g.pool, L).mu
    return interval_bounds(g, L).mu


def informed_edge_opt(spec: GameSpec, g) -> EdgeOptimum:
    """Maximize E_V over admissible sell sizes.

    256-point grid to localize, golden-section to refine.  Returns the
    closed-form floor alpha^2 (m0 - m1)^2 / (2 mu gamma^2) alongside;
    value >= lower_bound whenever the unconstrained optimum fits in the
    quote's domain.
    """
    g = as_price_impact(g)
    _check_setup(spec, g)
    lo, _ = g.domain
    dom_cap = -lo * (1.0 - 1e-9) / spec.gamma if math.isfinite(lo) else math.inf
    probe_L = min(dom_cap, 100.0 * g.scale / spec.gamma)
    mu = _mu_for_edge(g, spec.gamma * probe_L)
    # the certificate has to move the price by more than rounding noise across
    # the probe window, else the grid cap blows up on a numerically flat quote
    if mu * spec.gamma * probe_L <= 1e-9 * spec.m0:
        raise OutOfRange(
            "edge optimum needs a positive mu certificate; a flat quote has no"
            " interior maximum"
        )
    lower = spec.edge**2 / (2.0 * mu * spec.gamma**2)
    if spec.edge == 0.0:
        return EdgeOptimum(delta_opt=0.0, value=0.0, lower_bound=lower)
    # E_V is concave with initial slope = edge and curvature about -mu gamma^2,
    # so the optimum sits near edge / (mu gamma^2); the window is generous
    cap = min(dom_cap, 50.0 * spec.edge / (mu * spec.gamma**2))

    grid = np.linspace(0.0, cap, 256)
    vals = [informed_edge(spec, g, float(d)) for d in grid]
    i = int(np.argmax(vals))
    delta_opt, value = float(grid[i]), float(vals[i])
    if 0 < i < len(grid) - 1 and vals[i] > max(vals[i - 1], vals[i + 1]):
        res = minimize_scalar(
            lambda d: -informed_edge(spec, g, float(d)),
            bracket=(float(grid[i - 1]), float(grid[i]), float(grid[i + 1])),
            method="golden",
        )
        if res.success and -res.fun > value and 0.0 <= res.x <= cap:
            delta_opt, value = float(res.x), float(-res.fun)
    return EdgeOptimum(delta_opt=delta_opt, value=value, lower_bound=lower)


@dataclass(frozen=True)
class LpLossBound:
    value: float
    branch: str  # "interior" when the informed optimum fits inside [0, L]

    def to_dict(self) -> dict[str, Any]:
        return {"value": self.value, "branch": self.branch}


def lp_loss_bound(spec: GameSpec, kappa: float, L: float | None = None) -> LpLossBound:
    """Worst expected LP payoff against the informed trader.

    Interior branch when alpha (m0 - m1) <= L kappa gamma^2, giving
    -alpha^2 (m0 - m1)^2 / (2 kappa gamma^2); otherwise the boundary value
    kappa gamma^2 L^2 / 2 - alpha (m0 - m1) L at the interval end.
    """
    if kappa <= 0.0:
        raise KappaZero("the LP loss bound needs kappa > 0")
    L = spec.interval_L if L is None else L
    if L <= 0.0:
        raise OutOfRange("interval length must be positive")
    e = spec.edge
    g2 = spec.gamma**2
    if e <= L * kappa * g2:
        return LpLossBound(-e * e / (2.0 * kappa * g2), "interior")
    return LpLossBound(0.5 * kappa * g2 * L * L - e * L, "boundary")


@dataclass(frozen=True)
class GdaResult:
    delta: float
    delta_prime: float
    steps_used: int
    residual: float
    invariant_residual: float
    stopped_on: str  # "tolerance" or "step_cap"

    def to_dict(self) -> dict[str, Any]:
        return {
            "delta": self.delta,
            "delta_prime": self.delta_prime,
            "steps_used": self.steps_used,
            "residual": self.residual,
            "invariant_residual": self.invariant_residual,
            "stopped_on": self.stopped_on,
        }


def gda_trade_solver(pool: PoolState, config: GdaConfig) -> GdaResult:
    """Solve for the trade (delta, delta_prime) reaching the target price.

    Reserve-delta convention: delta adds to the traded reserve and
    delta_prime leaves the numeraire reserve, so a positive pair is a sell
    in trade terms.  The delta step descends on the price residual
    h = psi_x(R + delta, R' - delta_prime) - p * psi_y(...) and the
    delta_prime step ascends to restore invariant feasibility, with
    backtracking on the joint squared residual in the damped-Newton mode.
    Raises Diverged when the iterates pin against a reserve floor (the
    target is unreachable) or the price residual has no descent direction.
    """
    p = config.target_price
    k = invariant_value(pool)
    x0, y0 = pool.reserve_traded, pool.reserve_numeraire
    x_floor, y_floor = 1e-9 * x0, 1e-9 * y0
    k_scale = max(1.0, abs(k))
    raw_mode = config.eta_alpha is not None or config.eta_beta is not None
    eta_a = config.eta_alpha if config.eta_alpha is not None else 1e-2
    eta_b = config.eta_beta if config.eta_beta is not None else 1e-2
    h_norm = max(1.0, p * psi_partials(pool, x0, y0)[1])

    def h_val(x: float, y: float) -> float:
        px, py = psi_partials(pool, x, y)
        return px - p * py

    def f_val(x: float, y: float) -> float:
        return psi_value(pool, x, y) - k

    def h_slope(x: float, y: float) -> float:
        # d h / d delta along the feasible manifold dy/dx = -g(x, y)
        pxx, pxy, pyy = psi_second_partials(pool, x, y)
        px, py = psi_partials(pool, x, y)
        level_slope = -px / py
        return (pxx - p * pxy) + (pxy - p * pyy) * level_slope

    def restore_y(x: float, y: float) -> float:
        # inner Newton on the invariant residual; psi is increasing in y
        for _ in range(30):
            f = f_val(x, y)
            if abs(f) <= 1e-2 * config.tolerance * k_scale:
                return y
            py = psi_partials(pool, x, y)[1]
            y_next = y - f / py
            if y_next <= y_floor:
                raise Diverged("numeraire reserve pinned at its floor")
            y = y_next
        return y

    def joint(x: float, y: float) -> float:
        return (h_val(x, y) / h_norm) ** 2 + (f_val(x, y) / k_scale) ** 2

    x, y = x0, y0
    steps = 0
    stopped = "step_cap"
    for steps in range(config.max_steps + 1):
        h = h_val(x, y)
        f = f_val(x, y)
        py = psi_partials(pool, x, y)[1]
        # price-units stopping: |h| small both raw and relative to psi_y
        if abs(h) <= config.tolerance * min(1.0, py) and abs(f) <= config.tolerance * k_scale:
            stopped = "tolerance"
            break
        if steps == config.max_steps:
            break
        slope = h_slope(x, y)
        if raw_mode:
            dx = -eta_a * (h / h_norm) * slope / max(1.0, abs(slope))
            dy = -eta_b * (f / k_scale) * py / max(1.0, abs(py))
            x_new, y_new = x + dx, y + dy
            if x_new <= x_floor or y_new <= y_floor:
                raise Diverged("iterates left the admissible reserve region")
            x, y = x_new, y_new
            continue
        if slope == 0.0:
            raise Diverged("price residual has no descent direction (flat quote)")
        dx_full = -h / slope
        dx_full = math.copysign(min(abs(dx_full), 0.5 * x), dx_full)
        j0 = joint(x, y)
        t = 1.0
        accepted = False
        while t >= 2.0**-40:
            x_try = x + t * dx_full
            if x_try > x_floor:
                try:
                    y_try = restore_y(x_try, y)
                except Diverged:
                    t *= 0.5
                    continue
                if joint(x_try, y_try) <= j0 * (1.0 - 1e-4 * t) + 1e-300:
                    x, y = x_try, y_try
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            raise Diverged(
                "backtracking stalled; the target price looks unreachable from"
                " this state"
            )
    return GdaResult(
        delta=x - x0,
        delta_prime=y0 - y,
        steps_used=steps,
        residual=abs(h_val(x, y)),
        invariant_residual=abs(f_val(x, y)),
        stopped_on=stopped,
    )


@dataclass(frozen=True)
class MultiperiodRow:
    t: int
    alpha: float
    r: float
    r_prime: float
    r_expected: float
    r_prime_expected: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "alpha": self.alpha,
            "R": self.r,
            "R_prime": self.r_prime,
            "R_expected": self.r_expected,
            "R_prime_expected": self.r_prime_expected,
        }


@dataclass(frozen=True)
class MultiperiodResult:
    rows: list
    final: PoolState


def _split_target(target, fallback: float) -> tuple[float, float]:
    """Round target -> (predicted price, realized alternative price)."""
    if isinstance(target, (tuple, list)):
        if len(target) != 2:
            raise OutOfRange("a pair target must have exactly two prices")
        return float(target[0]), float(target[1])
    return float(target), fallback


def multiperiod_sim(
    pool: PoolState,
    alphas: Sequence[float],
    price_targets: Sequence,
    config: GdaConfig,
    seed: int = 0,
) -> MultiperiodResult:
    """Simulate rounds of the informed-trader game on one pool.

    Each round the trader's prediction realizes with probability alpha_t,
    applying the gradient-solved trade toward the predicted price;
    otherwise the pool is arbitraged to the realized alternative (the
    pre-round price for a bare float target, the explicit second element
    for a pair).  Alongside the realized path, the expected-reserve
    recursion E[R(t+1)|R(t)] = R(t) + alpha delta_T + (1 - alpha) delta_hat
    advances on its own state; rows carry both.
    """
    if len(alphas) != len(price_targets):
        raise OutOfRange("alphas and price_targets must have equal length")
    rng = np.random.default_rng(seed)
    cur = pool
    exp_pool = pool
    rows = []
    for t, (a, target) in enumerate(zip(alphas, price_targets)):
        a = float(a)
        if not 0.5 <= a <= 1.0:
            raise OutOfRange("alpha_t must lie in [1/2, 1]")
        # realized path: trades solved at the realized state; the solver's
        # delta adds to the traded reserve, which is a sell in trade terms
        pred, alt = _split_target(target, marginal_price(cur, 0.0))
        gda = gda_trade_solver(cur, replace(config, target_price=pred))
        d_oracle = signed_no_arb_trade(cur, alt)
        cur = apply_trade(cur, -gda.delta if rng.random() < a else d_oracle)
        # expectation recursion: trades solved at the expected state
        pred_e, alt_e = _split_target(target, marginal_price(exp_pool, 0.0))
        gda_e = gda_trade_solver(exp_pool, replace(config, target_price=pred_e))
        d_hat = signed_no_arb_trade(exp_pool, alt_e)
        exp_r = exp_pool.reserve_traded + a * gda_e.delta - (1.0 - a) * d_hat
        exp_rp = (
            exp_pool.reserve_numeraire
            - a * gda_e.delta_prime
            + (1.0 - a) * trade_output(exp_pool, d_hat)
        )
        exp_pool = replace(exp_pool, reserve_traded=exp_r, reserve_numeraire=exp_rp)
        rows.append(
            MultiperiodRow(
                t=t,
                alpha=a,
                r=cur.reserve_traded,
                r_prime=cur.reserve_numeraire,
                r_expected=exp_r,
                r_prime_expected=exp_rp,
            )
        )
    return MultiperiodResult(rows=rows, final=cur)
