"""No-arbitrage resolution between two markets.

An external market quotes f (the arbitrageur buys there, so its liquidity
certificate kappa is buy-side: f(d) - f(0) >= kappa d) and a secondary
market quotes g (mu-smooth on the sell side).  The no-arbitrage trade buys
delta on the external market and sells it into the secondary one until the
marginal prices meet at m_a.  The stability bound caps the resulting
price move on the secondary market at (mu/kappa) times the initial gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .curvature import buy_side_kappa, interval_bounds, mu_closed_form, mu_numeric
from .errors import KappaZero, NoCrossing, NoRoot, OutOfRange, PegRequired
from .impact import FixedPriceImpact, PoolPriceImpact, PriceImpact, as_price_impact
from .pools import (
    KIND_CONSTANT_PRODUCT,
    KIND_CONSTANT_SUM,
    KIND_CURVE,
    KIND_GEOMETRIC_MEAN,
    PoolState,
    apply_trade,
    marginal_price,
    portfolio_value,
    swapped,
    trade_domain,
)

_REL_TOL = 1e-12
_MAX_BISECT = 200
_EPS = float(np.finfo(float).eps)


def _root_certified(fn, delta: float, tol: float) -> bool:
    """Accept a solver root when the residual clears tol or the sign change
    is pinned within a few ulps of delta.  Stiff quotes near a domain edge
    move by more than tol across one representable trade-size step, so the
    residual alone is the wrong yardstick there."""
    r = fn(delta)
    if abs(r) <= tol:
        return True
    step = 4.0 * _EPS * abs(delta)
    if step == 0.0:
        return False
    try:
        r_lo = fn(delta - step)
        r_hi = fn(delta + step)
    except (OutOfRange, ValueError):
        return False
    return min(r_lo, r, r_hi) <= 0.0 <= max(r_lo, r, r_hi)


@dataclass(frozen=True)
class MarketPair:
    """External market f and secondary market g in the orientation
    m0_e <= m0_s, with liquidity certificates for the stability bound."""

    external: PriceImpact
    secondary: PriceImpact
    kappa: float  # buy-side certificate for the external quote
    mu: float  # sell-side certificate for the secondary quote

    def __post_init__(self):
        if self.kappa < 0.0 or self.mu < 0.0:
            raise OutOfRange("certificates must be nonnegative")
        if self.m0_e > self.m0_s * (1.0 + 1e-12):
            raise OutOfRange(
                f"external price {self.m0_e} above secondary {self.m0_s}; "
                "normalize the orientation first"
            )

    @property
    def m0_e(self) -> float:
        return self.external.price(0.0)

    @property
    def m0_s(self) -> float:
        return self.secondary.price(0.0)


@dataclass(frozen=True)
class NoArbResult:
    delta_star: float
    m_a: float
    price_move: float  # m0_s - m_a
    bound: float  # (mu/kappa) * (m0_s - m0_e)
    overshoot_delta: float  # constructive witness (m0_s - m0_e)/kappa

    def to_dict(self) -> dict:
        return {
            "delta_star": self.delta_star,
            "m_a": self.m_a,
            "price_move": self.price_move,
            "bound": self.bound,
            "overshoot_delta": self.overshoot_delta,
        }


def slope_at_zero(obj) -> float:
    """Slope of the quote at zero trade: closed forms for pools, central
    differences with Richardson extrapolation otherwise."""
    g = as_price_impact(obj)
    if isinstance(g, FixedPriceImpact):
        return 0.0
    if isinstance(g, PoolPriceImpact):
        pool = g.pool
        if pool.kind == KIND_CONSTANT_SUM:
            return 0.0
        if pool.kind in (KIND_CONSTANT_PRODUCT, KIND_GEOMETRIC_MEAN):
            return mu_closed_form(pool).mu
        try:
            return mu_closed_form(pool, peg_only=True).mu
        except PegRequired:
            pass
    lo, hi = g.domain
    h = max(1e-7, 1e-7 * g.scale)
    if math.isfinite(hi):
        h = min(h, 0.25 * hi)
    if math.isfinite(lo):
        h = min(h, 0.25 * -lo)
    d1 = (g.price(h) - g.price(-h)) / (2.0 * h)
    d2 = (g.price(h / 2.0) - g.price(-h / 2.0)) / h
    return max((4.0 * d2 - d1) / 3.0, 0.0)


def _kappa_certificate(f: PriceImpact, gap: float) -> float:
    """Buy-side certificate for the external quote.

    The slope at zero is only valid when buy secants never dip below it
    (true for shapes convex in trade size); the stableswap quote flattens
    toward the peg, so it and generic quotes get the interval infimum over
    [0, D] where D is the buy size at which f alone spans the gap.  Any
    crossing with a weakly falling counterparty quote sits at or before D,
    and the infimum kappa keeps the witness gap/kappa at or beyond it.
    """
    if isinstance(f, FixedPriceImpact):
        return 0.0
    if isinstance(f, PoolPriceImpact):
        kind = f.pool.kind
        if kind == KIND_CONSTANT_SUM:
            return 0.0
        if kind in (KIND_CONSTANT_PRODUCT, KIND_GEOMETRIC_MEAN):
            return slope_at_zero(f)
    slope = slope_at_zero(f)
    if gap <= 0.0 or slope <= 0.0:
        return max(slope, 0.0)
    _, hi = f.domain
    cap = hi * (1.0 - 1e-9) if math.isfinite(hi) else math.inf
    target = f.price(0.0) + gap

    def shortfall(d: float) -> float:
        return f.price(d) - target

    b = min(gap / slope, cap)
    for _ in range(60):
        if shortfall(b) >= 0.0 or b >= cap:
            break
        b = min(2.0 * b, cap)
    if shortfall(b) < 0.0:
        # quote cannot span the gap inside its domain; certify what it has
        return max(buy_side_kappa(f, b).kappa, 0.0)
    if shortfall(b) > 0.0:
        b = brentq(shortfall, 0.0, b, xtol=1e-300, rtol=8.9e-16)
    return max(buy_side_kappa(f, b).kappa, 0.0)


def _mu_certificate(obj, L: float) -> float:
    """Sell-side mu valid on (0, L]."""
    g = as_price_impact(obj)
    if isinstance(g, PoolPriceImpact):
        pool = g.pool
        if pool.kind == KIND_CURVE:
            # S-shaped quote: the slope at zero is not an upper bound
            return interval_bounds(pool, L).mu
        return mu_closed_form(pool).mu
    if isinstance(g, FixedPriceImpact):
        return 0.0
    return mu_numeric(g).mu


def normalize_orientation(
    f, g, kappa: float | None = None, mu: float | None = None
) -> MarketPair:
    """Build a MarketPair, swapping the quote asset when the external market
    is the more expensive one (prices become reciprocals, sizes move through
    the quantity functions)."""
    f = as_price_impact(f)
    g = as_price_impact(g)
    if f.price(0.0) > g.price(0.0):
        f, g = f.swapped(), g.swapped()
        kappa, mu = None, None  # certificates do not survive the swap
    gap = g.price(0.0) - f.price(0.0)
    if kappa is None:
        kappa = _kappa_certificate(f, gap)
    if mu is None:
        lo, _ = g.domain
        cap = -lo * (1.0 - 1e-9) if math.isfinite(lo) else g.scale
        L = gap / kappa if (kappa > 0.0 and gap > 0.0) else 1e-6 * g.scale
        mu = _mu_certificate(g, min(max(L, 1e-9 * g.scale), cap))
    return MarketPair(external=f, secondary=g, kappa=kappa, mu=mu)


def no_arb_infinite(g, m_a: float) -> float:
    """Sell size delta* with g(-delta*) = m_a against an infinitely liquid
    external price m_a <= g(0)."""
    g = as_price_impact(g)
    if m_a <= 0.0:
        raise OutOfRange("target price must be positive")
    g0 = g.price(0.0)
    if m_a > g0 * (1.0 + _REL_TOL):
        raise OutOfRange(f"target price {m_a} above the current quote {g0}")
    if abs(g0 - m_a) <= _REL_TOL * m_a:
        return 0.0
    lo, _ = g.domain
    # grow the bracket from the pool scale instead of handing the solver the
    # whole domain; a wide-domain pool would otherwise starve the root finder
    cap = -lo * (1.0 - 1e-12) if math.isfinite(lo) else 1e30
    hi = min(g.scale, cap)
    while g.price(-hi) > m_a:
        if hi >= cap:
            raise OutOfRange(
                f"target price {m_a} below the reachable floor {g.price(-hi)}"
            )
        hi = min(hi * 2.0, cap)
    delta = brentq(lambda d: g.price(-d) - m_a, 0.0, hi, xtol=1e-300, rtol=8.9e-16)
    if not _root_certified(lambda d: g.price(-d) - m_a, delta, _REL_TOL * m_a):
        raise NoRoot(f"no-arbitrage trade residual above tolerance at {delta}")
    return float(delta)


def signed_no_arb_trade(pool: PoolState, target_price: float) -> float:
    """Signed trade moving the pool's spot price to the target (positive
    buys the traded coin and raises the price)."""
    g = PoolPriceImpact(pool)
    g0 = g.price(0.0)
    if abs(g0 - target_price) <= _REL_TOL * target_price:
        return 0.0
    if target_price < g0:
        return -no_arb_infinite(g, target_price)
    lo_d, hi_d = trade_domain(pool)
    hi = hi_d * (1.0 - 1e-12)
    if g.price(hi) < target_price:
        raise OutOfRange(
            f"target price {target_price} above the reachable ceiling {g.price(hi)}"
        )
    delta = brentq(
        lambda d: g.price(d) - target_price, 0.0, hi, xtol=1e-300, rtol=8.9e-16
    )
    if not _root_certified(lambda d: g.price(d) - target_price, delta, _REL_TOL * target_price):
        raise NoRoot(f"no-arbitrage trade residual above tolerance at {delta}")
    return float(delta)


def stability_bound(mu: float, kappa: float, m0_s: float, m0_e: float) -> float:
    """(mu/kappa) times the price gap: the certified cap on the secondary
    market's price move."""
    if m0_e > m0_s:
        raise OutOfRange("gap must be nonnegative (m0_e <= m0_s)")
    if kappa <= 0.0:
        raise KappaZero("bound undefined for kappa = 0; use a finite-L certificate")
    return (mu / kappa) * (m0_s - m0_e)


def check_interval_condition(kappa: float, L: float, m0_s: float, m0_e: float) -> bool:
    """Whether the gap fits inside the interval certificate (gap <= kappa L),
    i.e. the finite-interval stability bound applies."""
    if m0_e > m0_s:
        raise OutOfRange("gap must be nonnegative (m0_e <= m0_s)")
    return m0_s - m0_e <= kappa * L


def no_arb_pair(pair: MarketPair, cap: float | None = None) -> NoArbResult:
    """Resolve the no-arbitrage trade for an oriented pair.

    Bisection on f(d) - g(-d) over [0, overshoot]: the witness overshoot =
    gap/kappa has f above g by construction, so a sign change is guaranteed
    when the kappa certificate is honest.  kappa = 0 means an infinitely
    liquid external market and degenerates to no_arb_infinite at m0_e.
    """
    f, g = pair.external, pair.secondary
    m0_e, m0_s = pair.m0_e, pair.m0_s
    gap = max(m0_s - m0_e, 0.0)
    tol = _REL_TOL * m0_s

    if gap <= tol:
        bound = 0.0 if pair.kappa > 0.0 else math.inf
        return NoArbResult(0.0, m0_s, 0.0, bound, 0.0)

    if pair.kappa <= 0.0 and cap is None:
        # flat external quote: the price never moves off m0_e
        delta = no_arb_infinite(g, m0_e)
        return NoArbResult(delta, m0_e, gap, math.inf, math.inf)

    overshoot = gap / pair.kappa if pair.kappa > 0.0 else math.inf
    hi = min(overshoot, cap) if cap is not None else overshoot
    g_lo, _ = g.domain
    _, f_hi = f.domain
    if math.isfinite(g_lo):
        hi = min(hi, -g_lo * (1.0 - 1e-9))
    if math.isfinite(f_hi):
        hi = min(hi, f_hi * (1.0 - 1e-9))

    def residual(d: float) -> float:
        return f.price(d) - g.price(-d)

    r_hi = residual(hi)
    if r_hi < 0.0:
        raise NoCrossing(
            f"no sign change on [0, {hi:.6g}]: residual {r_hi:.6g} at the cap "
            f"(gap {gap:.6g}, kappa {pair.kappa:.6g}, overshoot {overshoot:.6g}); "
            "the kappa certificate looks invalid"
        )

    lo_d, hi_d = 0.0, hi
    mid = hi
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo_d + hi_d)
        r = residual(mid)
        if abs(r) <= tol:
            break
        if r < 0.0:
            lo_d = mid
        else:
            hi_d = mid
    else:
        raise NoRoot(f"bisection residual {residual(mid):.3g} above tolerance {tol:.3g}")

    delta_star = min(mid, overshoot)
    m_a = min(max(0.5 * (f.price(delta_star) + g.price(-delta_star)), m0_e), m0_s)
    bound = (pair.mu / pair.kappa) * gap if pair.kappa > 0.0 else math.inf
    return NoArbResult(
        delta_star=delta_star,
        m_a=m_a,
        price_move=m0_s - m_a,
        bound=bound,
        overshoot_delta=overshoot,
    )


def series_process(values):
    """External price process replaying a fixed series."""
    values = [float(v) for v in values]

    def proc(i: int, rng, current: float) -> float:
        return values[i]

    return proc


def walk_process(sigma: float):
    """Seeded multiplicative random walk on the external price."""
    if sigma < 0.0:
        raise OutOfRange("walk volatility must be nonnegative")

    def proc(i: int, rng, current: float) -> float:
        return current * math.exp(sigma * rng.standard_normal())

    return proc


@dataclass(frozen=True)
class TrajectoryRow:
    round: int
    m0_e: float
    m0_s: float
    m_a: float
    delta_star: float
    bound: float
    pv_lp: float

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "m0_e": self.m0_e,
            "m0_s": self.m0_s,
            "m_a": self.m_a,
            "delta_star": self.delta_star,
            "bound": self.bound,
            "pv_lp": self.pv_lp,
        }


@dataclass
class SimulationResult:
    rows: list
    external: object  # final external state: PoolState or float price
    secondary: PoolState


def _reprice_pool(pool: PoolState, target: float) -> PoolState:
    return apply_trade(pool, signed_no_arb_trade(pool, target))


def simulate_rounds(
    external,
    secondary: PoolState,
    process,
    rounds: int,
    seed: int | None = 0,
) -> SimulationResult:
    """Iterate (external shock -> no-arbitrage trade -> state update).

    The external market is a PoolState (shocked by trading it to the process
    price) or a plain price level (infinitely liquid; the shock replaces
    it).  Each round is recorded in the orientation the trade was solved in,
    so reported prices are reciprocals whenever the shock crosses the
    secondary quote.  Deterministic for a given seed.
    """
    if rounds < 0:
        raise OutOfRange("rounds must be nonnegative")
    rng = np.random.default_rng(seed)
    ext_pool = external if isinstance(external, PoolState) else None
    ext_price = None if ext_pool is not None else float(external)
    sec_pool = secondary
    rows = []

    for i in range(rounds):
        current = (
            marginal_price(ext_pool, 0.0) if ext_pool is not None else ext_price
        )
        target = float(process(i, rng, current))
        if target <= 0.0:
            raise OutOfRange(f"round {i}: price process produced {target}")
        if ext_pool is not None:
            ext_pool = _reprice_pool(ext_pool, target)
            f_base = PoolPriceImpact(ext_pool)
        else:
            ext_price = target
            f_base = FixedPriceImpact(ext_price)

        g_base = PoolPriceImpact(sec_pool)
        flipped = f_base.price(0.0) > g_base.price(0.0)
        pair = normalize_orientation(f_base, g_base)
        try:
            result = no_arb_pair(pair)
        except NoCrossing as exc:
            raise NoCrossing(f"round {i}: {exc}") from exc

        # both markets advance to m_a: the arbitrageur buys delta* on the
        # external market and sells it into the secondary one
        view_sec = swapped(sec_pool) if flipped else sec_pool
        view_sec = apply_trade(view_sec, -result.delta_star)
        pv = portfolio_value(view_sec, result.m_a)
        sec_pool = swapped(view_sec) if flipped else view_sec
        if ext_pool is not None:
            view_ext = swapped(ext_pool) if flipped else ext_pool
            view_ext = apply_trade(view_ext, result.delta_star)
            ext_pool = swapped(view_ext) if flipped else view_ext

        rows.append(
            TrajectoryRow(
                round=i,
                m0_e=pair.m0_e,
                m0_s=pair.m0_s,
                m_a=result.m_a,
                delta_star=result.delta_star,
                bound=result.bound,
                pv_lp=pv,
            )
        )

    return SimulationResult(
        rows=rows,
        external=ext_pool if ext_pool is not None else ext_price,
        secondary=sec_pool,
    )
