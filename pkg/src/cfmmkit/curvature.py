"""Liquidity curvature bounds.

A price-impact function g is mu-smooth on an interval when the sell-side
price drop is at most linear, g(0) - g(-delta) <= mu * delta, and
kappa-liquid when it is at least linear, g(0) - g(-delta) >= kappa * delta.
The pair (kappa, mu) certifies a sandwich on realized prices that everything
downstream (arbitrage bounds, fee games, subsidies) consumes.

Closed forms exist for the stock pool shapes; everything else goes through
finite differences on the quoted marginal price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainExceeded, NonConvexDetected, OutOfRange, PegRequired
from .impact import PoolPriceImpact, PriceImpact, as_price_impact
from .pools import (
    KIND_CONSTANT_PRODUCT,
    KIND_CONSTANT_SUM,
    KIND_CURVE,
    KIND_GEOMETRIC_MEAN,
    PoolState,
    marginal_price,
    psi_partials,
    psi_second_partials,
    trade_domain,
    trade_output,
)

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class CurvatureBounds:
    """A certified pair kappa <= mu on sell trades in (0, interval_L].

    kappa = 0 and mu = inf are valid (vacuous) certificates, so one-sided
    estimates still produce a well-formed pair.
    """

    kappa: float
    mu: float
    interval_L: float = math.inf

    def __post_init__(self):
        if not 0.0 <= self.kappa:
            raise OutOfRange(f"kappa must be nonnegative, got {self.kappa}")
        if self.kappa > self.mu * (1.0 + 1e-12):
            raise OutOfRange(f"kappa {self.kappa} exceeds mu {self.mu}")
        if not self.interval_L > 0.0:
            raise OutOfRange("interval length must be positive")

    def merged(self, other: "CurvatureBounds") -> "CurvatureBounds":
        """Tightest pair implied by both certificates (valid on the
        shorter interval)."""
        return CurvatureBounds(
            kappa=max(self.kappa, other.kappa),
            mu=min(self.mu, other.mu),
            interval_L=min(self.interval_L, other.interval_L),
        )

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "mu": self.mu,
            "interval_L": self.interval_L,
        }


def _spot(pool: PoolState) -> float:
    return marginal_price(pool, 0.0)


def _at_peg(pool: PoolState) -> bool:
    # the curve closed form is derived on the symmetric state x = y
    return abs(pool.reserve_traded - pool.reserve_numeraire) <= 1e-9 * max(
        pool.reserve_traded, pool.reserve_numeraire
    )


def mu_closed_form(pool: PoolState, peg_only: bool = False) -> CurvatureBounds:
    """Tightest global mu for the stock pool shapes.

    For the stableswap shape the closed form only holds at the symmetric
    (pegged) state; off peg this falls back to the numeric estimate unless
    ``peg_only`` insists on the closed form.
    """
    r, rp = pool.reserve_traded, pool.reserve_numeraire
    if pool.kind == KIND_CONSTANT_SUM:
        # flat quote: price never moves, valid until the numeraire runs out
        return CurvatureBounds(kappa=0.0, mu=0.0, interval_L=rp)
    if pool.kind == KIND_CONSTANT_PRODUCT:
        return CurvatureBounds(kappa=0.0, mu=2.0 * _spot(pool) / r)
    if pool.kind == KIND_GEOMETRIC_MEAN:
        xi = pool.tau / (1.0 - pool.tau)
        return CurvatureBounds(kappa=0.0, mu=(1.0 + xi) * _spot(pool) / r)
    if pool.kind == KIND_CURVE:
        if _at_peg(pool):
            a, b = pool.alpha, pool.beta
            mu = 2.0 * b / (b * r + a * r**4)
            return CurvatureBounds(kappa=0.0, mu=mu)
        if peg_only:
            raise PegRequired(
                "closed-form mu for the stableswap shape needs the pegged state"
            )
        return mu_numeric(pool)
    raise OutOfRange(f"unknown pool kind {pool.kind!r}")


def kappa_closed_form(pool: PoolState, L: float) -> CurvatureBounds:
    """Tightest kappa on (0, L]: the secant slope of the price drop at L."""
    if not L > 0.0:
        raise OutOfRange("interval length must be positive")
    lo, _ = trade_domain(pool)
    if -L < lo:
        raise DomainExceeded(f"interval {L} exceeds sell-side domain {-lo}")
    r = pool.reserve_traded
    g0 = _spot(pool)
    if pool.kind == KIND_CONSTANT_SUM:
        return CurvatureBounds(kappa=0.0, mu=0.0, interval_L=min(L, pool.reserve_numeraire))
    if pool.kind == KIND_CONSTANT_PRODUCT:
        kappa = (g0 / L) * (1.0 - 1.0 / (1.0 + L / r) ** 2)
    elif pool.kind == KIND_GEOMETRIC_MEAN:
        xi = pool.tau / (1.0 - pool.tau)
        kappa = (g0 / L) * (1.0 - 1.0 / (1.0 + L / r) ** (1.0 + xi))
    elif pool.kind == KIND_CURVE:
        # no tidy algebraic form; the quote itself is exact, so the secant is
        kappa = (g0 - marginal_price(pool, -L)) / L
    else:
        raise OutOfRange(f"unknown pool kind {pool.kind!r}")
    return CurvatureBounds(kappa=max(kappa, 0.0), mu=math.inf, interval_L=L)


def interval_bounds(obj, L: float, n_grid: int = 512) -> CurvatureBounds:
    """Certified pair on (0, L] from dense secant sampling.

    Works for any monotone quote, including shapes that are not convex in
    trade size (where the small-trade slope is not a valid global mu).  The
    grid inf/sup is padded by its spacing-relative variation so points
    between samples stay inside the sandwich.
    """
    g = as_price_impact(obj)
    if not L > 0.0:
        raise OutOfRange("interval length must be positive")
    lo, _ = g.domain
    if math.isfinite(lo) and -L < lo:
        raise DomainExceeded(f"interval {L} exceeds sell-side domain {-lo}")
    g0 = g.price(0.0)
    half = n_grid // 2
    grid = np.unique(
        np.concatenate(
            [
                np.geomspace(L * 1e-9, L, half),
                np.linspace(L / half, L, n_grid - half),
            ]
        )
    )
    secants = np.array([_secant(g, g0, float(d)) for d in grid])
    s_lo, s_hi = float(secants.min()), float(secants.max())
    pad = (s_hi - s_lo) * (8.0 / n_grid) + 1e-12 * max(abs(s_hi), 1e-300)
    return CurvatureBounds(kappa=max(s_lo - pad, 0.0), mu=s_hi + pad, interval_L=L)


def curvature_bounds(pool: PoolState, L: float) -> CurvatureBounds:
    """Both certificates on (0, L].

    Closed forms where the quote is convex in trade size; the stableswap
    shape is S-shaped (its secant grows on the sell side), so its pair comes
    from interval sampling instead.
    """
    if pool.kind == KIND_CURVE:
        return interval_bounds(pool, L, n_grid=1024)
    return kappa_closed_form(pool, L).merged(mu_closed_form(pool))


def _secant(g: PriceImpact, g0: float, delta: float) -> float:
    return (g0 - g.price(-delta)) / delta


def _probe_step(g: PriceImpact) -> float:
    base = max(1e-7, 1e-7 * g.scale)
    lo, _ = g.domain
    if math.isfinite(lo):
        base = min(base, 0.25 * -lo)
    if base <= 0.0:
        raise DomainExceeded("no sell-side room to probe the price impact")
    return base


def mu_numeric(obj, step: float | None = None) -> CurvatureBounds:
    """Estimate the small-trade slope of the sell-side price drop.

    Two secants at h and h/2 with Richardson extrapolation.  Convex impact
    makes the secant shrink with trade size; measurable growth already at
    the estimation scale means the slope at zero is not even a local upper
    bound, and we refuse with NonConvexDetected rather than report it.
    """
    g = as_price_impact(obj)
    g0 = g.price(0.0)
    h = step if step is not None else _probe_step(g)
    lo, _ = g.domain
    if math.isfinite(lo) and -h < lo:
        raise DomainExceeded(f"step {h} exceeds sell-side domain {-lo}")

    s_full = _secant(g, g0, h)
    s_half = _secant(g, g0, h / 2.0)
    # noise floor: the secant differences cancel to ~eps*g0/h
    tol = 1e-9 * max(abs(s_full), abs(s_half)) + 64.0 * _EPS * abs(g0) / h
    if s_full > s_half + tol:
        raise NonConvexDetected(
            f"secant slope grows with trade size near zero "
            f"({s_half:.6g} at {h / 2:g} -> {s_full:.6g} at {h:g})"
        )
    mu = 2.0 * s_half - s_full
    mu = max(mu, s_half, s_full, 0.0)
    return CurvatureBounds(kappa=0.0, mu=mu)


def buy_side_kappa(obj, L: float, n_grid: int = 257) -> CurvatureBounds:
    """Buy-side liquidity certificate on (0, L]: the infimum of the price
    rise secants (f(d) - f(0))/d over a dense grid, padded down by the
    grid-spacing variation.  Valid for any monotone quote."""
    f = as_price_impact(obj)
    if not L > 0.0:
        raise OutOfRange("interval length must be positive")
    _, hi = f.domain
    if math.isfinite(hi) and L > hi:
        raise DomainExceeded(f"interval {L} exceeds buy-side domain {hi}")
    f0 = f.price(0.0)
    half = n_grid // 2
    grid = np.unique(
        np.concatenate(
            [
                np.geomspace(L * 1e-9, L, half),
                np.linspace(L / half, L, n_grid - half),
            ]
        )
    )
    secants = np.array([(f.price(float(d)) - f0) / float(d) for d in grid])
    s_lo, s_hi = float(secants.min()), float(secants.max())
    pad = (s_hi - s_lo) * (8.0 / n_grid) + 1e-12 * max(abs(s_lo), 1e-300)
    return CurvatureBounds(kappa=max(s_lo - pad, 0.0), mu=math.inf, interval_L=L)


def kappa_numeric(obj, L: float) -> CurvatureBounds:
    """Secant slope of the price drop over (0, L] for any impact function."""
    g = as_price_impact(obj)
    if not L > 0.0:
        raise OutOfRange("interval length must be positive")
    lo, _ = g.domain
    if math.isfinite(lo) and -L < lo:
        raise DomainExceeded(f"interval {L} exceeds sell-side domain {-lo}")
    g0 = g.price(0.0)
    kappa = _secant(g, g0, L)
    return CurvatureBounds(kappa=max(kappa, 0.0), mu=math.inf, interval_L=L)


@dataclass
class StabilityReport:
    """Outcome of sampling the sandwich kappa*d <= g(0)-g(-d) <= mu*d."""

    passed: bool
    kappa: float
    mu: float
    interval_L: float
    n_samples: int
    n_violations: int
    worst_lower_slack: float
    worst_lower_at: float
    worst_upper_slack: float
    worst_upper_at: float
    convexity_ok: bool
    samples: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "kappa": self.kappa,
            "mu": self.mu,
            "interval_L": self.interval_L,
            "n_samples": self.n_samples,
            "n_violations": self.n_violations,
            "worst_lower_slack": self.worst_lower_slack,
            "worst_lower_at": self.worst_lower_at,
            "worst_upper_slack": self.worst_upper_slack,
            "worst_upper_at": self.worst_upper_at,
            "convexity_ok": self.convexity_ok,
        }

    def sample_rows(self) -> list[dict]:
        return [
            {
                "delta": d,
                "price_drop": gap,
                "lower": lo,
                "upper": hi,
            }
            for d, gap, lo, hi in self.samples
        ]


def verify_stability(
    obj,
    bounds: CurvatureBounds,
    n_samples: int = 256,
    seed: int | None = 0,
) -> StabilityReport:
    """Sample sell trades in (0, L] and test the sandwich; never throws.

    Slack is signed distance inside the sandwich (negative = violated).  A
    small relative tolerance absorbs float noise.  Convexity of the sampled
    drops is reported as an advisory flag, not enforced.
    """
    g = as_price_impact(obj)
    dom_lo, _ = g.domain
    L = bounds.interval_L
    if not math.isfinite(L):
        L = -dom_lo * 0.9 if math.isfinite(dom_lo) else g.scale
    if math.isfinite(dom_lo):
        L = min(L, -dom_lo)

    rng = np.random.default_rng(seed)
    deltas = np.concatenate([[L * 1e-6, L], L * rng.uniform(0.0, 1.0, size=max(0, n_samples - 2))])
    deltas = np.unique(deltas[deltas > 0.0])

    g0 = g.price(0.0)
    tol_scale = max(abs(g0), bounds.kappa * L, (bounds.mu * L) if math.isfinite(bounds.mu) else 0.0)
    tol = 1e-9 * max(tol_scale, 1e-30)

    samples = []
    n_viol = 0
    worst_lo, worst_lo_at = math.inf, 0.0
    worst_hi, worst_hi_at = math.inf, 0.0
    prev = None
    convex_ok = True
    for d in sorted(deltas):
        gap = g0 - g.price(-float(d))
        lo_slack = gap - bounds.kappa * d
        hi_slack = (bounds.mu * d - gap) if math.isfinite(bounds.mu) else math.inf
        if lo_slack < worst_lo:
            worst_lo, worst_lo_at = lo_slack, float(d)
        if hi_slack < worst_hi:
            worst_hi, worst_hi_at = hi_slack, float(d)
        if lo_slack < -tol or hi_slack < -tol:
            n_viol += 1
        s = gap / d
        if prev is not None and s > prev + 1e-9 * max(abs(s), abs(prev)) + tol / d:
            convex_ok = False
        prev = s
        samples.append((float(d), float(gap), bounds.kappa * d, bounds.mu * d))

    return StabilityReport(
        passed=n_viol == 0,
        kappa=bounds.kappa,
        mu=bounds.mu,
        interval_L=float(L),
        n_samples=len(samples),
        n_violations=n_viol,
        worst_lower_slack=float(worst_lo),
        worst_lower_at=worst_lo_at,
        worst_upper_slack=float(worst_hi) if math.isfinite(worst_hi) else math.inf,
        worst_upper_at=worst_hi_at,
        convexity_ok=convex_ok,
        samples=samples,
    )


def gaussian_curvature(
    pool: PoolState, delta: float = 0.0, delta_prime: float | None = None
) -> float:
    """Curvature of the invariant level set at the post-trade reserves,
    oriented so convex trading sets come out nonnegative."""
    if delta_prime is None:
        delta_prime = trade_output(pool, delta) if delta != 0.0 else 0.0
    x = pool.reserve_traded - delta
    y = pool.reserve_numeraire + delta_prime
    if x <= 0.0 or y <= 0.0:
        raise DomainExceeded("post-trade reserves must stay positive")
    fx, fy = psi_partials(pool, x, y)
    fxx, fxy, fyy = psi_second_partials(pool, x, y)
    grad_sq = fx * fx + fy * fy
    return (2.0 * fx * fy * fxy - fy * fy * fxx - fx * fx * fyy) / grad_sq**1.5


@dataclass(frozen=True)
class ConvexityReport:
    """Sufficient conditions for local convexity of the stableswap shape."""

    a_value: float  # alpha * x^2 y, compared against beta
    b_value: float  # alpha * x y^2, compared against alpha
    product_xy: float
    ratio_value: float  # 2(u + 1/u) for the reserve ratio u = x/y
    a_ok: bool
    b_ok: bool
    product_ok: bool
    ratio_ok: bool
    ok: bool
    margin: float

    def to_dict(self) -> dict:
        return {
            "a_value": self.a_value,
            "b_value": self.b_value,
            "product_xy": self.product_xy,
            "ratio_value": self.ratio_value,
            "a_ok": self.a_ok,
            "b_ok": self.b_ok,
            "product_ok": self.product_ok,
            "ratio_ok": self.ratio_ok,
            "ok": self.ok,
            "margin": self.margin,
        }


def curve_convexity_check(
    pool: PoolState, delta: float = 0.0, delta_prime: float | None = None
) -> ConvexityReport:
    """Check the stableswap convexity conditions at post-trade reserves."""
    if pool.kind != KIND_CURVE:
        raise OutOfRange("convexity check applies to the stableswap shape only")
    if delta_prime is None:
        delta_prime = trade_output(pool, delta) if delta != 0.0 else 0.0
    x = pool.reserve_traded - delta
    y = pool.reserve_numeraire + delta_prime
    if x <= 0.0 or y <= 0.0:
        raise DomainExceeded("post-trade reserves must stay positive")
    a, b = pool.alpha, pool.beta
    a_value = a * x * x * y
    b_value = a * x * y * y
    u = x / y
    ratio_value = 2.0 * (u + 1.0 / u)
    a_ok = a_value > b
    b_ok = b_value > a
    product_ok = x * y > 1.0
    ratio_ok = ratio_value >= 1.0
    margin = min(a_value - b, b_value - a, x * y - 1.0, ratio_value - 1.0)
    return ConvexityReport(
        a_value=a_value,
        b_value=b_value,
        product_xy=x * y,
        ratio_value=ratio_value,
        a_ok=a_ok,
        b_ok=b_ok,
        product_ok=product_ok,
        ratio_ok=ratio_ok,
        ok=a_ok and b_ok and product_ok and ratio_ok,
        margin=margin,
    )
