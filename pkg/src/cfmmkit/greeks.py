"""Portfolio sensitivities (delta, gamma) at the no-arbitrage state, the
curvature hedging sandwich, and cubic-weight replication portfolios."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .arbitrage import signed_no_arb_trade
from .errors import (
    GridTooCoarse,
    NotDifferentiable,
    OutOfRange,
    SingularJacobian,
)
from .pools import (
    KIND_CONSTANT_PRODUCT,
    KIND_CONSTANT_SUM,
    KIND_GEOMETRIC_MEAN,
    PoolState,
    apply_trade,
    invariant_value,
    psi_partials,
    psi_second_partials,
)


@dataclass(frozen=True)
class GreeksReport:
    """First and second price sensitivities of the LP portfolio value.

    p_delta equals the traded reserve at the no-arbitrage state; p_gamma is
    the reserve's own price derivative.  A fixed-price pool cannot move, so
    its gamma is NaN with the flag set instead of an exception.
    """

    p_v: float
    p_delta: float
    p_gamma: float
    price: float
    not_differentiable: bool = False

    def to_dict(self) -> dict:
        return {
            "p_v": self.p_v,
            "p_delta": self.p_delta,
            "p_gamma": self.p_gamma,
            "price": self.price,
            "not_differentiable": self.not_differentiable,
        }


def _reserve_at(pool: PoolState, m: float) -> tuple[float, float]:
    state = apply_trade(pool, signed_no_arb_trade(pool, m))
    return state.reserve_traded, state.reserve_numeraire


def greeks_two_asset(pool: PoolState, m: float) -> GreeksReport:
    """Sensitivities of P_V = m R + R' with the reserves moved to their
    no-arbitrage values at price m."""
    if m <= 0.0 or not math.isfinite(m):
        raise OutOfRange(f"price must be positive and finite, got {m}")
    r, rp = _reserve_at(pool, m)
    p_v = m * r + rp

    if pool.kind == KIND_CONSTANT_SUM:
        return GreeksReport(
            p_v=p_v,
            p_delta=r,
            p_gamma=math.nan,
            price=m,
            not_differentiable=True,
        )
    if pool.kind == KIND_CONSTANT_PRODUCT:
        k = invariant_value(pool)
        p_gamma = -0.5 * math.sqrt(k) * m**-1.5
    elif pool.kind == KIND_GEOMETRIC_MEAN:
        p_gamma = (pool.tau - 1.0) * r / m
    else:
        # no closed form for the reserve curve; central difference of R(m)
        h = 1e-6 * m
        r_hi, _ = _reserve_at(pool, m + h)
        r_lo, _ = _reserve_at(pool, m - h)
        p_gamma = (r_hi - r_lo) / (2.0 * h)
    return GreeksReport(p_v=p_v, p_delta=r, p_gamma=p_gamma, price=m)


def _fd_grad(fn, r: np.ndarray) -> np.ndarray:
    out = np.empty(r.size)
    for i in range(r.size):
        h = 1e-6 * max(1.0, abs(r[i]))
        e = np.zeros(r.size)
        e[i] = h
        out[i] = (fn(r + e) - fn(r - e)) / (2.0 * h)
    return out


def _project_no_arb(fn, gradf, k: float, prices: np.ndarray, num: int, r0: np.ndarray):
    """Newton-solve for reserves on the level set fn = k whose relative
    prices equal ``prices``; warm-started from r0 (perturbations are tiny)."""
    n = r0.size
    k_scale = max(1.0, abs(k))

    def residual(r: np.ndarray) -> np.ndarray:
        g = gradf(r)
        gn = g[num]
        out = np.empty(n)
        rows = [i for i in range(n) if i != num]
        for j, i in enumerate(rows):
            out[j] = (g[i] - prices[i] * gn) / max(1.0, abs(gn))
        out[-1] = (fn(r) - k) / k_scale
        return out

    r = r0.copy()
    f = residual(r)
    for _ in range(60):
        if np.max(np.abs(f)) <= 1e-12:
            return r
        jac = np.empty((n, n))
        for j in range(n):
            h = 1e-6 * max(1.0, abs(r[j]))
            e = np.zeros(n)
            e[j] = h
            jac[:, j] = (residual(r + e) - residual(r - e)) / (2.0 * h)
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(
                "no-arbitrage projection has a singular Jacobian; the level "
                "set does not pin reserves to these prices"
            ) from exc
        r_next = r + step
        if np.any(r_next <= 0.0) or not np.all(np.isfinite(r_next)):
            raise SingularJacobian(
                "no-arbitrage projection left the positive orthant"
            )
        r, f = r_next, residual(r_next)
    raise SingularJacobian("no-arbitrage projection did not converge")


def greeks_n_asset(
    trading_fn,
    reserves,
    numeraire: int = -1,
    grad=None,
    step: float = 1e-7,
) -> tuple[np.ndarray, np.ndarray]:
    """Price sensitivities (P_delta)_i = R_i + sum_{j != i} (m_j - 1) dR_j/dm_i
    and the diagonal (P_gamma)_ii, with derivatives from one-sided price
    perturbation re-projected onto the level set.

    Prices come from the gradient at ``reserves`` (the numeraire's own entries
    are filled with the trivial values R_n and NaN: its price cannot move).
    ``grad`` takes an analytic gradient callable; the default is a central
    difference of ``trading_fn``.
    """
    r0 = np.asarray(reserves, dtype=float)
    n = r0.size
    if n < 2 or np.any(r0 <= 0.0):
        raise OutOfRange("need at least two positive reserves")
    num = numeraire % n
    gradf = grad if grad is not None else (lambda r: _fd_grad(trading_fn, r))
    g0 = np.asarray(gradf(r0), dtype=float)
    if not np.all(np.isfinite(g0)) or g0[num] <= 0.0:
        raise SingularJacobian("numeraire partial must be positive and finite")
    prices = g0 / g0[num]
    k = float(trading_fn(r0))

    p_delta = np.empty(n)
    p_gamma = np.empty(n)
    p_delta[num] = r0[num]
    p_gamma[num] = math.nan
    for i in range(n):
        if i == num:
            continue
        h = step * prices[i]
        bumped = prices.copy()
        bumped[i] = prices[i] + h
        dr = (_project_no_arb(trading_fn, gradf, k, bumped, num, r0) - r0) / h
        cross = prices - 1.0
        cross[i] = 0.0
        p_delta[i] = r0[i] + float(cross @ dr)
        if np.max(np.abs(cross)) <= 1e-12:
            # all other prices sit at 1, so the second-derivative terms vanish
            p_gamma[i] = dr[i]
            continue
        # second differences need a bigger step than the projection noise floor
        h2 = 1e-3 * prices[i]
        up, dn = prices.copy(), prices.copy()
        up[i] = prices[i] + h2
        dn[i] = prices[i] - h2
        r_up = _project_no_arb(trading_fn, gradf, k, up, num, r0)
        r_dn = _project_no_arb(trading_fn, gradf, k, dn, num, r0)
        d2r = (r_up - 2.0 * r0 + r_dn) / (h2 * h2)
        p_gamma[i] = dr[i] + float(cross @ d2r)
    return p_delta, p_gamma


@dataclass(frozen=True)
class HedgeBounds:
    """Curvature sandwich for the portfolio delta after a sell of ``delta``.

    All quantities are signed with the decreasing-price direction, where
    dd_dm = dDelta/dm <= 0, so lower <= p_delta <= upper holds when mu and
    kappa bound the quote slope pointwise on the traversed interval (the
    secant-sense kappa can exceed the far-end slope and break the bracket).
    pv_slope is dP_V/dDelta = g'(-delta) (R + delta) in the magnitude form.
    """

    lower: float
    upper: float
    p_delta: float
    pv_slope: float
    dd_dm: float

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "p_delta": self.p_delta,
            "pv_slope": self.pv_slope,
            "dd_dm": self.dd_dm,
        }


def quote_slope(pool: PoolState, z: float) -> float:
    """Derivative of the marginal price with respect to trade size at z,
    via the level-set second partials."""
    state = apply_trade(pool, z)
    x, y = state.reserve_traded, state.reserve_numeraire
    px, py = psi_partials(pool, x, y)
    pxx, pxy, pyy = psi_second_partials(pool, x, y)
    m = px / py
    m_x = (pxx - m * pxy) / py
    m_y = (pxy - m * pyy) / py
    return -m_x + m_y * m


def hedge_bounds(pool: PoolState, delta: float, mu: float, kappa: float) -> HedgeBounds:
    """Linear bounds mu (R+delta) dDelta/dm <= P_delta <= kappa (R+delta) dDelta/dm
    for a sell of ``delta``, with the exact value alongside."""
    if delta < 0.0:
        raise OutOfRange("bounds hold for the decreasing-price direction only")
    if pool.kind == KIND_CONSTANT_SUM:
        # fixed price: nothing to hedge, and 1/g' is not meaningful
        return HedgeBounds(lower=0.0, upper=0.0, p_delta=0.0, pv_slope=0.0, dd_dm=0.0)
    slope = quote_slope(pool, -delta)
    if slope <= 0.0 or not math.isfinite(slope):
        raise NotDifferentiable(
            f"quote slope {slope} at -{delta} cannot be inverted"
        )
    reserve = pool.reserve_traded + delta
    dd_dm = -1.0 / slope
    return HedgeBounds(
        lower=mu * reserve * dd_dm,
        upper=kappa * reserve * dd_dm,
        p_delta=slope * reserve * dd_dm,
        pv_slope=slope * reserve,
        dd_dm=dd_dm,
    )


@dataclass(frozen=True)
class ReplicationPortfolio:
    """Strike grid with cubic weights 2/K^3 covering impacts above
    cutoff + epsilon."""

    strikes: np.ndarray
    weights: np.ndarray
    cutoff: float
    epsilon: float

    @property
    def lower(self) -> float:
        return self.cutoff + self.epsilon

    def __post_init__(self):
        if np.any(self.weights <= 0.0):
            raise OutOfRange("replication weights must be positive")

    def to_rows(self) -> list[dict]:
        return [
            {"strike": float(k), "weight": float(w)}
            for k, w in zip(self.strikes, self.weights)
        ]


def carr_madan_weights(cutoff: float, epsilon: float, strikes) -> ReplicationPortfolio:
    """Cubic replication weights on a strike grid starting at cutoff + epsilon."""
    if cutoff < 0.0 or epsilon <= 0.0:
        raise OutOfRange("cutoff must be nonnegative and epsilon positive")
    ks = np.asarray(strikes, dtype=float)
    if ks.ndim != 1 or ks.size < 2:
        raise OutOfRange("need a one-dimensional grid of at least two strikes")
    if np.any(np.diff(ks) <= 0.0):
        raise OutOfRange("strikes must be strictly increasing")
    lower = cutoff + epsilon
    if ks[0] < lower * (1.0 - 1e-12):
        raise OutOfRange(f"strikes must start at or above {lower}")
    return ReplicationPortfolio(
        strikes=ks, weights=2.0 / ks**3, cutoff=cutoff, epsilon=epsilon
    )


@dataclass(frozen=True)
class CarrMadanCheck:
    """Truncated replication integral against its two references.

    quadrature_residual compares against the analytic truncated value
    1/F + F/a^2 - 2/a (a = cutoff + epsilon), the quantity refinement can
    drive to zero; identity_residual compares against the gated target
    1/F, which the truncation only reproduces at F = 2a.
    """

    integral: float
    analytic: float
    target: float
    quadrature_residual: float
    identity_residual: float
    refinements: int
    nodes: int

    def to_dict(self) -> dict:
        return {
            "integral": self.integral,
            "analytic": self.analytic,
            "target": self.target,
            "quadrature_residual": self.quadrature_residual,
            "identity_residual": self.identity_residual,
            "refinements": self.refinements,
            "nodes": self.nodes,
        }


def truncated_replication_integral(
    portfolio: ReplicationPortfolio, forward: float, n_nodes: int
) -> float:
    """Simpson value of the truncated payoff integral over the support
    [cutoff + epsilon, forward] on a uniform grid of n_nodes points."""
    a = portfolio.lower
    if forward <= a:
        return 0.0
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise OutOfRange("Simpson needs an odd node count of at least 3")
    ks = np.linspace(a, forward, n_nodes)
    payoff = 2.0 / ks**3 * (forward - ks)
    return float(simpson(payoff, x=ks))


def carr_madan_check(
    portfolio: ReplicationPortfolio,
    forward: float,
    tolerance: float = 1e-8,
    max_refinements: int = 14,
) -> CarrMadanCheck:
    """Evaluate the truncated integral by quadrature, refining the grid until
    it matches the analytic truncation within ``tolerance``."""
    if forward <= 0.0 or not math.isfinite(forward):
        raise OutOfRange(f"forward must be positive and finite, got {forward}")
    a = portfolio.lower
    if forward <= a:
        # payoff gated out below the cutoff
        return CarrMadanCheck(
            integral=0.0,
            analytic=0.0,
            target=0.0,
            quadrature_residual=0.0,
            identity_residual=0.0,
            refinements=0,
            nodes=0,
        )
    if portfolio.strikes[-1] < 10.0 * forward * (1.0 - 1e-12):
        raise OutOfRange(
            f"grid tops out at {portfolio.strikes[-1]}; it must cover ten "
            f"times the forward {forward}"
        )
    analytic = 1.0 / forward + forward / a**2 - 2.0 / a
    in_support = int(np.count_nonzero((portfolio.strikes >= a) & (portfolio.strikes <= forward)))
    base = 2 * max(in_support, 4) + 1
    integral = 0.0
    refinements = 0
    nodes = base
    for refinements in range(max_refinements + 1):
        nodes = (base - 1) * 2**refinements + 1
        integral = truncated_replication_integral(portfolio, forward, nodes)
        if abs(integral - analytic) <= tolerance:
            break
    else:
        raise GridTooCoarse(
            f"quadrature residual {abs(integral - analytic):.3g} above "
            f"{tolerance:.3g} after {max_refinements} refinements"
        )
    target = 1.0 / forward
    return CarrMadanCheck(
        integral=integral,
        analytic=analytic,
        target=target,
        quadrature_residual=abs(integral - analytic),
        identity_residual=abs(integral - target),
        refinements=refinements,
        nodes=nodes,
    )
