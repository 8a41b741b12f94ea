"""Two-asset CFMM pool states and trade mechanics.

Sign conventions used throughout the package:

* A trade of size ``delta > 0`` buys the traded coin: reserves move to
  ``(R - delta, R' + delta_prime)`` with ``delta_prime > 0`` numeraire paid in.
* ``delta < 0`` sells ``|delta|`` of the traded coin to the pool and
  ``delta_prime < 0`` is the numeraire paid out.
* ``marginal_price(pool, delta)`` is the instantaneous price of the traded
  coin in numeraire immediately after the (feeless) trade ``delta``; it is
  nondecreasing in ``delta`` for every supported kind.

Supported kinds and their trading functions on post-trade reserves (x, y):

* ``constant_sum``      psi = x + y
* ``constant_product``  psi = x * y
* ``geometric_mean``    psi = x**tau * y**(1 - tau)
* ``curve``             psi = alpha * (x + y) - beta / (x * y)

The fee ``gamma`` in (0, 1] applies to the input leg of a trade ("on the way
in"): selling |delta| credits only gamma*|delta| toward the invariant while the
full amount lands in reserves.  The buy direction is the same rule on the
swapped pool (fee on the numeraire input); see :func:`trade_output_with_fee`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

from scipy.optimize import brentq

from .errors import DomainExceeded, NoRoot, OutOfRange

KIND_CONSTANT_SUM = "constant_sum"
KIND_CONSTANT_PRODUCT = "constant_product"
KIND_GEOMETRIC_MEAN = "geometric_mean"
KIND_CURVE = "curve"

KNOWN_KINDS = (
    KIND_CONSTANT_SUM,
    KIND_CONSTANT_PRODUCT,
    KIND_GEOMETRIC_MEAN,
    KIND_CURVE,
)

# Post-trade reserves must stay above this fraction of the initial reserve.
RESERVE_FLOOR_FRACTION = 1e-9

# Residual tolerance for the curve invariant root: absolute at small invariant
# magnitude, relative once |k| makes 1e-12 unreachable in float64.
_CURVE_RESIDUAL_TOL = 1e-12
_CURVE_MAX_EXPANSIONS = 200


@dataclass(frozen=True)
class PoolState:
    """Immutable snapshot of a two-asset pool.

    ``tau`` is the geometric-mean weight on the traded asset; ``alpha`` and
    ``beta`` are the curve coefficients.  Parameters not used by ``kind`` stay
    ``None``.
    """

    kind: str
    reserve_traded: float
    reserve_numeraire: float
    fee_gamma: float = 1.0
    tau: float | None = None
    alpha: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in KNOWN_KINDS:
            raise OutOfRange(f"unknown pool kind {self.kind!r}")
        if not (self.reserve_traded > 0 and self.reserve_numeraire > 0):
            raise OutOfRange("reserves must be positive")
        if not 0.0 < self.fee_gamma <= 1.0:
            raise OutOfRange("fee_gamma must lie in (0, 1]")
        if self.kind == KIND_GEOMETRIC_MEAN:
            if self.tau is None or not 0.0 < self.tau < 1.0:
                raise OutOfRange("geometric_mean requires tau in (0, 1)")
        if self.kind == KIND_CURVE:
            if self.alpha is None or self.beta is None:
                raise OutOfRange("curve requires alpha and beta")
            if self.alpha <= 0 or self.beta <= 0:
                raise OutOfRange("curve coefficients must be positive")

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def constant_sum(r: float, r_prime: float, fee_gamma: float = 1.0) -> "PoolState":
        return PoolState(KIND_CONSTANT_SUM, r, r_prime, fee_gamma)

    @staticmethod
    def constant_product(r: float, r_prime: float, fee_gamma: float = 1.0) -> "PoolState":
        return PoolState(KIND_CONSTANT_PRODUCT, r, r_prime, fee_gamma)

    @staticmethod
    def geometric_mean(
        r: float, r_prime: float, tau: float, fee_gamma: float = 1.0
    ) -> "PoolState":
        return PoolState(KIND_GEOMETRIC_MEAN, r, r_prime, fee_gamma, tau=tau)

    @staticmethod
    def curve(
        r: float, r_prime: float, alpha: float, beta: float, fee_gamma: float = 1.0
    ) -> "PoolState":
        return PoolState(KIND_CURVE, r, r_prime, fee_gamma, alpha=alpha, beta=beta)

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        params: dict[str, float] = {}
        if self.kind == KIND_GEOMETRIC_MEAN:
            params["tau"] = self.tau
        elif self.kind == KIND_CURVE:
            params["alpha"] = self.alpha
            params["beta"] = self.beta
        return {
            "kind": self.kind,
            "params": params,
            "reserve_traded": self.reserve_traded,
            "reserve_numeraire": self.reserve_numeraire,
            "fee_gamma": self.fee_gamma,
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "PoolState":
        params = data.get("params") or {}
        return PoolState(
            kind=data["kind"],
            reserve_traded=float(data["reserve_traded"]),
            reserve_numeraire=float(data["reserve_numeraire"]),
            fee_gamma=float(data.get("fee_gamma", 1.0)),
            tau=params.get("tau"),
            alpha=params.get("alpha"),
            beta=params.get("beta"),
        )

    def to_json(self) -> str:
        # json emits floats with repr(): shortest string that round-trips, so
        # the 17-significant-digit losslessness requirement holds.
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "PoolState":
        return PoolState.from_dict(json.loads(text))


def swapped(pool: PoolState) -> PoolState:
    """The same liquidity seen from the other asset's side.

    Reserves exchange roles; a geometric-mean pool's weight moves to the other
    asset; curve and the symmetric kinds keep their parameters.
    """
    tau = None if pool.tau is None else 1.0 - pool.tau
    return PoolState(
        kind=pool.kind,
        reserve_traded=pool.reserve_numeraire,
        reserve_numeraire=pool.reserve_traded,
        fee_gamma=pool.fee_gamma,
        tau=tau,
        alpha=pool.alpha,
        beta=pool.beta,
    )


# -- trading function and partials on post-trade reserves ---------------------


def psi_value(pool: PoolState, x: float, y: float) -> float:
    """Trading function evaluated at reserves (x, y)."""
    if x <= 0 or y <= 0:
        raise DomainExceeded("reserves must stay positive")
    if pool.kind == KIND_CONSTANT_SUM:
        return x + y
    if pool.kind == KIND_CONSTANT_PRODUCT:
        return x * y
    if pool.kind == KIND_GEOMETRIC_MEAN:
        return x**pool.tau * y ** (1.0 - pool.tau)
    return pool.alpha * (x + y) - pool.beta / (x * y)


def psi_partials(pool: PoolState, x: float, y: float) -> tuple[float, float]:
    """First partials of the trading function with respect to (x, y)."""
    if x <= 0 or y <= 0:
        raise DomainExceeded("reserves must stay positive")
    if pool.kind == KIND_CONSTANT_SUM:
        return 1.0, 1.0
    if pool.kind == KIND_CONSTANT_PRODUCT:
        return y, x
    if pool.kind == KIND_GEOMETRIC_MEAN:
        tau = pool.tau
        common = x**tau * y ** (1.0 - tau)
        return tau * common / x, (1.0 - tau) * common / y
    a, b = pool.alpha, pool.beta
    return a + b / (x * x * y), a + b / (x * y * y)


def psi_second_partials(pool: PoolState, x: float, y: float) -> tuple[float, float, float]:
    """(d2/dx2, d2/dxdy, d2/dy2) of the trading function at (x, y)."""
    if pool.kind == KIND_CONSTANT_SUM:
        return 0.0, 0.0, 0.0
    if pool.kind == KIND_CONSTANT_PRODUCT:
        return 0.0, 1.0, 0.0
    if pool.kind == KIND_GEOMETRIC_MEAN:
        tau = pool.tau
        common = x**tau * y ** (1.0 - tau)
        fxx = tau * (tau - 1.0) * common / (x * x)
        fyy = (1.0 - tau) * (-tau) * common / (y * y)
        fxy = tau * (1.0 - tau) * common / (x * y)
        return fxx, fxy, fyy
    b = pool.beta
    fxx = -2.0 * b / (x**3 * y)
    fyy = -2.0 * b / (x * y**3)
    fxy = -b / (x * x * y * y)
    return fxx, fxy, fyy


def invariant_value(pool: PoolState) -> float:
    """Trading-function value at the current reserves."""
    return psi_value(pool, pool.reserve_traded, pool.reserve_numeraire)


# -- trade domain --------------------------------------------------------------


def trade_domain(pool: PoolState) -> tuple[float, float]:
    """Admissible (delta_min, delta_max), clipped so post-trade reserves stay
    above RESERVE_FLOOR_FRACTION times the initial reserves."""
    r, rp = pool.reserve_traded, pool.reserve_numeraire
    floor_x = RESERVE_FLOOR_FRACTION * r
    floor_y = RESERVE_FLOOR_FRACTION * rp
    delta_max = r - floor_x

    if pool.kind == KIND_CONSTANT_SUM:
        delta_min = -(rp - floor_y)
    elif pool.kind == KIND_CONSTANT_PRODUCT:
        k = r * rp
        delta_min = -(k / floor_y - r)
    elif pool.kind == KIND_GEOMETRIC_MEAN:
        # Level set y(x) = R' * (R/x)**xi, so the floor on y maps to
        # x = R * (R'/floor_y)**(1/xi).
        xi = pool.tau / (1.0 - pool.tau)
        x_at_floor = r * (rp / floor_y) ** (1.0 / xi)
        delta_min = -(x_at_floor - r)
    else:
        k = invariant_value(pool)
        x_hi = _curve_x_for_y(pool, k, floor_y)
        x_lo = floor_x
        # The convexity precondition x*y > 1 cuts the level set where
        # x + 1/x = (k + beta)/alpha; both roots (their product is 1) bound the
        # sell and buy sides respectively when the cut exists.
        s = (k + pool.beta) / pool.alpha
        if s >= 2.0:
            big = 0.5 * (s + math.sqrt(s * s - 4.0))
            x_hi = min(x_hi, big)
            x_lo = max(x_lo, 1.0 / big)
        delta_min = -(x_hi - r)
        delta_max = r - x_lo
    return delta_min, delta_max


def _require_in_domain(pool: PoolState, delta: float) -> None:
    """Cheap per-kind domain check; the curve sell side is enforced after the
    invariant solve instead of re-solving here."""
    r, rp = pool.reserve_traded, pool.reserve_numeraire
    floor_x = RESERVE_FLOOR_FRACTION * r
    if delta > r - floor_x:
        raise DomainExceeded(f"trade {delta} would drain the traded reserve ({r:.6g})")
    if pool.kind == KIND_CURVE or delta >= 0:
        return
    floor_y = RESERVE_FLOOR_FRACTION * rp
    if pool.kind == KIND_CONSTANT_SUM:
        lo = -(rp - floor_y)
    elif pool.kind == KIND_CONSTANT_PRODUCT:
        lo = -(r * rp / floor_y - r)
    else:
        xi = pool.tau / (1.0 - pool.tau)
        lo = -(r * (rp / floor_y) ** (1.0 / xi) - r)
    if delta < lo:
        raise DomainExceeded(f"trade {delta} would drain the numeraire reserve")


def _check_curve_floor(pool: PoolState, y: float) -> None:
    if y < RESERVE_FLOOR_FRACTION * pool.reserve_numeraire:
        raise DomainExceeded("trade would drain the curve numeraire reserve")


# -- curve root solving --------------------------------------------------------


def _curve_y_for_x(pool: PoolState, k: float, x: float) -> float:
    """Numeraire reserve on the curve level set at traded reserve x.

    Bracketed root on the invariant residual, which is strictly increasing in
    y; bracket grows by doubling until it straddles the root.  The residual
    tolerance is absolute at small scale and tracks the float64 evaluation
    noise of the invariant's terms at large scale.
    """
    a, b = pool.alpha, pool.beta

    def residual(y: float) -> float:
        return a * (x + y) - b / (x * y) - k

    lo = min(pool.reserve_numeraire, 1.0) * 1e-12
    while residual(lo) > 0:
        lo *= 0.5
        if lo < 1e-300:
            raise NoRoot("curve invariant has no positive numeraire solution")
    hi = max(pool.reserve_numeraire, (abs(k) + 1.0) / a)
    expansions = 0
    while residual(hi) < 0:
        hi *= 2.0
        expansions += 1
        if expansions > _CURVE_MAX_EXPANSIONS:
            raise NoRoot("bracket expansion exhausted solving curve invariant")
    y = brentq(residual, lo, hi, xtol=1e-300, rtol=8.9e-16)
    noise = a * (x + y) + b / (x * y) + abs(k)
    tol = max(_CURVE_RESIDUAL_TOL, 1e-13 * noise)
    if abs(residual(y)) > tol:
        raise NoRoot(f"curve invariant residual {residual(y):.3e} above tolerance")
    return y


def _curve_x_for_y(pool: PoolState, k: float, y: float) -> float:
    # The trading function is symmetric in (x, y), so reuse the y-solver on the
    # swapped roles.
    return _curve_y_for_x(swapped(pool), k, y)


def _check_curve_precondition(pool: PoolState, x: float, y: float) -> None:
    # Convexity of the curve price impact needs x*y > 1 at every evaluated
    # state (combined form of the two coefficient conditions).
    if pool.kind == KIND_CURVE and x * y <= 1.0:
        raise DomainExceeded(
            f"curve convexity precondition violated: (R-d)(R'+d') = {x * y:.6g} <= 1"
        )


# -- feeless trades ------------------------------------------------------------


def trade_output(pool: PoolState, delta: float) -> float:
    """Numeraire leg delta_prime of the feeless trade ``delta``.

    Post-trade reserves are ``(R - delta, R' + delta_prime)`` and the invariant
    is conserved exactly (closed form) or to the residual tolerance (curve).
    """
    _require_in_domain(pool, delta)
    r, rp = pool.reserve_traded, pool.reserve_numeraire
    x = r - delta

    if pool.kind == KIND_CONSTANT_SUM:
        return delta
    if pool.kind == KIND_CONSTANT_PRODUCT:
        return r * rp / x - rp
    if pool.kind == KIND_GEOMETRIC_MEAN:
        # y = R' * (R/x)**xi; equivalent to solving the invariant but immune
        # to the overflow in k**(1/(1-tau)) for tau near 1.
        xi = pool.tau / (1.0 - pool.tau)
        return rp * (r / x) ** xi - rp
    k = invariant_value(pool)
    y = _curve_y_for_x(pool, k, x)
    _check_curve_floor(pool, y)
    _check_curve_precondition(pool, x, y)
    return y - rp


def apply_trade(pool: PoolState, delta: float, with_fee: bool = False) -> PoolState:
    """Pool state after executing ``delta``.

    Feeless: reserves move along the level set.  With fee, the full input leg
    lands in reserves while only the gamma-discounted amount counts toward the
    invariant, so the invariant value grows by the fee.
    """
    r, rp = pool.reserve_traded, pool.reserve_numeraire
    if not with_fee or pool.fee_gamma == 1.0:
        dp = trade_output(pool, delta)
        new_r, new_rp = r - delta, rp + dp
    elif delta <= 0:
        # sell side: invariant credited with gamma*delta, full |delta| lands in
        dp = trade_output(pool, pool.fee_gamma * delta)
        new_r, new_rp = r - delta, rp + dp
    else:
        # buy side by asset-swap symmetry: fee on the numeraire input
        dp = trade_output(pool, delta) / pool.fee_gamma
        new_r, new_rp = r - delta, rp + dp
    return PoolState(
        kind=pool.kind,
        reserve_traded=new_r,
        reserve_numeraire=new_rp,
        fee_gamma=pool.fee_gamma,
        tau=pool.tau,
        alpha=pool.alpha,
        beta=pool.beta,
    )


def trade_output_with_fee(pool: PoolState, delta: float) -> float:
    """Numeraire leg of the fee-bearing trade ``delta``.

    Selling (delta <= 0) pays out ``trade_output(gamma * delta)``; buying costs
    ``trade_output(delta) / gamma`` (fee charged on the numeraire input).
    """
    if delta <= 0:
        return trade_output(pool, pool.fee_gamma * delta)
    return trade_output(pool, delta) / pool.fee_gamma


# -- marginal prices -----------------------------------------------------------


def marginal_price(pool: PoolState, delta: float = 0.0) -> float:
    """Instantaneous price g(delta) of the traded coin right after ``delta``."""
    _require_in_domain(pool, delta)
    r, rp = pool.reserve_traded, pool.reserve_numeraire
    x = r - delta

    if pool.kind == KIND_CONSTANT_SUM:
        return 1.0
    if pool.kind == KIND_CONSTANT_PRODUCT:
        return r * rp / (x * x)
    if pool.kind == KIND_GEOMETRIC_MEAN:
        xi = pool.tau / (1.0 - pool.tau)
        return xi * (rp / x) * (r / x) ** xi
    k = invariant_value(pool)
    y = _curve_y_for_x(pool, k, x)
    _check_curve_floor(pool, y)
    _check_curve_precondition(pool, x, y)
    px, py = psi_partials(pool, x, y)
    return px / py


def marginal_price_with_fee(pool: PoolState, delta: float) -> float:
    """Fee-adjusted marginal price gamma * g(gamma * delta), sell side only.

    Defined for delta <= 0 (fee charged on the traded-coin input).  The buy
    direction is the same formula on ``swapped(pool)``; callers wanting it
    should swap rather than expect a second code path here.
    """
    if delta > 0:
        raise OutOfRange("fee-adjusted price is defined for the sell side (delta <= 0)")
    return pool.fee_gamma * marginal_price(pool, pool.fee_gamma * delta)


def spot_price(pool: PoolState) -> float:
    """Current quote g(0)."""
    return marginal_price(pool, 0.0)


# -- integral form of the quantity function ------------------------------------


def quantity_fn(pool: PoolState, delta: float) -> float:
    """Numeraire leg recovered by integrating the marginal price over the trade.

    Independent quadrature route; equals :func:`trade_output` up to quadrature
    tolerance.  Kept separate from the closed forms on purpose so the two
    routes can cross-check each other.
    """
    from scipy.integrate import quad

    _require_in_domain(pool, delta)
    value, _ = quad(lambda t: marginal_price(pool, t), 0.0, delta, epsabs=1e-12, epsrel=1e-12)
    return value


# -- valuation helpers ----------------------------------------------------------


def portfolio_value(pool: PoolState, price: float | None = None) -> float:
    """Reserve value in numeraire at ``price`` (defaults to the pool's quote)."""
    p = spot_price(pool) if price is None else price
    return p * pool.reserve_traded + pool.reserve_numeraire


def min_portfolio_value(pool: PoolState, price: float) -> float:
    """Smallest reserve value at fixed ``price`` over the invariant level set.

    Numerical 1-D minimization of price*x + y(x) with y from the level set;
    used by the fee lower-bound checks.
    """
    from scipy.optimize import minimize_scalar

    k = invariant_value(pool)
    r = pool.reserve_traded

    def y_of_x(x: float) -> float:
        if pool.kind == KIND_CONSTANT_SUM:
            return k - x
        if pool.kind == KIND_CONSTANT_PRODUCT:
            return k / x
        if pool.kind == KIND_GEOMETRIC_MEAN:
            xi = pool.tau / (1.0 - pool.tau)
            return pool.reserve_numeraire * (pool.reserve_traded / x) ** xi
        return _curve_y_for_x(pool, k, x)

    def objective(log_x: float) -> float:
        x = math.exp(log_x)
        try:
            y = y_of_x(x)
        except (DomainExceeded, NoRoot):
            return 1e300
        if y <= 0:
            return 1e300
        return price * x + y

    lo_x, hi_x = 1e-6 * r, 1e6 * r
    if pool.kind == KIND_CONSTANT_SUM:
        hi_x = min(hi_x, k * (1.0 - 1e-12))
    res = minimize_scalar(
        objective,
        bounds=(math.log(lo_x), math.log(hi_x)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.fun)
