"""Shared factories for randomized property tests."""

from __future__ import annotations

import numpy as np

from cfmmkit.pools import (
    KIND_CONSTANT_PRODUCT,
    KIND_CONSTANT_SUM,
    KIND_CURVE,
    KIND_GEOMETRIC_MEAN,
    PoolState,
    apply_trade,
    marginal_price,
)

CONVEX_KINDS = (KIND_CONSTANT_PRODUCT, KIND_GEOMETRIC_MEAN, KIND_CURVE)
ALL_KINDS = (KIND_CONSTANT_SUM,) + CONVEX_KINDS


def random_pool(
    rng: np.random.Generator,
    kind: str,
    r_lo: float = 10.0,
    r_hi: float = 1e5,
    fee_gamma: float = 1.0,
) -> PoolState:
    """Random pool of the given kind with log-uniform reserves.

    Curve pools are drawn at the peg (equal reserves) with coefficients scaled
    so the convexity precondition holds comfortably; use
    :func:`shift_pool_price` to reach off-peg states.
    """
    r = float(10 ** rng.uniform(np.log10(r_lo), np.log10(r_hi)))
    if kind == KIND_CONSTANT_SUM:
        rp = float(10 ** rng.uniform(np.log10(r_lo), np.log10(r_hi)))
        return PoolState.constant_sum(r, rp, fee_gamma)
    if kind == KIND_CONSTANT_PRODUCT:
        rp = float(10 ** rng.uniform(np.log10(r_lo), np.log10(r_hi)))
        return PoolState.constant_product(r, rp, fee_gamma)
    if kind == KIND_GEOMETRIC_MEAN:
        rp = float(10 ** rng.uniform(np.log10(r_lo), np.log10(r_hi)))
        tau = float(rng.uniform(0.15, 0.85))
        return PoolState.geometric_mean(r, rp, tau, fee_gamma)
    # beta capped relative to alpha*r^2 keeps the invariant well away from zero
    # (k = alpha*(2r - beta/(alpha*r^2))), where relative comparisons degrade.
    alpha = float(10 ** rng.uniform(-1.0, 1.0))
    beta = alpha * r**2 * float(10 ** rng.uniform(-2.0, 0.25))
    return PoolState.curve(r, r, alpha, beta, fee_gamma)


def shift_pool_price(pool: PoolState, target_price: float) -> PoolState:
    """Trade the pool along its level set until its quote equals target_price."""
    from cfmmkit.arbitrage import signed_no_arb_trade

    delta = signed_no_arb_trade(pool, target_price)
    return apply_trade(pool, delta)


def pool_with_price(
    rng: np.random.Generator, kind: str, price: float, **kwargs
) -> PoolState:
    """Random pool whose quote equals ``price``.

    Constant-sum pools only quote 1.0; asking anything else is a bug in the
    caller.
    """
    pool = random_pool(rng, kind, **kwargs)
    if kind == KIND_CONSTANT_SUM:
        assert abs(price - 1.0) < 1e-12
        return pool
    if kind == KIND_CONSTANT_PRODUCT:
        return PoolState.constant_product(
            pool.reserve_traded, price * pool.reserve_traded, pool.fee_gamma
        )
    if kind == KIND_GEOMETRIC_MEAN:
        xi = pool.tau / (1.0 - pool.tau)
        return PoolState.geometric_mean(
            pool.reserve_traded,
            price * pool.reserve_traded / xi,
            pool.tau,
            pool.fee_gamma,
        )
    shifted = shift_pool_price(pool, price)
    assert abs(marginal_price(shifted) - price) < 1e-9 * price
    return shifted
