"""Price-impact function abstraction.

A price-impact function quotes the marginal price right after a feeless trade
of signed size delta (positive = buy the traded coin).  Pools, interpolated
tables, plain callables and fixed-price (infinitely liquid) venues all expose
the same small surface so the curvature estimators and arbitrage solvers can
treat them uniformly.
"""

from __future__ import annotations

import csv
import math
import warnings
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from .errors import DomainExceeded, NoRoot, OutOfRange
from .pools import PoolState, marginal_price, trade_domain, trade_output


class PriceImpact:
    """Base class; subclasses implement ``price`` and set ``domain``/``scale``.

    ``quantity(delta)`` integrates the price over the trade and has the units
    of the numeraire leg; the default adaptive quadrature is overridden where
    an exact form exists.
    """

    domain: tuple[float, float] = (-math.inf, math.inf)
    scale: float = 1.0

    def price(self, delta: float) -> float:
        raise NotImplementedError

    def quantity(self, delta: float) -> float:
        value, _ = quad(self.price, 0.0, delta, epsabs=1e-12, epsrel=1e-12)
        return value

    def swapped(self) -> "PriceImpact":
        """The same venue quoted in the other asset (reciprocal prices,
        quantities mapped through the quantity function)."""
        return _SwappedImpact(self)

    def __call__(self, delta: float) -> float:
        return self.price(delta)


class PoolPriceImpact(PriceImpact):
    """Marginal price of a PoolState; the quantity function is the exact
    trade leg, not a quadrature."""

    def __init__(self, pool: PoolState):
        self.pool = pool
        self.domain = trade_domain(pool)
        self.scale = pool.reserve_traded

    def price(self, delta: float) -> float:
        return marginal_price(self.pool, delta)

    def quantity(self, delta: float) -> float:
        return trade_output(self.pool, delta)

    def swapped(self) -> "PoolPriceImpact":
        from .pools import swapped as swap_pool

        return PoolPriceImpact(swap_pool(self.pool))


class FixedPriceImpact(PriceImpact):
    """Infinitely liquid venue: flat quote at ``price_level``."""

    def __init__(self, price_level: float):
        if price_level <= 0:
            raise OutOfRange("price level must be positive")
        self.price_level = price_level
        self.domain = (-math.inf, math.inf)
        self.scale = 1.0

    def price(self, delta: float) -> float:
        return self.price_level

    def quantity(self, delta: float) -> float:
        return self.price_level * delta

    def swapped(self) -> "FixedPriceImpact":
        return FixedPriceImpact(1.0 / self.price_level)


class CallablePriceImpact(PriceImpact):
    def __init__(
        self,
        fn: Callable[[float], float],
        domain: tuple[float, float] = (-math.inf, math.inf),
        scale: float = 1.0,
    ):
        self._fn = fn
        self.domain = domain
        self.scale = scale

    def price(self, delta: float) -> float:
        return self._fn(delta)


class TablePriceImpact(PriceImpact):
    """Piecewise-linear interpolation of (delta, price) samples.

    Prices must be nondecreasing in delta (price impact is monotone);
    evaluation outside the sampled range is refused rather than extrapolated.
    """

    def __init__(self, deltas: Sequence[float], prices: Sequence[float]):
        d = np.asarray(deltas, dtype=float)
        p = np.asarray(prices, dtype=float)
        if d.ndim != 1 or d.size < 2 or d.shape != p.shape:
            raise OutOfRange("need at least two (delta, price) samples")
        order = np.argsort(d)
        d, p = d[order], p[order]
        if np.any(np.diff(d) <= 0):
            raise OutOfRange("delta samples must be distinct")
        if np.any(np.diff(p) < 0):
            raise OutOfRange("prices must be nondecreasing in delta")
        if np.any(p <= 0):
            raise OutOfRange("prices must be positive")
        if not (d[0] <= 0.0 <= d[-1]):
            raise OutOfRange("table must cover delta = 0")
        self._d, self._p = d, p
        self.domain = (float(d[0]), float(d[-1]))
        self.scale = float(max(abs(d[0]), abs(d[-1])))

    @staticmethod
    def from_csv(path: str) -> "TablePriceImpact":
        deltas: list[float] = []
        prices: list[float] = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"delta", "price"} <= set(
                reader.fieldnames
            ):
                raise OutOfRange(f"{path}: expected columns delta, price")
            for row in reader:
                deltas.append(float(row["delta"]))
                prices.append(float(row["price"]))
        return TablePriceImpact(deltas, prices)

    def price(self, delta: float) -> float:
        lo, hi = self.domain
        if not lo <= delta <= hi:
            raise DomainExceeded(f"delta {delta} outside table range [{lo}, {hi}]")
        return float(np.interp(delta, self._d, self._p))

    def quantity(self, delta: float) -> float:
        # exact integral of the interpolant: trapezoid over the breakpoints
        lo, hi = self.domain
        if not lo <= delta <= hi:
            raise DomainExceeded(f"delta {delta} outside table range [{lo}, {hi}]")
        a, b = (0.0, delta) if delta >= 0 else (delta, 0.0)
        xs = [a] + [float(x) for x in self._d if a < x < b] + [b]
        ys = [self.price(x) for x in xs]
        total = sum(
            0.5 * (y0 + y1) * (x1 - x0) for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:])
        )
        return total if delta >= 0 else -total


class _SwappedImpact(PriceImpact):
    """Generic asset-swap view: quotes 1/g at the trade mapped through the
    inverse quantity function (numeraire-denominated sizes).

    Buying delta of the numeraire drains the numeraire leg, so it matches an
    original trade with quantity(d) = -delta.
    """

    def __init__(self, base: PriceImpact):
        self._base = base
        lo, hi = base.domain
        with warnings.catch_warnings():
            # domain endpoints sit on the reserve floor where the quote blows
            # up; quad's accuracy complaint is harmless for a domain bookmark
            warnings.simplefilter("ignore", IntegrationWarning)
            q_lo = base.quantity(lo) if math.isfinite(lo) else -math.inf
            q_hi = base.quantity(hi) if math.isfinite(hi) else math.inf
        self.domain = (-q_hi, -q_lo)
        self.scale = base.scale * base.price(0.0)

    def _invert_quantity(self, q_target: float) -> float:
        base = self._base
        lo, hi = base.domain

        def residual(d: float) -> float:
            return base.quantity(d) - q_target

        a = max(lo, -base.scale)
        b = min(hi, base.scale)
        for _ in range(200):
            if residual(a) <= 0.0 <= residual(b):
                return brentq(residual, a, b, xtol=1e-14 * max(1.0, base.scale))
            if residual(a) > 0:
                a = max(lo, a * 2 if a < 0 else -base.scale)
                if a == lo and residual(a) > 0:
                    raise NoRoot("swapped quantity below reachable range")
            if residual(b) < 0:
                b = min(hi, b * 2 if b > 0 else base.scale)
                if b == hi and residual(b) < 0:
                    raise NoRoot("swapped quantity above reachable range")
        raise NoRoot("quantity inversion did not bracket")

    def price(self, delta: float) -> float:
        return 1.0 / self._base.price(self._invert_quantity(-delta))

    def swapped(self) -> PriceImpact:
        return self._base


def as_price_impact(obj) -> PriceImpact:
    """Coerce a PoolState or PriceImpact into a PriceImpact."""
    if isinstance(obj, PriceImpact):
        return obj
    if isinstance(obj, PoolState):
        return PoolPriceImpact(obj)
    raise TypeError(f"cannot interpret {type(obj).__name__} as a price impact function")
