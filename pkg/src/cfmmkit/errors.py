"""Exception types shared across the package.

Numerical helpers raise these instead of bare ValueErrors so callers (and the
CLI exit-code mapping) can tell domain problems from genuine bugs.
"""

from __future__ import annotations


class CfmmKitError(Exception):
    """Base class for all package errors."""


class DomainExceeded(CfmmKitError):
    """Requested trade leaves the pool's admissible reserve region."""


class NoRoot(CfmmKitError):
    """Bracketed root search failed to locate a sign change."""


class NonConvexDetected(CfmmKitError):
    """Sampled secant slopes of a price-impact function decrease with size."""


class PegRequired(CfmmKitError):
    """A closed form was requested at a state where it is only valid at the peg."""


class OutOfRange(CfmmKitError):
    """A price or parameter lies outside the reachable/supported range."""


class NoCrossing(CfmmKitError):
    """No-arbitrage price match not bracketed inside the search interval."""


class KappaZero(CfmmKitError):
    """A liquidity lower bound of zero makes the requested quantity undefined."""


class SpotPriceMismatch(CfmmKitError):
    """Two pools expected to quote the same spot price do not."""


class Diverged(CfmmKitError):
    """Iterative solver left its admissible region or failed to settle."""


class NotDifferentiable(CfmmKitError):
    """A derivative-based quantity was requested where none exists."""


class SingularJacobian(CfmmKitError):
    """The multi-asset state solve hit a singular or non-converging system."""


class GridTooCoarse(CfmmKitError):
    """Quadrature grid cannot reach the requested residual after refinement."""


class ConfigError(CfmmKitError):
    """Invalid CLI configuration; carries the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
