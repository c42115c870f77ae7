"""Sublinear generator for a volatility band.

The generator of the uncertain-volatility setting is the piecewise linear map

    G(q) = (sigma_hi_sq * max(q, 0) - sigma_lo_sq * max(-q, 0)) / 2,

i.e. half the support function of the variance interval
[sigma_lo_sq, sigma_hi_sq].  Every other module consumes a ``GFunction``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBandError

__all__ = ["GFunction", "eval_g", "two_g", "ellipticity_beta"]


@dataclass(frozen=True)
class GFunction:
    """Volatility band stored as variance bounds (sigma_lo^2, sigma_hi^2)."""

    sigma_lo_sq: float
    sigma_hi_sq: float

    def __post_init__(self):
        if not (0.0 <= self.sigma_lo_sq <= self.sigma_hi_sq):
            raise ValueError(
                f"need 0 <= sigma_lo_sq <= sigma_hi_sq, got "
                f"({self.sigma_lo_sq}, {self.sigma_hi_sq})"
            )

    @classmethod
    def from_volatilities(cls, sigma_lo: float, sigma_hi: float) -> "GFunction":
        """Build from volatilities; squaring happens only here."""
        if sigma_lo < 0 or sigma_hi < 0:
            raise ValueError("volatilities must be nonnegative")
        return cls(sigma_lo * sigma_lo, sigma_hi * sigma_hi)

    @property
    def sigma_hi(self) -> float:
        return float(np.sqrt(self.sigma_hi_sq))

    @property
    def sigma_lo(self) -> float:
        return float(np.sqrt(self.sigma_lo_sq))

    @property
    def is_linear(self) -> bool:
        """True when the band collapses to a single variance."""
        return self.sigma_lo_sq == self.sigma_hi_sq


def eval_g(gf: GFunction, x):
    """Evaluate G(x); accepts scalars or arrays, exact at x = 0."""
    arr = np.asarray(x, dtype=float)
    out = 0.5 * (
        gf.sigma_hi_sq * np.maximum(arr, 0.0) - gf.sigma_lo_sq * np.maximum(-arr, 0.0)
    )
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def two_g(gf: GFunction, q):
    """Evaluate 2*G(q) = sup over admissible variances s of s*q (vectorized).

    This is the form the PDE solver needs; implemented directly so that the
    inf-mode mirror -2G(-q) is an exact floating-point negation.
    """
    arr = np.asarray(q, dtype=float)
    out = np.where(arr >= 0.0, gf.sigma_hi_sq * arr, gf.sigma_lo_sq * arr)
    if np.isscalar(q) or np.ndim(q) == 0:
        return float(out)
    return out


def ellipticity_beta(gf: GFunction) -> float:
    """Largest beta with G(y) - G(z) >= beta*(y - z) for all y >= z.

    For the piecewise linear G this is the smaller slope sigma_lo_sq / 2;
    it is positive exactly when the band is uniformly elliptic.
    """
    if gf.sigma_lo_sq <= 0.0:
        raise DegenerateBandError("sigma_lo_sq = 0: uniform ellipticity fails")
    return 0.5 * gf.sigma_lo_sq
