"""Distribution of a normalized G-normal increment.

The upper distribution function F(a) of a unit-time increment solves the
nonlinear heat equation u_t = G(u_xx) forward from indicator data 1{x <= a};
F(a) is the solution at (t, x) = (1, 0).  One law is solved per volatility
band and reused for every time step through the sqrt(dt) scaling of G-normal
increments.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StabilityError, UnderResolvedGridError
from .gcore import GFunction

__all__ = [
    "HeatGridSpec",
    "IncrementLaw",
    "solve_gheat_cdf",
    "sample_increment",
    "normal_cdf",
]

MONOTONE_TOL = 1e-6  # non-monotone CDF output beyond this signals an under-resolved grid
LOWER_BOUND_TOL = 5e-3  # slack for the constant-volatility lower bound


def _inversion_table(a: np.ndarray, cdf: np.ndarray):
    """Inversion nodes: endpoints of strictly increasing segments plus the grid ends.

    Flat interior runs of the CDF carry no probability mass, so only the
    nodes bounding actual increases matter; keeping the first and last grid
    node preserves the clamping behavior for out-of-range queries.
    """
    n = cdf.size
    rising = np.diff(cdf) > 0.0
    keep = np.zeros(n, dtype=bool)
    keep[:-1] |= rising
    keep[1:] |= rising
    keep[0] = keep[-1] = True
    return cdf[keep], a[keep]


def normal_cdf(z):
    """Standard normal CDF via the C error function (vectorized)."""
    arr = np.asarray(z, dtype=float)
    out = 0.5 * (1.0 + np.vectorize(math.erf)(arr / math.sqrt(2.0)))
    if np.ndim(z) == 0:
        return float(out)
    return out


def _scaled_normal_cdf(a, sigma_sq):
    """CDF of N(0, sigma_sq) at a, with the step-function limit at sigma_sq = 0."""
    a = np.asarray(a, dtype=float)
    if sigma_sq <= 0.0:
        return np.where(a < 0.0, 0.0, np.where(a > 0.0, 1.0, 0.5))
    return normal_cdf(a / math.sqrt(sigma_sq))


@dataclass(frozen=True)
class HeatGridSpec:
    """Grid for the forward solve: spatial half-width, spacing, time step."""

    x_halfwidth: float
    dx: float
    dt: float

    @classmethod
    def default_for(cls, gf: GFunction) -> "HeatGridSpec":
        # half-width 8*sigma_hi covers > 1 - 1e-6 of mass under either extreme
        # constant volatility; dt at 90% of the monotonicity bound dx^2/sigma_hi^2
        sig = max(gf.sigma_hi, 1e-12)
        dx = 0.02 * sig
        return cls(x_halfwidth=8.0 * sig, dx=dx, dt=0.9 * dx * dx / gf.sigma_hi_sq)


def default_a_grid(gf: GFunction, n: int = 201, span: float = 5.0) -> np.ndarray:
    """Equispaced threshold levels over [-span*sigma_hi, span*sigma_hi]."""
    sig = max(gf.sigma_hi, 1e-12)
    return np.linspace(-span * sig, span * sig, n)


@dataclass
class IncrementLaw:
    """Tabulated CDF of the unit-time normalized increment, inversion-ready."""

    a_grid: np.ndarray
    cdf: np.ndarray
    gf: GFunction
    _inv_a: np.ndarray = field(init=False, repr=False)
    _inv_f: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.a_grid = np.asarray(self.a_grid, dtype=float)
        self.cdf = np.asarray(self.cdf, dtype=float)
        self.validate()
        inv_f, inv_a = _inversion_table(self.a_grid, self.cdf)
        object.__setattr__(self, "_inv_f", inv_f)
        object.__setattr__(self, "_inv_a", inv_a)

    def validate(self, lb_tol: float = LOWER_BOUND_TOL) -> None:
        a, f = self.a_grid, self.cdf
        if a.ndim != 1 or a.shape != f.shape or a.size < 2:
            raise ValueError("a_grid and cdf must be 1-d arrays of equal length >= 2")
        if not np.all(np.diff(a) > 0.0):
            raise ValueError("a_grid must be strictly increasing")
        if np.any(np.diff(f) < -MONOTONE_TOL):
            raise UnderResolvedGridError("cdf decreases beyond tolerance")
        if f.min() < -1e-12 or f.max() > 1.0 + 1e-12:
            raise ValueError("cdf values must lie in [0, 1]")
        if f[0] > 0.02 or f[-1] < 0.98:
            raise ValueError("a_grid does not cover the effective support")
        lb = np.maximum(
            _scaled_normal_cdf(a, self.gf.sigma_hi_sq),
            _scaled_normal_cdf(a, self.gf.sigma_lo_sq),
        )
        worst = float(np.max(lb - f))
        if worst > lb_tol:
            raise ValueError(
                f"cdf under-cuts the constant-volatility lower bound by {worst:.2e}"
            )

    def mean(self) -> float:
        """Mean of the sampled law (exact for the piecewise-linear CDF)."""
        df = np.diff(self.cdf)
        mids = 0.5 * (self.a_grid[1:] + self.a_grid[:-1])
        # clamped tails put the residual mass on the end nodes
        return float(
            np.sum(df * mids)
            + self.cdf[0] * self.a_grid[0]
            + (1.0 - self.cdf[-1]) * self.a_grid[-1]
        )

    def second_moment(self) -> float:
        df = np.diff(self.cdf)
        a0, a1 = self.a_grid[:-1], self.a_grid[1:]
        # E[a^2] on each cell of the linear interpolant: (a0^2+a0*a1+a1^2)/3
        cell = (a0 * a0 + a0 * a1 + a1 * a1) / 3.0
        return float(
            np.sum(df * cell)
            + self.cdf[0] * self.a_grid[0] ** 2
            + (1.0 - self.cdf[-1]) * self.a_grid[-1] ** 2
        )

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["a", "cdf"])
            for a, f in zip(self.a_grid, self.cdf):
                w.writerow([f"{a:.17g}", f"{f:.17g}"])

    @classmethod
    def load_csv(cls, path, gf: GFunction) -> "IncrementLaw":
        a, f = [], []
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if [h.strip() for h in header] != ["a", "cdf"]:
                raise ValueError(f"unexpected law cache header: {header}")
            for row in r:
                a.append(float(row[0]))
                f.append(float(row[1]))
        return cls(np.asarray(a), np.asarray(f), gf)


def solve_gheat_cdf(
    gf: GFunction,
    a_grid: np.ndarray | None = None,
    numerics: HeatGridSpec | None = None,
) -> IncrementLaw:
    """Tabulate F(a) = u(1, 0) of u_t = G(u_xx), u(0, x) = 1{x <= a}.

    All threshold levels are marched together as rows of one array.  The
    indicator is mollified over one cell (linear ramp across the node nearest
    a), the far fields are Dirichlet-exact (1 on the left, 0 on the right),
    and the result is clamped to [0, 1].
    """
    if numerics is None:
        numerics = HeatGridSpec.default_for(gf)
    if a_grid is None:
        a_grid = default_a_grid(gf)
    a_grid = np.asarray(a_grid, dtype=float)
    if not np.all(np.diff(a_grid) > 0.0):
        raise ValueError("a_grid must be strictly increasing")

    hw, dx = numerics.x_halfwidth, numerics.dx
    if a_grid[0] <= -hw or a_grid[-1] >= hw:
        raise ValueError("a_grid must lie strictly inside the spatial domain")
    dt_bound = dx * dx / gf.sigma_hi_sq if gf.sigma_hi_sq > 0 else np.inf
    if numerics.dt > dt_bound * (1.0 + 1e-12):
        raise StabilityError(
            f"dt = {numerics.dt:g} exceeds the bound dx^2/sigma_hi^2 = {dt_bound:g}"
        )

    n_half = int(round(hw / dx))
    xs = (np.arange(2 * n_half + 1) - n_half) * dx  # symmetric grid containing 0
    n_steps = max(1, int(math.ceil(1.0 / numerics.dt - 1e-12)))
    dt = 1.0 / n_steps

    # one row per threshold level; cell-averaged indicator as initial data
    u = np.clip((a_grid[:, None] - xs[None, :]) / dx + 0.5, 0.0, 1.0)
    hi, lo = gf.sigma_hi_sq, gf.sigma_lo_sq
    inv_dx2 = 1.0 / (dx * dx)
    for _ in range(n_steps):
        uxx = (u[:, 2:] - 2.0 * u[:, 1:-1] + u[:, :-2]) * inv_dx2
        g_of_uxx = 0.5 * np.where(uxx >= 0.0, hi * uxx, lo * uxx)
        u[:, 1:-1] += dt * g_of_uxx
        # far-field values of the indicator data
        u[:, 0] = 1.0
        u[:, -1] = 0.0

    f = u[:, n_half].copy()
    if np.any(np.diff(f) < -MONOTONE_TOL):
        raise UnderResolvedGridError("non-monotone CDF output; refine dx/dt")
    f = np.maximum.accumulate(np.clip(f, 0.0, 1.0))
    return IncrementLaw(a_grid, f, gf)


def sample_increment(law: IncrementLaw, u, dt: float):
    """Draw sqrt(dt) * F^{-1}(u) by linear interpolation of the tabulated CDF.

    Queries below min(cdf) clamp to the first grid node and above max(cdf)
    to the last; monotone in u.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    val = np.interp(u, law._inv_f, law._inv_a)
    out = math.sqrt(dt) * val
    if np.ndim(u) == 0:
        return float(out)
    return out
