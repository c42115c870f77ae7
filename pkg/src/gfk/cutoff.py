"""Bounded C^{1,2} regularization of unbounded coefficient triples.

For a cutoff width eps in (0, 1) the drift and quadratic-variation
coefficients keep their original values up to x = 1/eps and continue with an
arctan + Gaussian tail matching value, slope and curvature at the junction.
The diffusion coefficient additionally gets an arctan extension below eps
that keeps it bounded away from zero, and the discount coordinate is capped
by an arctan bend above 1/eps.

All first and second derivatives are available in closed form so the solver
and the verification suite never have to differentiate numerically.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CutoffError
from .paths import CoefficientSet

__all__ = [
    "RegularizedCoefficientSet",
    "build_cutoff",
    "eval_ab",
    "ABValues",
    "junction_report",
    "JunctionReport",
    "boundedness_scan",
]


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, (arr.ndim == 0)


def _pick(x, mask, f_in, f_out):
    """Evaluate f_in on x[mask] and f_out elsewhere without cross-domain calls."""
    out = np.empty_like(x)
    if mask.any():
        out[mask] = f_in(x[mask])
    if (~mask).any():
        out[~mask] = f_out(x[~mask])
    return out


@dataclass(frozen=True)
class RegularizedCoefficientSet:
    """Cutoff family (f_eps, g_eps, h_eps, theta_eps) with derivative maps."""

    base: CoefficientSet
    eps: float
    a_const: float
    delta_eps: float
    hbar_center: str = "inv_eps"
    t_grid: np.ndarray = field(default_factory=lambda: np.array([0.0]))

    @property
    def inv_eps(self) -> float:
        return 1.0 / self.eps

    @property
    def corridor(self) -> tuple[float, float]:
        return self.eps, self.inv_eps

    # -- upper arctan/Gaussian tail, shared by f, g, h ---------------------

    def _tail(self, t, x, order, val_j, slope_j, curv_j):
        d = x - self.inv_eps
        if order == 0:
            return val_j + slope_j * np.arctan(d) + curv_j * (1.0 - np.exp(-0.5 * d * d))
        if order == 1:
            return slope_j / (1.0 + d * d) + curv_j * d * np.exp(-0.5 * d * d)
        if order == 2:
            return (
                slope_j * (-2.0 * d) / (1.0 + d * d) ** 2
                + curv_j * np.exp(-0.5 * d * d) * (1.0 - d * d)
            )
        raise ValueError(order)

    def _coef(self, which: str, t, x, order: int):
        base = self.base
        phi = getattr(base, which)
        phi_x = getattr(base, which + "_x")
        phi_xx = getattr(base, which + "_xx")
        if phi_x is None or phi_xx is None:
            raise ValueError(f"base coefficient '{which}' lacks derivative maps")
        j = self.inv_eps
        val_j, slope_j, curv_j = phi(t, j), phi_x(t, j), phi_xx(t, j)

        arr, scalar = _as_array(x)
        arr = np.atleast_1d(arr)
        base_order = (phi, phi_x, phi_xx)[order]

        if which == "h":
            out = np.empty_like(arr)
            low = arr < self.eps
            mid = (arr >= self.eps) & (arr <= j)
            upp = arr > j
            if low.any():
                out[low] = self._hbar(t, arr[low], order)
            if mid.any():
                out[mid] = base_order(t, arr[mid])
            if upp.any():
                out[upp] = self._tail(t, arr[upp], order, val_j, slope_j, curv_j)
        else:
            out = _pick(
                arr,
                arr <= j,
                lambda xs: np.asarray(base_order(t, xs), dtype=float),
                lambda xs: self._tail(t, xs, order, val_j, slope_j, curv_j),
            )
        return float(out[0]) if scalar else out

    def _hbar(self, t, x, order: int):
        """Lower extension of h; active on x < eps only."""
        base, a = self.base, self.a_const
        val_e = base.h(t, self.eps)
        slope_e = base.h_x(t, self.eps)
        curv_e = base.h_xx(t, self.eps)
        center = self.inv_eps if self.hbar_center == "inv_eps" else self.eps
        w = (x - self.eps) / a
        d = x - center
        if order == 0:
            return (
                val_e
                + slope_e * a * np.arctan(w)
                + curv_e * (1.0 - np.exp(-0.5 * d * d))
            )
        if order == 1:
            return slope_e / (1.0 + w * w) + curv_e * d * np.exp(-0.5 * d * d)
        if order == 2:
            return (
                slope_e * (-2.0 * w / a) / (1.0 + w * w) ** 2
                + curv_e * np.exp(-0.5 * d * d) * (1.0 - d * d)
            )
        raise ValueError(order)

    def _coef_t(self, which: str, t, x):
        """Time derivative; tails inherit d/dt of the junction value because the
        mixed partial of the base coefficients vanishes."""
        phi_t = getattr(self.base, which + "_t")
        if phi_t is None:
            raise ValueError(f"base coefficient '{which}' lacks a time derivative")
        arr, scalar = _as_array(x)
        arr = np.atleast_1d(arr)
        j = self.inv_eps
        out = np.empty_like(arr)
        if which == "h":
            low = arr < self.eps
            mid = (arr >= self.eps) & (arr <= j)
            out[low] = phi_t(t, self.eps)
            if mid.any():
                out[mid] = np.asarray(phi_t(t, arr[mid]), dtype=float)
            out[arr > j] = phi_t(t, j)
        else:
            inside = arr <= j
            if inside.any():
                out[inside] = np.asarray(phi_t(t, arr[inside]), dtype=float)
            out[~inside] = phi_t(t, j)
        return float(out[0]) if scalar else out

    # -- public coefficient maps ------------------------------------------

    def f_eps(self, t, x):
        return self._coef("f", t, x, 0)

    def f_eps_x(self, t, x):
        return self._coef("f", t, x, 1)

    def f_eps_xx(self, t, x):
        return self._coef("f", t, x, 2)

    def f_eps_t(self, t, x):
        return self._coef_t("f", t, x)

    def g_eps(self, t, x):
        return self._coef("g", t, x, 0)

    def g_eps_x(self, t, x):
        return self._coef("g", t, x, 1)

    def g_eps_xx(self, t, x):
        return self._coef("g", t, x, 2)

    def g_eps_t(self, t, x):
        return self._coef_t("g", t, x)

    def h_eps(self, t, x):
        return self._coef("h", t, x, 0)

    def h_eps_x(self, t, x):
        return self._coef("h", t, x, 1)

    def h_eps_xx(self, t, x):
        return self._coef("h", t, x, 2)

    def h_eps_t(self, t, x):
        return self._coef_t("h", t, x)

    def theta_eps(self, x):
        arr, scalar = _as_array(x)
        arr = np.atleast_1d(arr)
        d = arr - self.inv_eps
        out = np.where(arr <= self.inv_eps, arr, self.inv_eps + np.arctan(d))
        return float(out[0]) if scalar else out

    def theta_eps_x(self, x):
        arr, scalar = _as_array(x)
        arr = np.atleast_1d(arr)
        d = arr - self.inv_eps
        out = np.where(arr <= self.inv_eps, 1.0, 1.0 / (1.0 + d * d))
        return float(out[0]) if scalar else out

    def theta_eps_xx(self, x):
        arr, scalar = _as_array(x)
        arr = np.atleast_1d(arr)
        d = arr - self.inv_eps
        out = np.where(
            arr <= self.inv_eps, 0.0, -2.0 * d / (1.0 + d * d) ** 2
        )
        return float(out[0]) if scalar else out

    def discount(self, x):
        """Regularized discount coefficient theta_eps(x) + eps."""
        return self.theta_eps(x) + self.eps


def _choose_a(base: CoefficientSet, eps: float, t_grid: np.ndarray) -> float:
    """Constant a of the lower extension.

    a = 1 where the diffusion slope at eps is nonpositive; otherwise strictly
    inside (0, 2 h(t, eps) / (pi h_x(t, eps))), realized at half the upper
    bound, infimum over the time grid.
    """
    a = 1.0
    for t in np.atleast_1d(t_grid):
        slope = float(base.h_x(t, eps))
        if slope <= 0.0:
            continue
        level = float(base.h(t, eps))
        if level <= 0.0:
            raise CutoffError(f"h(t={t}, eps) = {level} <= 0; lower extension undefined")
        a = min(a, level / (math.pi * slope))
    if a <= 0.0:
        raise CutoffError("selected a is not positive")
    return a


def _certify_delta(reg: RegularizedCoefficientSet, nodes_per_region: int = 10_000) -> float:
    """Grid-scan lower bound for h_eps over (0, 10/eps] x t_grid."""
    eps, j = reg.eps, reg.inv_eps
    xs = np.concatenate(
        [
            np.linspace(eps / nodes_per_region, eps, nodes_per_region),
            np.geomspace(eps, j, nodes_per_region),
            np.linspace(j, 10.0 * j, nodes_per_region),
        ]
    )
    lo = math.inf
    for t in np.atleast_1d(reg.t_grid):
        lo = min(lo, float(np.min(reg.h_eps(t, xs))))
    return lo


def build_cutoff(
    base: CoefficientSet,
    eps: float,
    hbar_center: str = "inv_eps",
    t_grid=None,
) -> RegularizedCoefficientSet:
    """Assemble the regularized family and certify it.

    Requires the base triple with first and second spatial derivative maps.
    Raises ``CutoffError`` when the certified lower bound of h_eps is not
    positive (possible for curved diffusions under the 'inv_eps' Gaussian
    centering; see ``hbar_center``).
    """
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    if hbar_center not in ("inv_eps", "eps"):
        raise ValueError("hbar_center must be 'inv_eps' or 'eps'")
    if not base.has_derivatives():
        raise ValueError("base coefficients must supply first/second derivatives")
    t_grid = np.array([0.0]) if t_grid is None else np.atleast_1d(np.asarray(t_grid, dtype=float))
    a_const = _choose_a(base, eps, t_grid)
    reg = RegularizedCoefficientSet(
        base=base, eps=eps, a_const=a_const, delta_eps=math.nan,
        hbar_center=hbar_center, t_grid=t_grid,
    )
    delta = _certify_delta(reg)
    if not (delta > 0.0):
        raise CutoffError(
            f"h_eps grid minimum {delta:.3e} is not positive "
            f"(hbar_center='{hbar_center}')"
        )
    object.__setattr__(reg, "delta_eps", delta)
    return reg


# -- coefficients of the linearized operator pair ---------------------------

@dataclass(frozen=True)
class ABValues:
    """a = h_eps^2 * sigma / 2 and b = (g_eps*sigma + f_eps) z - (theta_eps + eps) y
    together with their partial derivatives."""

    a_val: float
    b_val: float
    a_x: float
    a_xx: float
    a_t: float
    b_x: float
    b_xx: float
    b_y: float
    b_z: float
    b_xy: float
    b_xz: float
    b_t: float
    b_yy: float = 0.0
    b_zz: float = 0.0
    b_yz: float = 0.0


def eval_ab(
    reg: RegularizedCoefficientSet, sigma: float, t: float, x: float,
    y: float, z: float,
) -> ABValues:
    """Evaluate the diffusion/drift pair of the linearized equations at one point.

    ``sigma`` is a variance level and must lie inside the band of the
    consuming generator; the caller enforces that contract.
    """
    h = reg.h_eps(t, x)
    h_x = reg.h_eps_x(t, x)
    h_xx = reg.h_eps_xx(t, x)
    h_t = reg.h_eps_t(t, x)
    f = reg.f_eps(t, x)
    f_x = reg.f_eps_x(t, x)
    f_xx = reg.f_eps_xx(t, x)
    f_t = reg.f_eps_t(t, x)
    g = reg.g_eps(t, x)
    g_x = reg.g_eps_x(t, x)
    g_xx = reg.g_eps_xx(t, x)
    g_t = reg.g_eps_t(t, x)
    th = reg.theta_eps(x)
    th_x = reg.theta_eps_x(x)
    th_xx = reg.theta_eps_xx(x)

    return ABValues(
        a_val=0.5 * h * h * sigma,
        b_val=(g * sigma + f) * z - (th + reg.eps) * y,
        a_x=sigma * h * h_x,
        a_xx=sigma * (h * h_xx + h_x * h_x),
        a_t=sigma * h * h_t,
        b_x=z * (g_x * sigma + f_x) - th_x * y,
        b_xx=z * (g_xx * sigma + f_xx) - th_xx * y,
        b_y=-(th + reg.eps),
        b_z=g * sigma + f,
        b_xy=-th_x,
        b_xz=g_x * sigma + f_x,
        b_t=z * (g_t * sigma + f_t),
    )


# -- junction verification ---------------------------------------------------

@dataclass(frozen=True)
class JunctionRow:
    coefficient: str
    junction: float
    order: int
    mismatch: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.mismatch < self.tol


@dataclass(frozen=True)
class JunctionReport:
    rows: tuple[JunctionRow, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list[JunctionRow]:
        return [r for r in self.rows if not r.passed]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["coefficient", "junction", "order", "mismatch", "tol", "pass"])
            for r in self.rows:
                w.writerow(
                    [r.coefficient, f"{r.junction:.17g}", r.order,
                     f"{r.mismatch:.6e}", f"{r.tol:.1e}", r.passed]
                )


def _one_sided_value(fn, x0: float, s: float, side: int) -> float:
    """Quadratic extrapolation of fn to x0 from three strictly one-sided points."""
    v1, v2, v3 = (fn(x0 + side * k * s) for k in (3, 2, 1))
    return v1 - 3.0 * v2 + 3.0 * v3


def _one_sided_slope(fn, x0: float, s: float, side: int) -> float:
    """One-sided derivative estimate at x0 from three one-sided points."""
    v3, v2, v1 = (fn(x0 + side * k * s) for k in (3, 2, 1))
    return side * (-2.5 * v1 + 4.0 * v2 - 1.5 * v3) / s


def junction_report(
    reg: RegularizedCoefficientSet,
    tol: float,
    stencil: float = 1e-6,
    t: float = 0.0,
) -> JunctionReport:
    """One-sided finite-difference junction check of every cutoff coefficient.

    For each coefficient and junction the report estimates the left/right
    value, slope and curvature from strictly one-sided stencils and records
    the absolute mismatches.  Second derivatives are differenced from the
    closed-form first-derivative maps to keep roundoff below the tolerance.
    """
    specs = [
        ("f", lambda x: reg.f_eps(t, x), lambda x: reg.f_eps_x(t, x), [reg.inv_eps]),
        ("g", lambda x: reg.g_eps(t, x), lambda x: reg.g_eps_x(t, x), [reg.inv_eps]),
        ("h", lambda x: reg.h_eps(t, x), lambda x: reg.h_eps_x(t, x),
         [reg.eps, reg.inv_eps]),
        ("theta", reg.theta_eps, reg.theta_eps_x, [reg.inv_eps]),
    ]
    rows = []
    for name, val_fn, slope_fn, junctions in specs:
        for x0 in junctions:
            est = {}
            for side in (-1, +1):
                est[side] = (
                    _one_sided_value(val_fn, x0, stencil, side),
                    _one_sided_slope(val_fn, x0, stencil, side),
                    _one_sided_slope(slope_fn, x0, stencil, side),
                )
            for order in range(3):
                rows.append(
                    JunctionRow(
                        coefficient=name,
                        junction=x0,
                        order=order,
                        mismatch=abs(est[+1][order] - est[-1][order]),
                        tol=tol,
                    )
                )
    return JunctionReport(tuple(rows))


def boundedness_scan(
    reg: RegularizedCoefficientSet,
    t_max: float,
    n_x: int = 2000,
    n_t: int = 5,
) -> dict[str, float]:
    """Suprema of every cutoff map and its derivatives over [0, t_max] x (0, 10/eps]."""
    xs = np.concatenate(
        [
            np.linspace(reg.eps / 100.0, reg.eps, n_x // 4),
            np.geomspace(reg.eps, reg.inv_eps, n_x),
            np.linspace(reg.inv_eps, 10.0 * reg.inv_eps, n_x // 4),
        ]
    )
    ts = np.linspace(0.0, t_max, n_t)
    out: dict[str, float] = {}
    for name in ("f", "g", "h"):
        for order, suffix in ((0, ""), (1, "_x"), (2, "_xx")):
            sup = 0.0
            for t in ts:
                sup = max(sup, float(np.max(np.abs(reg._coef(name, t, xs, order)))))
            out[f"{name}_eps{suffix}"] = sup
    out["theta_eps"] = float(np.max(np.abs(reg.theta_eps(xs))))
    out["theta_eps_x"] = float(np.max(np.abs(reg.theta_eps_x(xs))))
    out["theta_eps_xx"] = float(np.max(np.abs(reg.theta_eps_xx(xs))))
    return out
