"""Explicit backward solver for the fully nonlinear discounted equation.

The equation marched from the terminal level down to t = 0 is

    u_t + 2G(u_x g + u_xx h^2 / 2) + f u_x - d(x) u = 0,

where 2G is the support function of the variance band (sup mode) or its
concave mirror (inf mode) and d is the discount coefficient.  Space is a
uniform grid; u_x is central-differenced, u_xx is the 3-point second
difference.  Two boundary treatments exist:

* ``shrinking``: no boundary data is invented; the trustworthy region loses
  one node per side per step.  This is only viable when the step count is
  small relative to the node count.
* ``dirichlet``: supplied boundary values are imposed each level.  Production
  table runs use this with payoff-frozen boundaries on domains chosen so the
  boundary influence at the query point is negligible.

``cfl_max_dt`` gives the heuristic stability bound; solves default to 80%
of it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .cutoff import RegularizedCoefficientSet
from .errors import StabilityError, ValidRegionError
from .gcore import GFunction
from .paths import CoefficientSet

__all__ = [
    "PdeGrid",
    "PdeSolution",
    "cfl_max_dt",
    "solve_backward",
    "duality_check",
    "dirichlet_frozen",
]

Coefficients = Union[CoefficientSet, RegularizedCoefficientSet]


@dataclass(frozen=True)
class PdeGrid:
    """Spatial step and (optional) time step; dt = None means 0.8 * CFL bound."""

    dx: float
    dt: float | None = None


def _coefficient_maps(coeffs: Coefficients, discount):
    """Resolve (f, g, h, d) callables for the selected discount.

    discount: "regularized" (theta_eps + eps, needs a regularized set),
    "raw" (d(x) = x), or ("constant", r) / a float for a flat test rate.
    """
    if isinstance(coeffs, RegularizedCoefficientSet):
        f, g, h = coeffs.f_eps, coeffs.g_eps, coeffs.h_eps
    else:
        f, g, h = coeffs.f, coeffs.g, coeffs.h

    if discount == "regularized":
        if not isinstance(coeffs, RegularizedCoefficientSet):
            raise ValueError("regularized discount needs a RegularizedCoefficientSet")
        d = lambda x: coeffs.discount(x)
        label = f"regularized(eps={coeffs.eps:g})"
    elif discount == "raw":
        d = lambda x: np.asarray(x, dtype=float)
        label = "raw"
    else:
        if isinstance(discount, tuple) and discount[0] == "constant":
            rate = float(discount[1])
        else:
            rate = float(discount)
        d = lambda x, r=rate: np.full_like(np.asarray(x, dtype=float), r)
        label = f"constant({rate:g})"
    return f, g, h, d, label


def cfl_max_dt(
    coeffs: Coefficients,
    gf: GFunction,
    domain: tuple[float, float],
    dx: float,
    discount="raw",
    t: float = 0.0,
) -> float:
    """Heuristic explicit-step bound dx^2 / (shi*H^2 + dx*Fmax + dx^2*Dmax).

    H is the grid supremum of |h|, Fmax the worst advection speed
    max(|f + slo*g|, |f + shi*g|), Dmax the largest discount coefficient.
    Always at most the pure-diffusion bound dx^2 / (shi * H^2).
    """
    f, g, h, d, _ = _coefficient_maps(coeffs, discount)
    x_lo, x_hi = domain
    xs = _build_grid(x_lo, x_hi, dx)
    fv = np.asarray(f(t, xs), dtype=float)
    gv = np.asarray(g(t, xs), dtype=float)
    hv = np.asarray(h(t, xs), dtype=float)
    dv = np.asarray(d(xs), dtype=float)
    h_sup = float(np.max(np.abs(hv)))
    f_sup = float(
        np.max(
            np.maximum(
                np.abs(fv + gf.sigma_lo_sq * gv), np.abs(fv + gf.sigma_hi_sq * gv)
            )
        )
    )
    d_sup = float(np.max(np.abs(dv)))
    denom = gf.sigma_hi_sq * h_sup * h_sup + dx * f_sup + dx * dx * d_sup
    if denom <= 0.0:
        return math.inf
    return dx * dx / denom


def _build_grid(x_lo: float, x_hi: float, dx: float) -> np.ndarray:
    n_cells = int(round((x_hi - x_lo) / dx))
    if n_cells < 2 or abs(x_lo + n_cells * dx - x_hi) > 1e-9 * max(1.0, abs(x_hi)):
        raise ValueError(f"dx = {dx} does not tile [{x_lo}, {x_hi}]")
    return x_lo + dx * np.arange(n_cells + 1)


@dataclass
class PdeSolution:
    """Backward solve on a space-time grid with validity metadata.

    ``times`` runs from T down to 0 (stored levels).  ``valid_lo``/``valid_hi``
    give, per stored level, the index window that never saw boundary data in
    shrinking mode (the full window under Dirichlet data).
    """

    times: np.ndarray
    xs: np.ndarray
    u: np.ndarray
    valid_lo: np.ndarray
    valid_hi: np.ndarray
    mode: str
    discount: str
    m0: float
    level_max_abs: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dx(self) -> float:
        return float(self.xs[1] - self.xs[0])

    def value_at_start(self, x: float) -> float:
        return self.evaluate(float(self.times[-1]), x)

    def _bracket(self, t: float) -> tuple[int, int, float]:
        asc = self.times[::-1]
        tol = 1e-12 * max(1.0, abs(float(asc[-1])))
        if t < asc[0] - tol or t > asc[-1] + tol:
            raise ValidRegionError(f"t = {t} outside [{asc[0]}, {asc[-1]}]")
        t = min(max(t, float(asc[0])), float(asc[-1]))
        k = int(np.searchsorted(asc, t, side="right")) - 1
        k = min(max(k, 0), asc.size - 2)
        t0, t1 = float(asc[k]), float(asc[k + 1])
        w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        n = self.times.size - 1
        return n - k, n - k - 1, w  # indices into descending storage

    def _level_value(self, level: int, x, strict: bool):
        xs = self.xs
        lo, hi = int(self.valid_lo[level]), int(self.valid_hi[level])
        x = np.asarray(x, dtype=float)
        inside = (x >= xs[lo] - 1e-12) & (x <= xs[hi] + 1e-12)
        if strict and not np.all(inside):
            bad = float(np.atleast_1d(x)[~np.atleast_1d(inside)][0])
            raise ValidRegionError(
                f"x = {bad} outside valid region [{xs[lo]}, {xs[hi]}]"
            )
        xc = np.clip(x, xs[lo], xs[hi])
        jf = (xc - xs[0]) / self.dx
        snap = np.abs(jf - np.rint(jf)) < 1e-9
        j = np.where(snap, np.rint(jf), np.floor(jf)).astype(int)
        j = np.clip(j, lo, hi - 1)
        # snapped queries get an exact 0/1 weight so grid nodes return stored values
        w = np.where(snap, np.rint(jf) - j, jf - j)
        vals = (1.0 - w) * self.u[level, j] + w * self.u[level, j + 1]
        return vals, inside

    def evaluate(self, t: float, x: float) -> float:
        """Bilinear interpolation; raises ValidRegionError outside coverage."""
        la, lb, w = self._bracket(t)
        va, _ = self._level_value(la, x, strict=True)
        vb, _ = self._level_value(lb, x, strict=True)
        return float((1.0 - w) * va + w * vb)

    def evaluate_many(self, t: float, x: np.ndarray, strict: bool = True):
        """Vectorized evaluate at one time; returns (values, inside_mask)."""
        la, lb, w = self._bracket(t)
        va, ia = self._level_value(la, x, strict=strict)
        vb, ib = self._level_value(lb, x, strict=strict)
        return (1.0 - w) * va + w * vb, ia & ib

    def max_abs(self) -> float:
        return float(np.max(self.level_max_abs))

    def write_csv(self, path) -> None:
        """Dump the stored field as t,x,u,valid with the config as a header comment."""
        import json

        cfg = dict(self.meta, mode=self.mode, discount=self.discount, m0=self.m0)
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(cfg, default=str) + "\n")
            fh.write("t,x,u,valid\n")
            for lvl, t in enumerate(self.times):
                lo, hi = int(self.valid_lo[lvl]), int(self.valid_hi[lvl])
                for j, x in enumerate(self.xs):
                    fh.write(
                        f"{t:.12g},{x:.12g},{self.u[lvl, j]:.12g},"
                        f"{str(lo <= j <= hi)}\n"
                    )


def dirichlet_frozen(terminal: Callable, domain: tuple[float, float]):
    """Boundary pair holding the terminal values fixed at both edges."""
    lo_val = float(np.asarray(terminal(np.asarray([domain[0]]))).item())
    hi_val = float(np.asarray(terminal(np.asarray([domain[1]]))).item())
    return (lo_val, hi_val)


def solve_backward(
    coeffs: Coefficients,
    gf: GFunction,
    terminal: Callable,
    domain: tuple[float, float],
    grid: PdeGrid,
    mode: str = "sup",
    discount="regularized",
    boundary="shrinking",
    horizon: float = 1.0,
    store_levels: int = 801,
    collect_level_max: bool = True,
    upwind: bool = False,
) -> PdeSolution:
    """March the discounted nonlinear equation from t = horizon down to 0.

    ``terminal`` maps a node array to payoff values.  ``boundary`` is
    "shrinking" or ("dirichlet", (left, right)) with floats or callables of t.
    ``upwind`` switches the drift term f u_x to one-sided differences for
    stiff advection; reference runs keep it off (central).
    Raises ``StabilityError`` when dt exceeds the heuristic bound and
    ``ValueError`` when the shrinking region empties before t = 0.
    """
    if mode not in ("sup", "inf"):
        raise ValueError("mode must be 'sup' or 'inf'")
    f, g, h, d, discount_label = _coefficient_maps(coeffs, discount)
    xs = _build_grid(*domain, grid.dx)
    nx = xs.size
    dx = grid.dx

    bound = cfl_max_dt(coeffs, gf, domain, dx, discount=discount)
    dt_req = 0.8 * bound if grid.dt is None else grid.dt
    if dt_req > bound * (1.0 + 1e-9):
        raise StabilityError(f"dt = {dt_req:g} exceeds the stability bound {bound:g}")
    n_steps = max(1, int(math.ceil(horizon / dt_req - 1e-12)))
    stride = max(1, int(math.ceil(n_steps / max(1, store_levels - 1))))
    n_steps = stride * int(math.ceil(n_steps / stride))
    dt = horizon / n_steps

    u = np.asarray(terminal(xs), dtype=float)
    if u.shape != xs.shape or not np.all(np.isfinite(u)):
        raise ValueError("terminal data must be finite on the grid")
    m0 = float(np.max(np.abs(u)))

    shrink = boundary == "shrinking"
    if shrink:
        bc = None
    else:
        kind, bc = boundary
        if kind != "dirichlet":
            raise ValueError(f"unknown boundary treatment {boundary!r}")

    def bc_value(side: int, t: float) -> float:
        v = bc[side]
        return float(v(t)) if callable(v) else float(v)

    # autonomous coefficient maps are evaluated once on the grid
    time_dep = getattr(coeffs, "time_dependent", False) or getattr(
        getattr(coeffs, "base", None), "time_dependent", False
    )

    def maps_at(t: float):
        return (
            np.asarray(f(t, xs), dtype=float),
            np.asarray(g(t, xs), dtype=float),
            np.asarray(h(t, xs), dtype=float) ** 2,
            np.asarray(d(xs), dtype=float),
        )

    fv, gv, h2v, dv = maps_at(horizon)

    shi, slo = gf.sigma_hi_sq, gf.sigma_lo_sq
    inv_2dx = 0.5 / dx
    inv_dx2 = 1.0 / (dx * dx)

    n_stored = n_steps // stride + 1
    stored = np.empty((n_stored, nx))
    stored[0] = u
    times = np.empty(n_stored)
    times[0] = horizon
    valid_lo = np.zeros(n_stored, dtype=int)
    valid_hi = np.full(n_stored, nx - 1, dtype=int)
    level_max = np.empty(n_steps + 1) if collect_level_max else None
    if collect_level_max:
        level_max[0] = m0

    lo, hi = 0, nx - 1
    store_idx = 0
    for step in range(1, n_steps + 1):
        t_new = horizon - step * dt
        if time_dep:
            fv, gv, h2v, dv = maps_at(t_new + dt)
        if shrink:
            lo += 1
            hi -= 1
            if hi - lo < 0:
                raise ValueError(
                    f"valid region emptied at step {step}/{n_steps}; "
                    "domain too small for the horizon at this dx/dt"
                )
        a, b_ = (lo, hi) if shrink else (1, nx - 2)
        um = u[a - 1:b_]
        uc = u[a:b_ + 1]
        up = u[a + 1:b_ + 2]
        ux = (up - um) * inv_2dx
        uxx = (up - 2.0 * uc + um) * inv_dx2
        q = gv[a:b_ + 1] * ux + 0.5 * h2v[a:b_ + 1] * uxx
        if mode == "sup":
            nonlin = np.where(q >= 0.0, shi * q, slo * q)
        else:
            nonlin = np.where(q >= 0.0, slo * q, shi * q)
        fw = fv[a:b_ + 1]
        if upwind:
            ux_adv = np.where(fw >= 0.0, (up - uc) / dx, (uc - um) / dx)
        else:
            ux_adv = ux
        unew = uc + dt * (nonlin + fw * ux_adv - dv[a:b_ + 1] * uc)
        u[a:b_ + 1] = unew
        if not shrink:
            u[0] = bc_value(0, t_new)
            u[-1] = bc_value(1, t_new)
        if not np.all(np.isfinite(unew)):
            raise FloatingPointError(f"non-finite field at step {step}")
        if collect_level_max:
            level_max[step] = float(np.max(np.abs(u[lo:hi + 1])))
        if step % stride == 0:
            store_idx += 1
            stored[store_idx] = u
            times[store_idx] = t_new
            valid_lo[store_idx] = lo
            valid_hi[store_idx] = hi

    times[-1] = 0.0  # kill roundoff on the final level
    return PdeSolution(
        times=times,
        xs=xs,
        u=stored,
        valid_lo=valid_lo,
        valid_hi=valid_hi,
        mode=mode,
        discount=discount_label,
        m0=m0,
        level_max_abs=level_max if collect_level_max else np.array([m0]),
        meta={
            "dx": dx,
            "dt": dt,
            "n_steps": n_steps,
            "stride": stride,
            "domain": tuple(domain),
            "horizon": horizon,
            "boundary": "shrinking" if shrink else "dirichlet",
            "cfl_bound": bound,
        },
    )


def duality_check(
    coeffs: Coefficients,
    gf: GFunction,
    terminal: Callable,
    domain: tuple[float, float],
    grid: PdeGrid,
    discount="regularized",
    boundary="shrinking",
    horizon: float = 1.0,
) -> float:
    """max |u_sup[phi] + u_inf[-phi]| over the common valid region.

    The two updates are exact floating-point mirrors, so the result is zero
    up to non-associativity of the identical operations.
    """
    neg_terminal = lambda xs: -np.asarray(terminal(xs), dtype=float)
    if boundary == "shrinking":
        bnd_pos = bnd_neg = "shrinking"
    else:
        kind, (left, right) = boundary
        flip = lambda v: (lambda t: -v(t)) if callable(v) else -v
        bnd_pos = (kind, (left, right))
        bnd_neg = (kind, (flip(left), flip(right)))
    common = dict(gf=gf, domain=domain, grid=grid, discount=discount, horizon=horizon)
    sol_sup = solve_backward(coeffs, terminal=terminal, mode="sup",
                             boundary=bnd_pos, **common)
    sol_inf = solve_backward(coeffs, terminal=neg_terminal, mode="inf",
                             boundary=bnd_neg, **common)
    worst = 0.0
    for lvl in range(sol_sup.times.size):
        lo = max(sol_sup.valid_lo[lvl], sol_inf.valid_lo[lvl])
        hi = min(sol_sup.valid_hi[lvl], sol_inf.valid_hi[lvl])
        if hi < lo:
            continue
        worst = max(
            worst,
            float(np.max(np.abs(sol_sup.u[lvl, lo:hi + 1] + sol_inf.u[lvl, lo:hi + 1]))),
        )
    return worst
