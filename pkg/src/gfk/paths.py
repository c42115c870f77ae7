"""Path generation under volatility uncertainty.

G-Brownian increments are drawn by inversion from a tabulated law on a
refined sub-grid; the quadratic variation is accumulated as the sum of
squared sub-increments.  On top of that sit a generic Euler stepper for
state dynamics dX = f dt + g d<B> + h dB, the two short-rate models used
by the experiments, exit times from the corridor [eps, 1/eps], and the
discounted stopped value process.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteStateError, RandomStreamExhausted
from .gheat import IncrementLaw, sample_increment

__all__ = [
    "GPath",
    "CoefficientSet",
    "uniform_stream",
    "simulate_gbm",
    "simulate_gbm_batch",
    "euler_gsde",
    "euler_gsde_batch",
    "dothan_coeffs",
    "dothan_exact_states",
    "expvasicek_states",
    "expvasicek_y_drift",
    "expvasicek_x_coeffs",
    "first_exit",
    "discount_factor",
    "cumulative_discounts",
    "m_eps_process",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GPath:
    """One trajectory: time grid, G-Brownian values, quadratic variation."""

    times: np.ndarray
    b: np.ndarray
    qv: np.ndarray

    def __post_init__(self):
        t, b, qv = map(np.asarray, (self.times, self.b, self.qv))
        if not (t.shape == b.shape == qv.shape):
            raise ValueError("times, b, qv must share one shape")
        if not np.all(np.diff(t) > 0.0):
            raise ValueError("times must be strictly increasing")
        if b[0] != 0.0 or qv[0] != 0.0:
            raise ValueError("paths start at B_0 = 0, <B>_0 = 0")
        if np.any(np.diff(qv) < 0.0):
            raise ValueError("quadratic variation must be nondecreasing")


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficient triple (f, g, h) of dX = f dt + g d<B> + h dB.

    Maps take (t, x) and broadcast over x.  Spatial derivative maps are
    required by the cutoff construction; time derivatives may be None for
    autonomous models.
    """

    f: Callable
    g: Callable
    h: Callable
    f_x: Optional[Callable] = None
    g_x: Optional[Callable] = None
    h_x: Optional[Callable] = None
    f_xx: Optional[Callable] = None
    g_xx: Optional[Callable] = None
    h_xx: Optional[Callable] = None
    f_t: Optional[Callable] = None
    g_t: Optional[Callable] = None
    h_t: Optional[Callable] = None
    positive_diffusion: bool = False
    time_dependent: bool = False
    name: str = "custom"

    def has_derivatives(self) -> bool:
        return None not in (
            self.f_x, self.g_x, self.h_x, self.f_xx, self.g_xx, self.h_xx
        )


def uniform_stream(seed: int, path_id: int, n: int) -> np.ndarray:
    """n uniforms addressed by (seed, path_id); counter-based, reproducible."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, path_id & 0xFFFFFFFFFFFFFFFF],
                   dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.random(n)


def simulate_gbm(
    law: IncrementLaw,
    times: np.ndarray,
    refinement: int,
    uniforms: np.ndarray,
) -> GPath:
    """Simulate one G-Brownian path on `times` with a refined sub-grid.

    Each coarse step of length dt is split into `refinement` sub-steps;
    increments are sampled by inversion at scale sqrt(dt/refinement), the
    path is their running sum and the quadratic variation the running sum
    of their squares.
    """
    if refinement < 1:
        raise ValueError("refinement must be >= 1")
    times = np.asarray(times, dtype=float)
    n = times.size - 1
    u = np.asarray(uniforms, dtype=float)
    if u.size < n * refinement:
        raise RandomStreamExhausted(
            f"need {n * refinement} uniforms, stream has {u.size}"
        )
    b = np.zeros(n + 1)
    qv = np.zeros(n + 1)
    pos = 0
    for k in range(n):
        sub_dt = (times[k + 1] - times[k]) / refinement
        incs = sample_increment(law, u[pos:pos + refinement], sub_dt)
        pos += refinement
        b[k + 1] = b[k] + incs.sum()
        qv[k + 1] = qv[k] + np.square(incs).sum()
    return GPath(times, b, qv)


def simulate_gbm_batch(
    law: IncrementLaw,
    times: np.ndarray,
    refinement: int,
    seed: int,
    n_paths: int,
    path_offset: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized batch of paths; row i reproduces path_id = path_offset + i.

    Returns (B, QV) of shape (n_paths, len(times)).  Uniform times only.
    """
    times = np.asarray(times, dtype=float)
    n = times.size - 1
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-12, atol=0.0):
        raise ValueError("batch simulation requires a uniform time grid")
    sub_dt = dts[0] / refinement
    u = np.empty((n_paths, n * refinement))
    for i in range(n_paths):
        u[i] = uniform_stream(seed, path_offset + i, n * refinement)
    incs = sample_increment(law, u, sub_dt).reshape(n_paths, n, refinement)
    b = np.concatenate(
        [np.zeros((n_paths, 1)), np.cumsum(incs.sum(axis=2), axis=1)], axis=1
    )
    qv = np.concatenate(
        [np.zeros((n_paths, 1)), np.cumsum(np.square(incs).sum(axis=2), axis=1)],
        axis=1,
    )
    return b, qv


def euler_gsde(coeffs: CoefficientSet, path: GPath, x0: float) -> np.ndarray:
    """Euler scheme X_{k+1} = X_k + f dt + g d<B> + h dB along one path."""
    t, b, qv = path.times, path.b, path.qv
    x = np.empty_like(b)
    x[0] = x0
    for k in range(b.size - 1):
        xk = x[k]
        x[k + 1] = (
            xk
            + coeffs.f(t[k], xk) * (t[k + 1] - t[k])
            + coeffs.g(t[k], xk) * (qv[k + 1] - qv[k])
            + coeffs.h(t[k], xk) * (b[k + 1] - b[k])
        )
        if not np.isfinite(x[k + 1]):
            raise NonFiniteStateError(k + 1)
    if coeffs.positive_diffusion and x0 > 0.0 and x.min() <= 0.0:
        # coarse Euler steps can cross zero even when the dynamics cannot;
        # worth knowing about, not worth failing over
        log.info("Euler path of %s crossed zero (min %.3g) at this step size",
                 coeffs.name, float(x.min()))
    return x


def euler_gsde_batch(
    coeffs: CoefficientSet, times: np.ndarray, b: np.ndarray, qv: np.ndarray,
    x0: float,
) -> np.ndarray:
    """Euler stepping vectorized over paths (rows of b and qv)."""
    n_paths, n1 = b.shape
    x = np.empty((n_paths, n1))
    x[:, 0] = x0
    for k in range(n1 - 1):
        xk = x[:, k]
        x[:, k + 1] = (
            xk
            + coeffs.f(times[k], xk) * (times[k + 1] - times[k])
            + coeffs.g(times[k], xk) * (qv[:, k + 1] - qv[:, k])
            + coeffs.h(times[k], xk) * (b[:, k + 1] - b[:, k])
        )
    bad = ~np.isfinite(x[:, -1])
    if bad.any():
        raise NonFiniteStateError(int(np.argmax(bad)))
    return x


def dothan_coeffs(alpha: float, beta: float, gamma: float) -> CoefficientSet:
    """Proportional short-rate dynamics f = beta*x, g = gamma*x, h = alpha*x."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    zero = lambda t, x: np.zeros_like(np.asarray(x, dtype=float))
    return CoefficientSet(
        f=lambda t, x: beta * np.asarray(x, dtype=float),
        g=lambda t, x: gamma * np.asarray(x, dtype=float),
        h=lambda t, x: alpha * np.asarray(x, dtype=float),
        f_x=lambda t, x: np.full_like(np.asarray(x, dtype=float), beta),
        g_x=lambda t, x: np.full_like(np.asarray(x, dtype=float), gamma),
        h_x=lambda t, x: np.full_like(np.asarray(x, dtype=float), alpha),
        f_xx=zero, g_xx=zero, h_xx=zero,
        f_t=zero, g_t=zero, h_t=zero,
        positive_diffusion=True,
        name="dothan",
    )


def dothan_exact_states(
    alpha: float, beta: float, gamma: float, path: GPath | None = None,
    x0: float = 1.0, *, times=None, b=None, qv=None,
) -> np.ndarray:
    """Closed-form update X_t = x0 * exp(beta*t + alpha*B_t + (gamma - alpha^2/2)*<B>_t).

    The -alpha^2/2 correction is what makes the exponential solve
    dX = beta X dt + gamma X d<B> + alpha X dB; strictly positive pathwise.
    Accepts a GPath or raw (times, b, qv) arrays (batched rows allowed).
    """
    if path is not None:
        times, b, qv = path.times, path.b, path.qv
    drift = (gamma - 0.5 * alpha * alpha) * np.asarray(qv)
    return x0 * np.exp(beta * np.asarray(times) + alpha * np.asarray(b) + drift)


def expvasicek_y_drift(k: float, theta: float):
    return lambda t, y: k * (theta - y)


def expvasicek_states(
    k: float, theta: float, k_tilde: float, theta_tilde: float, alpha: float,
    path: GPath | None = None, y0: float = 0.0, *, times=None, b=None, qv=None,
) -> np.ndarray:
    """Exponential of the Euler path of dY = k(theta-Y)dt + k~(theta~-Y)d<B> + alpha dB."""
    if path is not None:
        times, b, qv = path.times, path.b, path.qv
    times = np.asarray(times, dtype=float)
    b = np.asarray(b, dtype=float)
    was_1d = b.ndim == 1
    b = np.atleast_2d(b)
    qv = np.atleast_2d(np.asarray(qv, dtype=float))
    n_paths, n1 = b.shape
    y = np.empty((n_paths, n1))
    y[:, 0] = y0
    for j in range(n1 - 1):
        yj = y[:, j]
        y[:, j + 1] = (
            yj
            + k * (theta - yj) * (times[j + 1] - times[j])
            + k_tilde * (theta_tilde - yj) * (qv[:, j + 1] - qv[:, j])
            + alpha * (b[:, j + 1] - b[:, j])
        )
    if not np.all(np.isfinite(y[:, -1])):
        raise NonFiniteStateError(n1 - 1)
    x = np.exp(y)
    return x[0] if was_1d else x


def expvasicek_x_coeffs(
    k: float, theta: float, k_tilde: float, theta_tilde: float, alpha: float
) -> CoefficientSet:
    """Coefficients of the state X = exp(Y) itself; defined for x > 0 only."""

    def _checked(x):
        arr = np.asarray(x, dtype=float)
        if np.any(arr <= 0.0):
            raise ValueError("exponential-Vasicek coefficients need x > 0")
        return arr

    half_a2 = 0.5 * alpha * alpha
    return CoefficientSet(
        f=lambda t, x: (lambda a: a * k * (theta - np.log(a)))(_checked(x)),
        g=lambda t, x: (lambda a: a * (k_tilde * (theta_tilde - np.log(a)) + half_a2))(
            _checked(x)
        ),
        h=lambda t, x: alpha * _checked(x),
        f_x=lambda t, x: (lambda a: k * (theta - np.log(a)) - k)(_checked(x)),
        g_x=lambda t, x: (lambda a: k_tilde * (theta_tilde - np.log(a))
                          - k_tilde + half_a2)(_checked(x)),
        h_x=lambda t, x: np.full_like(_checked(x), alpha),
        f_xx=lambda t, x: -k / _checked(x),
        g_xx=lambda t, x: -k_tilde / _checked(x),
        h_xx=lambda t, x: np.zeros_like(_checked(x)),
        f_t=lambda t, x: np.zeros_like(_checked(x)),
        g_t=lambda t, x: np.zeros_like(_checked(x)),
        h_t=lambda t, x: np.zeros_like(_checked(x)),
        positive_diffusion=True,
        name="expvasicek",
    )


def first_exit(states: np.ndarray, times: np.ndarray, eps: float) -> int:
    """Smallest index k with X_k outside [eps, 1/eps], else the last index."""
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    x = np.asarray(states, dtype=float)
    outside = (x < eps) | (x > 1.0 / eps)
    idx = np.nonzero(outside)[0]
    return int(idx[0]) if idx.size else x.size - 1


def first_exit_batch(states: np.ndarray, eps: float) -> np.ndarray:
    """Row-wise first-exit indices for a (n_paths, n+1) state array."""
    outside = (states < eps) | (states > 1.0 / eps)
    any_exit = outside.any(axis=1)
    idx = np.argmax(outside, axis=1)
    idx[~any_exit] = states.shape[1] - 1
    return idx


def discount_factor(
    states: np.ndarray, times: np.ndarray, upto_index: int, eps: float
) -> float:
    """exp(-trapezoid of (X + eps) over [0, t_upto]); exact on constants."""
    x = np.asarray(states, dtype=float)
    t = np.asarray(times, dtype=float)
    if not (0 <= upto_index < x.size):
        raise ValueError("upto_index out of range")
    integral = float(np.trapezoid(x[: upto_index + 1] + eps, t[: upto_index + 1]))
    return math.exp(-integral)


def cumulative_discounts(states: np.ndarray, times: np.ndarray, eps: float) -> np.ndarray:
    """Per-node discounts exp(-int_0^{t_k} (X + eps) ds), trapezoidal; batch-aware."""
    x = np.atleast_2d(np.asarray(states, dtype=float)) + eps
    t = np.asarray(times, dtype=float)
    seg = 0.5 * (x[:, 1:] + x[:, :-1]) * np.diff(t)[None, :]
    integ = np.concatenate(
        [np.zeros((x.shape[0], 1)), np.cumsum(seg, axis=1)], axis=1
    )
    out = np.exp(-integ)
    return out[0] if np.asarray(states).ndim == 1 else out


def m_eps_process(states, times, solution, eps: float) -> np.ndarray:
    """Discounted solution values along the stopped path.

    M_k = u(t_{k ^ k_exit}, X_{k ^ k_exit}) * exp(-int (X + eps)); the
    sequence freezes at the first exit from [eps, 1/eps].
    """
    x = np.asarray(states, dtype=float)
    t = np.asarray(times, dtype=float)
    k_exit = first_exit(x, t, eps)
    disc = cumulative_discounts(x, t, eps)
    m = np.empty_like(x)
    for k in range(x.size):
        kk = min(k, k_exit)
        m[k] = solution.evaluate(t[kk], x[kk]) * disc[kk]
    return m
