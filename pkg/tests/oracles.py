"""Independent numerical oracles used by the tests.

Deliberately avoids the library's own code paths: the normal CDF comes from
the alternating error-function series, derivatives from explicit finite
differences, and classical expectations from direct lognormal sampling.
"""
import math

import numpy as np


def erf_series(x: float, n_terms: int = 80) -> float:
    """erf via its Maclaurin series 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))."""
    total = 0.0
    term = x
    for n in range(n_terms):
        total += term / (2 * n + 1)
        term *= -x * x / (n + 1)
    return 2.0 / math.sqrt(math.pi) * total


def phi_series(z: float) -> float:
    """Standard normal CDF from the error-function series (|z| <= ~6)."""
    if z < -6.0:
        return 0.0
    if z > 6.0:
        return 1.0
    return 0.5 * (1.0 + erf_series(z / math.sqrt(2.0)))


def central_diff(fn, x: float, step: float) -> float:
    return (fn(x + step) - fn(x - step)) / (2.0 * step)


def classical_dothan_mc(
    alpha: float,
    beta: float,
    gamma: float,
    x0: float,
    strike: float,
    horizon: float,
    n_paths: int,
    n_steps: int,
    seed: int,
    discount_scale: float = 1.0,
) -> float:
    """E[(X_T - K)^+ * exp(-c * int X ds)] under a single volatility sigma = 1.

    X is sampled exactly as the lognormal x0*exp((beta+gamma-alpha^2/2) t + alpha W_t)
    (the quadratic variation equals t under one prior with unit volatility);
    the discount integral is trapezoidal on a fine grid.
    """
    rng = np.random.default_rng(seed)
    dt = horizon / n_steps
    drift = beta + gamma - 0.5 * alpha * alpha
    vals = np.empty(n_paths)
    chunk = max(1, min(n_paths, 20_000))
    done = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        dw = math.sqrt(dt) * rng.standard_normal((m, n_steps))
        w = np.concatenate([np.zeros((m, 1)), np.cumsum(dw, axis=1)], axis=1)
        t = dt * np.arange(n_steps + 1)
        x = x0 * np.exp(drift * t[None, :] + alpha * w)
        integral = np.trapezoid(x, dx=dt, axis=1)
        vals[done:done + m] = np.maximum(x[:, -1] - strike, 0.0) * np.exp(
            -discount_scale * integral
        )
        done += m
    return float(vals.mean())
