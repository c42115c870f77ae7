import math

import numpy as np
import pytest

from gfk.errors import RandomStreamExhausted
from gfk.gcore import GFunction
from gfk.gheat import IncrementLaw, solve_gheat_cdf
from gfk.paths import (
    GPath,
    cumulative_discounts,
    discount_factor,
    dothan_coeffs,
    dothan_exact_states,
    euler_gsde,
    expvasicek_states,
    expvasicek_x_coeffs,
    first_exit,
    simulate_gbm,
    simulate_gbm_batch,
    uniform_stream,
)


@pytest.fixture(scope="session")
def classical_law():
    return solve_gheat_cdf(GFunction(1.0, 1.0))


@pytest.fixture(scope="session")
def band_law():
    return solve_gheat_cdf(GFunction(0.25, 1.0))


def degenerate_law():
    # point mass at zero: the CDF ramps through a symmetric hairline cell
    h = 1e-9
    return IncrementLaw(
        np.array([-1.0, -h, h, 1.0]),
        np.array([0.0, 0.0, 1.0, 1.0]),
        GFunction(0.0, 0.0),
    )


def test_gpath_invariants_guarded():
    t = np.array([0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        GPath(t, np.array([1.0, 0.0, 0.0]), np.zeros(3))
    with pytest.raises(ValueError):
        GPath(t, np.zeros(3), np.array([0.0, 0.5, 0.2]))


def test_degenerate_stream_gives_zero_path():
    law = degenerate_law()
    times = np.linspace(0.0, 1.0, 11)
    path = simulate_gbm(law, times, refinement=4, uniforms=np.full(40, 0.5))
    assert np.all(path.b == 0.0)
    assert np.all(path.qv == 0.0)


def test_stream_exhaustion():
    law = degenerate_law()
    times = np.linspace(0.0, 1.0, 11)
    with pytest.raises(RandomStreamExhausted):
        simulate_gbm(law, times, refinement=10, uniforms=np.full(40, 0.5))


def test_classical_qv_concentrates(classical_law):
    times = np.linspace(0.0, 1.0, 26)
    b, qv = simulate_gbm_batch(classical_law, times, refinement=10, seed=101,
                               n_paths=10_000)
    assert np.all(np.diff(qv, axis=1) >= 0.0)
    assert qv[:, -1].mean() == pytest.approx(1.0, abs=0.02)


def test_batch_matches_single_path(classical_law):
    times = np.linspace(0.0, 1.0, 6)
    b, qv = simulate_gbm_batch(classical_law, times, refinement=3, seed=7,
                               n_paths=3)
    u1 = uniform_stream(7, 1, 15)
    single = simulate_gbm(classical_law, times, 3, u1)
    np.testing.assert_allclose(single.b, b[1], rtol=0, atol=1e-15)
    np.testing.assert_allclose(single.qv, qv[1], rtol=0, atol=1e-15)


def test_uniform_stream_reproducible():
    a = uniform_stream(11, 5, 100)
    b = uniform_stream(11, 5, 100)
    c = uniform_stream(11, 6, 100)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_euler_identity_cases(classical_law):
    times = np.linspace(0.0, 1.0, 21)
    path = simulate_gbm(classical_law, times, 2, uniform_stream(3, 0, 40))
    pure_noise = dothan_coeffs(1.0, 0.0, 0.0)
    # f = g = 0, h = x would not give x0 + B; build h = 1 directly
    from gfk.paths import CoefficientSet

    unit_h = CoefficientSet(
        f=lambda t, x: np.zeros_like(np.asarray(x, float)),
        g=lambda t, x: np.zeros_like(np.asarray(x, float)),
        h=lambda t, x: np.ones_like(np.asarray(x, float)),
    )
    x = euler_gsde(unit_h, path, x0=2.0)
    np.testing.assert_allclose(x, 2.0 + path.b, rtol=0, atol=1e-14)

    drift_only = CoefficientSet(
        f=lambda t, x: np.ones_like(np.asarray(x, float)),
        g=lambda t, x: np.zeros_like(np.asarray(x, float)),
        h=lambda t, x: np.zeros_like(np.asarray(x, float)),
    )
    x = euler_gsde(drift_only, path, x0=-1.0)
    np.testing.assert_allclose(x, -1.0 + path.times, rtol=0, atol=1e-14)
    assert pure_noise.positive_diffusion


def test_euler_converges_to_exact_dothan(classical_law):
    alpha, beta, gamma, x0 = 0.3, 0.8, -0.2, 3.0
    coeffs = dothan_coeffs(alpha, beta, gamma)
    errs = []
    for n in (64, 256, 1024):
        times = np.linspace(0.0, 1.0, n + 1)
        path = simulate_gbm(classical_law, times, 1, uniform_stream(19, 0, n))
        euler = euler_gsde(coeffs, path, x0)
        exact = dothan_exact_states(alpha, beta, gamma, path, x0)
        errs.append(np.max(np.abs(euler - exact)))
    assert errs[2] < errs[0]
    assert errs[2] < 0.02  # O(dt) at dt ~ 1e-3 for state ~ O(3)


def test_dothan_coeff_values():
    c = dothan_coeffs(0.3, 0.8, -0.2)
    assert c.f(0.0, 3.0) == pytest.approx(2.4)
    assert c.g(0.0, 3.0) == pytest.approx(-0.6)
    assert c.h(0.0, 3.0) == pytest.approx(0.9)
    c0 = dothan_coeffs(0.3, 0.8, 0.0)
    assert c0.f(1.0, 0.0) == 0.0 and c0.g(1.0, 0.0) == 0.0 and c0.h(1.0, 0.0) == 0.0
    xs = np.linspace(0.1, 5.0, 7)
    np.testing.assert_array_equal(c.h_x(0.5, xs), np.full(7, 0.3))
    with pytest.raises(ValueError):
        dothan_coeffs(0.0, 0.8, 0.0)


def test_dothan_exact_positive(band_law):
    times = np.linspace(0.0, 1.0, 61)
    b, qv = simulate_gbm_batch(band_law, times, refinement=10, seed=23,
                               n_paths=500)
    x = dothan_exact_states(0.3, 0.8, -0.2, x0=3.0, times=times, b=b, qv=qv)
    assert np.all(x > 0.0)


def test_expvasicek_fixed_point(classical_law):
    times = np.linspace(0.0, 1.0, 41)
    path = simulate_gbm(classical_law, times, 2, uniform_stream(5, 0, 80))
    theta = 0.2
    x = expvasicek_states(0.3, theta, 0.0, 0.0, 0.0, path, y0=theta)
    np.testing.assert_allclose(x, math.exp(theta) * np.ones_like(x), rtol=0,
                               atol=1e-14)


def test_expvasicek_pure_noise(classical_law):
    times = np.linspace(0.0, 1.0, 41)
    path = simulate_gbm(classical_law, times, 2, uniform_stream(6, 0, 80))
    x = expvasicek_states(0.0, 0.0, 0.0, 0.0, 1.0, path, y0=0.5)
    np.testing.assert_allclose(x, np.exp(0.5 + path.b), rtol=1e-14)


def test_expvasicek_positive_under_paper_parameters(band_law):
    times = np.linspace(0.0, 1.0, 61)
    b, qv = simulate_gbm_batch(band_law, times, refinement=10, seed=37,
                               n_paths=300)
    x = expvasicek_states(0.3, 0.2, 0.3, 0.2, 0.3, y0=math.log(0.2),
                          times=times, b=b, qv=qv)
    assert np.all(x > 0.0)


def test_expvasicek_x_coeff_values():
    k, theta, kt, tt, alpha = 0.3, 0.2, 0.4, -0.1, 0.3
    c = expvasicek_x_coeffs(k, theta, kt, tt, alpha)
    assert c.f(0.0, 1.0) == pytest.approx(k * theta)
    assert c.g(0.0, 1.0) == pytest.approx(kt * tt + 0.5 * alpha**2)
    assert c.h(0.0, 1.0) == pytest.approx(alpha)
    assert c.f(0.0, math.exp(theta)) == pytest.approx(0.0, abs=1e-15)
    # frozen scalar arithmetic: 0.2*0.3*(0.2 - log 0.2)
    assert c.f(0.0, 0.2) == pytest.approx(0.1085664, abs=1e-6)
    with pytest.raises(ValueError):
        c.f(0.0, -1.0)
    with pytest.raises(ValueError):
        c.h(0.0, 0.0)


def test_first_exit_cases():
    times = np.linspace(0.0, 1.0, 3)
    assert first_exit(np.array([1.0, 1.0, 1.0]), times, 0.5) == 2
    assert first_exit(np.array([1.0, 3.0, 1.0]), times, 0.5) == 1
    with pytest.raises(ValueError):
        first_exit(np.array([1.0]), times, 1.5)


def test_exit_fraction_decreases_with_eps(band_law):
    times = np.linspace(0.0, 1.0, 41)
    b, qv = simulate_gbm_batch(band_law, times, refinement=5, seed=77,
                               n_paths=2000)
    x = dothan_exact_states(1.5, 0.8, -0.2, x0=3.0, times=times, b=b, qv=qv)
    fractions = []
    indices = {}
    for eps in (0.5, 0.2, 0.05):
        idx = np.array([first_exit(row, times, eps) for row in x])
        fractions.append(np.mean(idx < times.size - 1))
        indices[eps] = idx
    assert fractions[0] >= fractions[1] >= fractions[2]
    # widening the corridor never yields an earlier exit on the same path
    assert np.all(indices[0.05] >= indices[0.5])


def test_discount_constant_exact():
    times = np.linspace(0.0, 2.0, 9)
    x = np.full(9, 1.5)
    val = discount_factor(x, times, 8, eps=0.25)
    assert val == pytest.approx(math.exp(-(1.5 + 0.25) * 2.0), rel=1e-14)
    assert discount_factor(np.zeros(9), times, 8, eps=0.0) == 1.0


def test_discount_trapezoid_second_order():
    # trapezoid error vs a 10x finer Riemann reference shrinks ~4x per halving
    def run(n):
        t = np.linspace(0.0, 1.0, n + 1)
        x = np.exp(t)
        coarse = -math.log(discount_factor(x, t, n, 0.0))
        tf = np.linspace(0.0, 1.0, 10 * n + 1)
        fine = np.trapezoid(np.exp(tf), tf)
        return abs(coarse - fine)

    e1, e2 = run(16), run(32)
    assert 2.5 <= e1 / e2 <= 6.0


def test_cumulative_discounts_match_scalar():
    times = np.linspace(0.0, 1.0, 11)
    x = np.exp(times)
    cum = cumulative_discounts(x, times, eps=0.1)
    for k in (0, 4, 10):
        assert cum[k] == pytest.approx(discount_factor(x, times, k, 0.1), rel=1e-14)
