import math

import numpy as np
import pytest

from gfk.cutoff import (
    boundedness_scan,
    build_cutoff,
    eval_ab,
    junction_report,
)
from gfk.errors import CutoffError
from gfk.paths import CoefficientSet, dothan_coeffs, expvasicek_x_coeffs

from oracles import central_diff

DOTHAN = dothan_coeffs(0.3, 0.8, -0.2)
EXPVAS = expvasicek_x_coeffs(0.3, 0.2, 0.3, 0.2, 0.3)


def curved_h_coeffs(scale=0.5):
    """Synthetic model with a genuinely curved diffusion (h_xx != 0)."""
    z = lambda t, x: np.zeros_like(np.asarray(x, float))
    return CoefficientSet(
        f=lambda t, x: 0.1 * np.asarray(x, float),
        g=lambda t, x: -0.05 * np.asarray(x, float),
        h=lambda t, x: 0.2 + scale * np.asarray(x, float) ** 2,
        f_x=lambda t, x: np.full_like(np.asarray(x, float), 0.1),
        g_x=lambda t, x: np.full_like(np.asarray(x, float), -0.05),
        h_x=lambda t, x: 2.0 * scale * np.asarray(x, float),
        f_xx=z,
        g_xx=z,
        h_xx=lambda t, x: np.full_like(np.asarray(x, float), 2.0 * scale),
        f_t=z, g_t=z, h_t=z,
        positive_diffusion=True,
        name="curved",
    )


def test_agreement_regions_exact():
    eps = 0.1
    reg = build_cutoff(DOTHAN, eps)
    xs = np.linspace(eps, 1.0 / eps, 57)
    np.testing.assert_array_equal(reg.f_eps(0.3, xs), DOTHAN.f(0.3, xs))
    np.testing.assert_array_equal(reg.g_eps(0.3, xs), DOTHAN.g(0.3, xs))
    np.testing.assert_array_equal(reg.h_eps(0.3, xs), DOTHAN.h(0.3, xs))
    # f, g agree below eps as well (only h switches branch there)
    low = np.linspace(0.01, eps, 9)
    np.testing.assert_array_equal(reg.f_eps(0.0, low), DOTHAN.f(0.0, low))
    # junction values coincide by the boundary case of the piecewise definition
    j = reg.inv_eps
    assert reg.f_eps(0.0, j) == DOTHAN.f(0.0, j)
    assert reg.h_eps(0.0, j) == DOTHAN.h(0.0, j)
    assert reg.h_eps(0.0, eps) == DOTHAN.h(0.0, eps)


def test_theta_values():
    reg = build_cutoff(DOTHAN, 0.5)
    assert reg.theta_eps(2.0) == 2.0
    assert reg.theta_eps(3.0) == pytest.approx(2.0 + math.atan(1.0))
    assert reg.theta_eps(0.7) == 0.7
    # global bound 1/eps + pi/2
    xs = np.geomspace(1e-3, 1e6, 301)
    assert np.all(reg.theta_eps(xs) <= 2.0 + math.pi / 2.0 + 1e-15)
    # identity below the bend
    below = xs[xs <= 2.0]
    np.testing.assert_array_equal(reg.theta_eps(below), below)


def test_a_rule_dothan():
    # h = alpha*x has positive slope: a strictly inside (0, 2 eps / pi)
    for eps in (0.5, 0.1, 0.01):
        reg = build_cutoff(DOTHAN, eps)
        assert 0.0 < reg.a_const < 2.0 * eps / math.pi
        assert reg.a_const == pytest.approx(eps / math.pi)


def test_a_rule_nonpositive_slope():
    z = lambda t, x: np.zeros_like(np.asarray(x, float))
    falling = CoefficientSet(
        f=z, g=z,
        h=lambda t, x: 2.0 * np.exp(-np.asarray(x, float)),
        f_x=z, g_x=z,
        h_x=lambda t, x: -2.0 * np.exp(-np.asarray(x, float)),
        f_xx=z, g_xx=z,
        h_xx=lambda t, x: 2.0 * np.exp(-np.asarray(x, float)),
        f_t=z, g_t=z, h_t=z,
    )
    assert build_cutoff(falling, 0.1).a_const == 1.0


def test_requires_eps_in_unit_interval():
    with pytest.raises(ValueError):
        build_cutoff(DOTHAN, 1.5)
    with pytest.raises(ValueError):
        build_cutoff(DOTHAN, 0.0)


def test_requires_derivative_maps():
    bare = CoefficientSet(
        f=lambda t, x: np.asarray(x, float),
        g=lambda t, x: np.asarray(x, float),
        h=lambda t, x: np.asarray(x, float),
    )
    with pytest.raises(ValueError):
        build_cutoff(bare, 0.1)


def test_h_lower_bound_certificate():
    for eps in (0.5, 0.1, 0.01):
        reg = build_cutoff(DOTHAN, eps)
        assert reg.delta_eps > 0.0
        # spot-check the scan: dense sample below eps stays above delta_eps
        xs = np.linspace(eps * 1e-4, 10.0 / eps, 4001)
        assert float(np.min(reg.h_eps(0.0, xs))) >= reg.delta_eps - 1e-15


@pytest.mark.parametrize("eps", [0.5, 0.1, 0.01])
@pytest.mark.parametrize("base", [DOTHAN, EXPVAS], ids=["dothan", "expvasicek"])
def test_junction_report_passes(base, eps):
    reg = build_cutoff(base, eps)
    report = junction_report(reg, tol=1e-4, stencil=1e-6)
    assert report.passed, report.failures()


def test_junction_report_negative_control():
    # corrupting the tail constant must be caught and attributed to h
    reg = build_cutoff(DOTHAN, 0.1)
    broken = build_cutoff(DOTHAN, 0.1)
    object.__setattr__(
        broken, "_hbar",
        lambda t, x, order: reg._hbar(t, x, order) + (0.05 if order == 0 else 0.0),
    )
    report = junction_report(broken, tol=1e-4)
    assert not report.passed
    assert {r.coefficient for r in report.failures()} == {"h"}


def test_junction_report_csv(tmp_path):
    reg = build_cutoff(DOTHAN, 0.1)
    report = junction_report(reg, tol=1e-4)
    p = tmp_path / "junctions.csv"
    report.to_csv(p)
    header = p.read_text().splitlines()[0]
    assert header == "coefficient,junction,order,mismatch,tol,pass"
    assert len(p.read_text().splitlines()) == 1 + len(report.rows)


def test_hbar_centering_moot_for_linear_h():
    # both Gaussian centerings coincide when h_xx = 0
    a = build_cutoff(DOTHAN, 0.1, hbar_center="inv_eps")
    b = build_cutoff(DOTHAN, 0.1, hbar_center="eps")
    xs = np.linspace(1e-4, 0.1, 50)
    np.testing.assert_array_equal(a.h_eps(0.0, xs), b.h_eps(0.0, xs))


def test_hbar_centering_matters_for_curved_h():
    base = curved_h_coeffs()
    ok = build_cutoff(base, 0.2, hbar_center="eps")
    assert junction_report(ok, tol=1e-4).passed
    # the printed centering leaves a value jump of size |h_xx(eps)| at eps
    printed = build_cutoff(base, 0.2, hbar_center="inv_eps")
    rep = junction_report(printed, tol=1e-4)
    fails = [r for r in rep.failures() if r.coefficient == "h" and r.junction == 0.2]
    assert fails and fails[0].order == 0
    assert fails[0].mismatch == pytest.approx(abs(base.h_xx(0.0, 0.2)), rel=1e-3)


def test_cutoff_error_when_certificate_fails():
    # with h_xx(eps) < -h(eps) the 'inv_eps' Gaussian centering saturates to 1
    # below eps and drives the lower extension negative; the 'eps' centering
    # keeps the term O(eps^2) there and survives
    z = lambda t, x: np.zeros_like(np.asarray(x, float))
    bump = CoefficientSet(
        f=z, g=z,
        h=lambda t, x: 0.01 + 0.5 * np.exp(-((np.asarray(x, float) - 0.2) ** 2)),
        f_x=z, g_x=z,
        h_x=lambda t, x: -(np.asarray(x, float) - 0.2)
        * np.exp(-((np.asarray(x, float) - 0.2) ** 2)),
        f_xx=z, g_xx=z,
        h_xx=lambda t, x: (2.0 * (np.asarray(x, float) - 0.2) ** 2 - 1.0)
        * np.exp(-((np.asarray(x, float) - 0.2) ** 2)),
        f_t=z, g_t=z, h_t=z,
    )
    with pytest.raises(CutoffError):
        build_cutoff(bump, 0.2, hbar_center="inv_eps")
    assert build_cutoff(bump, 0.2, hbar_center="eps").delta_eps > 0.0


def test_eval_ab_bilinear_zero():
    reg = build_cutoff(DOTHAN, 0.1)
    ab = eval_ab(reg, 0.7, 0.3, 2.0, 0.0, 0.0)
    assert ab.b_val == 0.0


def test_eval_ab_vanishing_second_partials():
    reg = build_cutoff(EXPVAS, 0.1)
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.uniform(0.2, 5.0)
        ab = eval_ab(reg, rng.uniform(0.25, 1.0), rng.uniform(0, 1), x,
                     rng.normal(), rng.normal())
        assert ab.b_yy == 0.0 and ab.b_zz == 0.0 and ab.b_yz == 0.0


@pytest.mark.parametrize("base", [DOTHAN, EXPVAS], ids=["dothan", "expvasicek"])
def test_eval_ab_partials_match_finite_differences(base):
    eps = 0.05
    reg = build_cutoff(base, eps)
    rng = np.random.default_rng(11)
    sigma_lo, sigma_hi = 0.25, 1.0
    n_checked = 0
    for _ in range(1000):
        sigma = rng.uniform(sigma_lo, sigma_hi)
        t = rng.uniform(0.0, 1.0)
        # sample log-uniformly across all three branches, away from junctions
        x = float(np.exp(rng.uniform(np.log(eps * 1e-2), np.log(3.0 / eps))))
        if min(abs(x - eps), abs(x - 1.0 / eps)) < 1e-3 * x:
            continue
        y, z = rng.normal(), rng.normal()
        ab = eval_ab(reg, sigma, t, x, y, z)
        sx = 1e-5 * max(x, 1e-3)

        def rel_ok(claimed, fd):
            # 1e-6 relative with a magnitude floor; relative error is
            # ill-posed where the derivative crosses zero
            return abs(claimed - fd) <= 1e-6 * max(abs(claimed), abs(fd), 1e-3)

        a_of_x = lambda v: eval_ab(reg, sigma, t, v, y, z).a_val
        b_of_x = lambda v: eval_ab(reg, sigma, t, v, y, z).b_val
        assert rel_ok(ab.a_x, central_diff(a_of_x, x, sx))
        assert rel_ok(ab.b_x, central_diff(b_of_x, x, sx))
        # second partials difference the closed-form first derivatives
        ax_of_x = lambda v: eval_ab(reg, sigma, t, v, y, z).a_x
        bx_of_x = lambda v: eval_ab(reg, sigma, t, v, y, z).b_x
        assert rel_ok(ab.a_xx, central_diff(ax_of_x, x, sx))
        assert rel_ok(ab.b_xx, central_diff(bx_of_x, x, sx))
        # exactly linear in y and z, so wide stencils are exact and avoid
        # cancellation against the unrelated terms
        b_of_y = lambda v: eval_ab(reg, sigma, t, x, v, z).b_val
        b_of_z = lambda v: eval_ab(reg, sigma, t, x, y, v).b_val
        assert rel_ok(ab.b_y, central_diff(b_of_y, y, 0.5))
        assert rel_ok(ab.b_z, central_diff(b_of_z, z, 0.5))
        bx_of_y = lambda v: eval_ab(reg, sigma, t, x, v, z).b_x
        bx_of_z = lambda v: eval_ab(reg, sigma, t, x, y, v).b_x
        assert rel_ok(ab.b_xy, central_diff(bx_of_y, y, 0.5))
        assert rel_ok(ab.b_xz, central_diff(bx_of_z, z, 0.5))
        n_checked += 1
    assert n_checked > 900


def test_eval_ab_discount_includes_eps():
    # d/dy of b is -(theta_eps(x) + eps), not -theta_eps(x)
    reg = build_cutoff(DOTHAN, 0.25)
    ab = eval_ab(reg, 1.0, 0.0, 1.0, 0.7, -0.2)
    assert ab.b_y == pytest.approx(-(1.0 + 0.25))


def test_boundedness_scan_finite():
    reg = build_cutoff(EXPVAS, 0.1)
    sup = boundedness_scan(reg, t_max=1.0)
    assert all(np.isfinite(v) for v in sup.values())
    assert sup["theta_eps"] <= reg.inv_eps + math.pi / 2.0 + 1e-12
    assert sup["theta_eps_x"] <= 1.0 + 1e-15
