import math

import numpy as np
import pytest

from cpbalance import DegenerateRegionError, Gains, SystemParams, discretize
from cpbalance.stability import (
    closed_loop,
    default_plot_window,
    in_gray_region,
    is_stable,
    poles,
    reference_curves,
    region_raster,
    stability_region,
)

from conftest import LN2, LN3, OMEGA, params_wt


def test_zero_gain_is_open_loop(nominal):
    params, _ = nominal
    m = discretize(params)
    np.testing.assert_array_equal(closed_loop(m, Gains(0.0, 0.7)), m.a)
    q = poles(m, Gains(0.0, 0.7))
    assert q.q1.real == pytest.approx(math.exp(-0.32), abs=1e-12)
    assert q.q2.real == pytest.approx(math.exp(0.32), abs=1e-12)


def test_det_and_trace_formulas():
    rng = np.random.default_rng(0)
    for _ in range(200):
        w, tau, k, lam = rng.uniform(1, 10), rng.uniform(0, 0.5), rng.uniform(-3, 5), rng.uniform(-1, 2)
        cl = closed_loop(discretize(SystemParams(w, tau)), Gains(k, lam))
        ch, sh = math.cosh(w * tau), math.sinh(w * tau)
        assert np.linalg.det(cl) == pytest.approx(1 - k + k * ch - k * lam * w * sh, abs=1e-10)
        assert np.trace(cl) == pytest.approx(k + (2 - k) * ch - k * lam * w * sh, abs=1e-10)


def test_cp_line_poles(nominal):
    params, g = nominal
    q = poles(discretize(params), g)
    expected = sorted([math.exp(-0.32), 1 - (math.exp(0.32) - 1)])
    assert [q.q1.real, q.q2.real] == pytest.approx(expected, abs=1e-12)
    assert 1 - (math.exp(0.32) - 1) == pytest.approx(0.6229, abs=1e-4)


def test_cp_line_pole_is_exp_minus_wt_random():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        w, wt, k = rng.uniform(0.5, 10), rng.uniform(0.01, 1.5), rng.uniform(-2, 6)
        params = SystemParams(w, wt / w)
        q = poles(discretize(params), Gains.cp_line(k, w))
        assert q.real
        d = min(abs(q.q1 - math.exp(-wt)), abs(q.q2 - math.exp(-wt)))
        assert d <= 1e-10
        other = q.q2 if abs(q.q1 - math.exp(-wt)) <= 1e-10 else q.q1
        assert other.real == pytest.approx(1 - (k - 1) * math.expm1(wt), abs=1e-10)


def test_vieta_including_complex():
    rng = np.random.default_rng(2)
    saw_complex = False
    for _ in range(2000):
        w, tau, k, lam = rng.uniform(1, 10), rng.uniform(0, 0.4), rng.uniform(-3, 6), rng.uniform(-1, 2)
        cl = closed_loop(discretize(SystemParams(w, tau)), Gains(k, lam))
        q = poles(discretize(SystemParams(w, tau)), Gains(k, lam))
        saw_complex |= not q.real
        assert abs(q.q1 * q.q2 - np.linalg.det(cl)) <= 1e-10 * (1 + abs(np.linalg.det(cl)))
        assert abs(q.q1 + q.q2 - np.trace(cl)) <= 1e-10 * (1 + abs(np.trace(cl)))
        assert (q.q1.real, q.q1.imag) <= (q.q2.real, q.q2.imag)
    assert saw_complex


def test_stable_examples():
    assert is_stable(Gains.cp_line(2.0, OMEGA), params_wt(0.32))
    rep = is_stable(Gains(1.0, 0.3), params_wt(0.32))
    assert not rep and rep.plus_one_residual == pytest.approx(0.0, abs=1e-15)
    assert not is_stable(Gains.cp_line(2.0, OMEGA), params_wt(LN3 + 0.01))


def test_region_bounds_at_ln2():
    reg = stability_region(params_wt(LN2))
    assert reg.lambda_min == pytest.approx(1 / (3 * OMEGA), rel=1e-12)
    assert reg.lambda_max == pytest.approx(3 / OMEGA, rel=1e-12)
    assert reg.k_inv_min == pytest.approx(0.25 / 2.25, rel=1e-12)
    assert reg.k_inv_max == 1.0
    assert reg.lambda_min < reg.lambda_max and 0 < reg.k_inv_min < reg.k_inv_max


def test_region_degenerate_at_tau_zero():
    with pytest.raises(DegenerateRegionError):
        stability_region(SystemParams(3.2, 0.0))


def test_region_membership_agrees_with_jury_on_random_samples():
    rng = np.random.default_rng(3)
    for _ in range(10_000):
        params = params_wt(rng.uniform(0.02, 1.5))
        reg = stability_region(params)
        g = Gains(1 / rng.uniform(0.01, 1.2), rng.uniform(0.0, 1.2 * reg.lambda_max))
        if min(abs(r) for r in reg.residuals(g)) < 1e-12:
            continue
        assert reg.contains(g) == bool(is_stable(g, params))


def test_triangle_vertices_are_stable_boundary():
    params = params_wt(0.5)
    reg = stability_region(params)
    (l0, k0), (l1, k1), (l2, k2) = reg.vertices()
    # centroid of the triangle is inside
    g = Gains(3 / (k0 + k1 + k2), (l0 + l1 + l2) / 3)
    assert reg.contains(g) and is_stable(g, params)


def test_boundary_points_have_unit_pole():
    rng = np.random.default_rng(4)
    for _ in range(500):
        params = params_wt(rng.uniform(0.05, 1.2))
        reg = stability_region(params)
        m = discretize(params)
        # one point on each edge of the triangle
        lam = rng.uniform(reg.lambda_min, reg.lambda_max)
        k_edge = reg.k_lambda_max / lam
        for g in (Gains(k_edge, lam), Gains(1.0, lam), Gains(rng.uniform(1.0, reg.k_lambda_max / reg.lambda_min), reg.lambda_min)):
            rep = is_stable(g, params)
            if abs(rep.min_residual) > 1e-9:
                continue
            q = poles(m, g)
            assert min(abs(abs(q.q1) - 1), abs(abs(q.q2) - 1)) <= 1e-6


def test_gray_region_examples():
    params = params_wt(0.32)
    # (k-1)(e^wt - 1) <= 1 keeps the second pole nonnegative
    assert in_gray_region(Gains.cp_line(2.0, OMEGA), params)
    k_neg = 1 + 1.5 / math.expm1(0.32)
    assert not in_gray_region(Gains.cp_line(k_neg, OMEGA), params)
    assert not in_gray_region(Gains(1.5, 2.0), params_wt(0.1)) or is_stable(Gains(1.5, 2.0), params_wt(0.1)) is not None


def test_gray_region_needs_a_slow_pole():
    params = params_wt(0.5)
    m = discretize(params)
    rng = np.random.default_rng(5)
    for _ in range(2000):
        g = Gains(rng.uniform(0.5, 4), rng.uniform(0, 1))
        q = poles(m, g)
        expected = q.real and q.q1.real >= 0 and q.q2.real >= 0 and max(q.q1.real, q.q2.real) >= math.exp(-0.5)
        assert in_gray_region(g, params) == expected


def test_raster_and_curves():
    params = params_wt(LN2)
    (l0, l1), (k0, k1) = default_plot_window(params)
    rows = region_raster(params, np.linspace(l0, l1, 30), np.linspace(k0, k1, 20))
    assert len(rows) == 600
    assert all(r[2] in (0, 1) and r[3] in (0, 1) for r in rows)
    reg = stability_region(params)
    for lam, kinv, stable, _ in rows:
        if kinv > 0 and min(abs(r) for r in reg.residuals(Gains(1 / kinv, lam))) > 1e-9:
            assert stable == reg.contains(Gains(1 / kinv, lam))
    # order independence
    assert rows == region_raster(params, np.linspace(l0, l1, 30), np.linspace(k0, k1, 20))
    curves = reference_curves(params)
    assert curves["cp_line"][0][0] == pytest.approx(1 / OMEGA)
    m = discretize(params)
    for lam, kinv in curves["equal_poles"]:
        q = poles(m, Gains(1 / kinv, lam))
        assert abs(q.q1 - q.q2) <= 1e-5
    for lam, kinv in curves["zero_pole"]:
        q = poles(m, Gains(1 / kinv, lam))
        assert min(abs(q.q1), abs(q.q2)) <= 1e-9
