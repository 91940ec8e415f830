import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpbalance import (
    Gains,
    Interval,
    SingularSystemError,
    SystemParams,
    UnstableGainsError,
    UnsupportedGainStructureError,
    discretize,
)
from cpbalance.robust_tube import (
    alpha_coeffs,
    brute_force_max_cop_error,
    coefficient_sums,
    cop_error,
    cop_error_interval,
    feasibility_check,
    gray_region_ratio,
    h_vector,
    impulse_coefficients,
    invariant_tube,
    k_times_tube_interval,
    ratio_closed_form,
    ratio_series,
    support,
    worst_case_sequence,
)
from cpbalance.stability import closed_loop

from conftest import LN2, LN25, LN3, OMEGA, params_wt

W3 = Interval.symmetric(0.03)


def cp(k):
    return Gains.cp_line(k, OMEGA)


@pytest.mark.parametrize("k, wt, expected", [(2.0, 0.32, 3.0), (1.5, 0.32, 4.0), (2.0, LN2, 3.0), (2.0, LN25, 7.0)])
def test_ratio_series_examples(k, wt, expected):
    assert ratio_series(params_wt(wt), cp(k)) == pytest.approx(expected, abs=1e-7)
    assert ratio_closed_form(params_wt(wt), cp(k)) == pytest.approx(expected, abs=1e-12)


def test_closed_form_undefined_regions():
    assert ratio_closed_form(params_wt(LN3), cp(2.0)) is None
    assert ratio_closed_form(params_wt(0.3), cp(1.0)) is None
    assert ratio_closed_form(SystemParams(OMEGA, 0.0), cp(2.0)) is None
    with pytest.raises(UnsupportedGainStructureError):
        ratio_closed_form(params_wt(0.3), Gains(2.0, 0.5))


def test_series_rejects_unstable():
    with pytest.raises(UnstableGainsError):
        ratio_series(params_wt(LN3 + 0.01), cp(2.0))


def test_series_tail_certified():
    s = coefficient_sums(params_wt(0.5), Gains(2.5, 0.2), eps=1e-12)
    assert s.tail <= 1e-12
    direct = np.abs(impulse_coefficients(params_wt(0.5), Gains(2.5, 0.2), s.terms + 2000)).sum()
    assert abs(direct - s.total_abs) <= 1e-12


def test_gray_region_ratio_values():
    assert gray_region_ratio(cp(2.0)) == 3.0
    assert gray_region_ratio(cp(3.0)) == 2.5


def test_h_vector():
    np.testing.assert_allclose(h_vector(params_wt(0.32), cp(2.0)), [-1.0, 0.0], atol=1e-12)
    with pytest.raises(SingularSystemError):
        h_vector(params_wt(0.32), cp(1.0))


def test_h_is_sum_of_impulses():
    params, g = params_wt(0.6), Gains(1.8, 0.25)
    m = discretize(params)
    cl = closed_loop(m, g)
    total, y = np.zeros(2), np.array(m.b)
    for _ in range(5000):
        total += y
        y = cl @ y
    np.testing.assert_allclose(h_vector(params, g), total, atol=1e-10)


def test_alpha_pairs_with_poles():
    params, g = params_wt(0.4), Gains(1.7, 0.4)
    a = alpha_coeffs(params, g)
    c = impulse_coefficients(params, g, 25)
    for i in range(25):
        assert a.term(i) == pytest.approx(c[i], abs=1e-10)
    m = discretize(params)
    assert a.alpha1 + a.alpha2 == pytest.approx(float(g.as_row() @ m.b), abs=1e-12)


def test_alpha_rejects_complex_and_repeated():
    with pytest.raises(UnsupportedGainStructureError):
        alpha_coeffs(params_wt(0.4), Gains(1.7, 0.2))
    params = params_wt(0.3)
    # equal poles on the cp line: 1 - (k-1)e = exp(-wt)
    k = 1 + (1 - math.exp(-0.3)) / math.expm1(0.3)
    with pytest.raises(UnsupportedGainStructureError):
        alpha_coeffs(params, cp(k))


def test_tube_point_when_w_degenerate():
    z = invariant_tube(params_wt(0.32), cp(2.0), Interval(0.0, 0.0))
    assert np.all(z.generators == 0.0)
    np.testing.assert_array_equal(z.vertices(), [[0.0, 0.0]])


def test_tube_homogeneity():
    params, g = params_wt(0.32), cp(2.0)
    a = invariant_tube(params, g, W3)
    b = invariant_tube(params, g, W3.scale(2.0), eps=2e-9)
    np.testing.assert_allclose(b.generators[: len(a.generators)], 2 * a.generators, atol=1e-15)
    for d in ([1, 0], [0, 1], [1, 1], [-0.3, 2.0]):
        assert support(b, d) == pytest.approx(2 * support(a, d), abs=1e-8)


def test_tube_small():
    z = invariant_tube(params_wt(0.32), cp(2.0), W3)
    assert z.tail_bound <= 1e-9
    assert len(z.generators) < 200


@settings(max_examples=100)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.1, 3))
def test_support_subadditive_and_homogeneous(a, b, c, d, s):
    z = invariant_tube(params_wt(0.5), Gains(1.6, 0.3), W3)
    d1, d2 = np.array([a, b]), np.array([c, d])
    if not d1.any() or not d2.any() or not (d1 + d2).any():
        return
    assert support(z, d1 + d2) <= support(z, d1) + support(z, d2) + 1e-12
    assert support(z, s * d1) == pytest.approx(s * support(z, d1), rel=1e-12, abs=1e-15)


def test_vertices_attain_support():
    z = invariant_tube(params_wt(0.5), Gains(1.6, 0.3), W3)
    v = z.vertices()
    for ang in np.linspace(0, 2 * np.pi, 37):
        d = np.array([np.cos(ang), np.sin(ang)])
        assert max(v @ d) == pytest.approx(support(z, d) - z.tail_bound, abs=1e-12)


def test_cop_error_interval_at_design_point():
    err = cop_error_interval(params_wt(0.32), cp(2.0), W3)
    assert err.lo == pytest.approx(-0.045, abs=1e-9) and err.hi == pytest.approx(0.045, abs=1e-9)
    kz = k_times_tube_interval(params_wt(0.32), cp(2.0), W3)
    assert kz.span == pytest.approx(0.06, abs=1e-9)


def test_worst_case_matches_bound_within_one_percent():
    rng = np.random.default_rng(11)
    for _ in range(20):
        wt = rng.uniform(0.05, 0.9)
        params = params_wt(wt)
        g = Gains(rng.uniform(1.2, 1 + 1.8 / math.expm1(wt)), 1 / OMEGA)
        bound = cop_error_interval(params, g, W3)
        hi = cop_error(params, g, worst_case_sequence(params, g, W3, 3000))
        lo = cop_error(params, g, worst_case_sequence(params, g, W3, 3000, maximize=False))
        assert hi <= bound.hi + 1e-12 and lo >= bound.lo - 1e-12
        assert hi - lo >= 0.99 * bound.span


def test_brute_force_agrees_with_sign_construction():
    params, g = params_wt(0.3), cp(2.0)
    best, _ = brute_force_max_cop_error(params, g, W3, 10)
    sign = abs(cop_error(params, g, worst_case_sequence(params, g, W3, 10)))
    assert best == sign


def test_feasibility_examples():
    params, g = params_wt(0.32), cp(2.0)
    poly, n = Interval.symmetric(0.09), Interval.symmetric(0.0)
    rep = feasibility_check(Interval(0.0, 0.0), poly, n, params, g, W3)
    assert rep.feasible and rep.cop_margin == pytest.approx(0.0, abs=1e-9)
    rep = feasibility_check(Interval(0.0, 0.0), Interval.symmetric(0.08), n, params, g, W3)
    assert not rep.feasible
    rep = feasibility_check(Interval(-0.01, 0.01), Interval.symmetric(0.2), Interval.symmetric(0.01), params, g, W3)
    assert rep.feasible and rep.cop_margin == pytest.approx(0.04, abs=1e-9)


def test_feasibility_state_box():
    params, g = params_wt(0.32), cp(2.0)
    z = invariant_tube(params, g, W3)
    big = (Interval.symmetric(1.0), Interval.symmetric(5.0))
    rep = feasibility_check(Interval(0, 0), Interval.symmetric(0.2), Interval(0, 0), params, g, W3,
                            x_ref_box=(Interval(0, 0), Interval(0, 0)), state_box=big)
    assert rep.feasible
    assert rep.com_margin == pytest.approx(min(0.5 - support(z, [1, 0]), 2.5 - support(z, [0, 1])), abs=1e-9)


def test_feasibility_monotone_in_polygon():
    params, g = params_wt(0.32), cp(2.0)
    margins = [feasibility_check(Interval(-0.01, 0.01), Interval.symmetric(s), Interval(0, 0), params, g, W3).cop_margin
               for s in np.linspace(0.05, 0.3, 20)]
    assert all(b > a for a, b in zip(margins, margins[1:]))
