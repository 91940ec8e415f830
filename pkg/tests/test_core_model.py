import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpbalance import InvalidParameterError, StateVec, SystemParams, capture_point, cp_step, discretize, step

mpmath.mp.dps = 40

omegas = st.floats(0.5, 10.0)
omega_taus = st.floats(0.0, 2.0)
small = st.floats(-1.0, 1.0)


def test_params_validation():
    with pytest.raises(InvalidParameterError):
        SystemParams(0.0, 0.1)
    with pytest.raises(InvalidParameterError):
        SystemParams(3.2, -0.01)
    with pytest.raises(InvalidParameterError):
        SystemParams(math.inf, 0.1)
    with pytest.raises(InvalidParameterError):
        StateVec(math.nan, 0.0)
    assert SystemParams(3.2, 0.0).tau == 0.0


def test_tau_zero_is_identity():
    m = discretize(SystemParams(3.2, 0.0))
    np.testing.assert_array_equal(m.a, np.eye(2))
    np.testing.assert_array_equal(m.b, [0.0, 0.0])


def test_matches_extended_precision():
    w, t = mpmath.mpf("3.2"), mpmath.mpf("0.1")
    ch, sh = mpmath.cosh(w * t), mpmath.sinh(w * t)
    expected_a = [[ch, sh / w], [w * sh, ch]]
    expected_b = [1 - ch, -w * sh]
    m = discretize(SystemParams(3.2, 0.1))
    for i in range(2):
        assert m.b[i] == pytest.approx(float(expected_b[i]), abs=1e-12)
        for j in range(2):
            assert m.a[i, j] == pytest.approx(float(expected_a[i][j]), abs=1e-12)


def test_ln2_gives_cosh_five_quarters():
    m = discretize(SystemParams(3.2, math.log(2.0) / 3.2))
    assert m.a[0, 0] == pytest.approx(1.25, abs=1e-12)
    assert m.a[1, 0] / 3.2 == pytest.approx(0.75, abs=1e-12)


def test_matrices_are_read_only():
    m = discretize(SystemParams(3.2, 0.1))
    with pytest.raises(ValueError):
        m.a[0, 0] = 0.0


def test_step_equilibrium_at_cop():
    m = discretize(SystemParams(3.2, 0.1))
    x = step(m, StateVec(0.07, 0.0), 0.07, 0.0)
    assert x.c == pytest.approx(0.07, abs=1e-15)
    assert x.cdot == pytest.approx(0.0, abs=1e-15)


def test_step_hand_expansion():
    x = step(discretize(SystemParams(3.2, 0.1)), StateVec(0.01, 0.0), 0.0, 0.0)
    assert x.c == pytest.approx(0.01 * math.cosh(0.32), abs=1e-15)
    assert x.cdot == pytest.approx(0.01 * 3.2 * math.sinh(0.32), abs=1e-15)


def test_disturbance_enters_as_p_minus_n():
    m = discretize(SystemParams(3.2, 0.1))
    x = StateVec(0.02, -0.1)
    a = step(m, x, 0.05, 0.01)
    b = step(m, x, 0.04, 0.0)
    assert (a.c, a.cdot) == pytest.approx((b.c, b.cdot), abs=1e-15)


def test_capture_point_examples():
    p = SystemParams(3.2, 0.1)
    assert capture_point(p, StateVec(0.1, 0.0)) == 0.1
    assert capture_point(p, StateVec(0.0, 0.32)) == pytest.approx(0.1, abs=1e-15)
    assert capture_point(p, StateVec(0.05, -0.16)) == pytest.approx(0.0, abs=1e-15)


def test_cp_step_examples():
    p = SystemParams(3.2, 0.1)
    assert cp_step(p, 0.04, 0.04) == 0.04
    assert cp_step(p, 0.01, 0.0) == pytest.approx(0.01 * math.exp(0.32), rel=1e-14)


def test_cp_step_matches_matrix_path_on_random_inputs():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        params = SystemParams(rng.uniform(0.5, 10.0), rng.uniform(0.0, 0.4))
        x = StateVec(*rng.uniform(-0.2, 0.2, 2))
        p = rng.uniform(-0.1, 0.1)
        direct = capture_point(params, step(discretize(params), x, p, 0.0))
        assert cp_step(params, capture_point(params, x), p) == pytest.approx(direct, abs=1e-12)


@settings(max_examples=200)
@given(omegas, omega_taus)
def test_det_one_and_eigenvalues(w, wt):
    m = discretize(SystemParams(w, wt / w))
    assert np.linalg.det(m.a) == pytest.approx(1.0, abs=1e-12 * max(1.0, m.a[0, 0] ** 2))
    ev = np.sort(np.linalg.eigvals(m.a).real)
    np.testing.assert_allclose(ev, [math.exp(-wt), math.exp(wt)], atol=1e-10 * math.exp(wt))


@settings(max_examples=200)
@given(omegas, st.floats(0.0, 0.3), small, small)
def test_free_cp_scales_by_exp(w, tau, c, cdot):
    params = SystemParams(w, tau)
    x = StateVec(c, cdot)
    xi0 = capture_point(params, x)
    xi1 = capture_point(params, step(discretize(params), x, 0.0, 0.0))
    assert xi1 == pytest.approx(math.exp(w * tau) * xi0, abs=1e-10)


@settings(max_examples=200)
@given(omegas, st.floats(0.0, 0.3), small, small, small, small)
def test_semigroup(w, tau, c, cdot, p, n):
    x = StateVec(c, cdot)
    half = discretize(SystemParams(w, tau / 2))
    full = discretize(SystemParams(w, tau))
    two = step(half, step(half, x, p, n), p, n)
    one = step(full, x, p, n)
    assert two.c == pytest.approx(one.c, abs=1e-10)
    assert two.cdot == pytest.approx(one.cdot, abs=1e-10)
