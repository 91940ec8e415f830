import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpbalance import EMPTY, Interval, InvalidParameterError, minkowski_sum, pontryagin_diff

# multiples of 1/8 keep the arithmetic exact
fin = st.integers(-80, 80).map(lambda i: i / 8)


def iv(a, b):
    return Interval(min(a, b), max(a, b))


def test_examples():
    assert Interval(-1, 2) + Interval(-0.5, 0.5) == Interval(-1.5, 2.5)
    assert Interval(-1, 2) - Interval(-0.5, 0.5) == Interval(-0.5, 1.5)
    assert Interval(-0.01, 0.01) - Interval(-0.02, 0.02) is EMPTY
    assert Interval.symmetric(0.09).span == pytest.approx(0.09)
    assert Interval(2, 4).scale(-1) == Interval(-4, -2)


def test_empty_behaviour():
    assert EMPTY + Interval(0, 1) is EMPTY
    assert pontryagin_diff(EMPTY, Interval(0, 1)) is EMPTY
    assert not EMPTY.contains(0.0)
    with pytest.raises(InvalidParameterError):
        pontryagin_diff(Interval(0, 1), EMPTY)


def test_rejects_bad_bounds():
    with pytest.raises(InvalidParameterError):
        Interval(1, 0)
    with pytest.raises(InvalidParameterError):
        Interval(0, float("inf"))


@given(fin, fin, fin, fin)
def test_sum_then_diff_recovers(a, b, c, d):
    x, y = iv(a, b), iv(c, d)
    back = (x + y) - y
    assert back.lo == pytest.approx(x.lo, abs=1e-9) and back.hi == pytest.approx(x.hi, abs=1e-9)


@given(fin, fin, fin, fin)
def test_diff_is_largest_fitting_set(a, b, c, d):
    x, y = iv(a, b), iv(c, d)
    z = pontryagin_diff(x, y)
    if z is EMPTY:
        assert y.span > x.span
    else:
        assert x.contains(Interval(z.lo + y.lo, z.hi + y.hi)) or abs(z.hi + y.hi - x.hi) < 1e-9
        assert minkowski_sum(z, y).span == pytest.approx(x.span, abs=1e-9)
