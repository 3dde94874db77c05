import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from bilapeig.errors import DomainError, RangeError
from bilapeig.specfun import bessel, bessel_pair, cross_products


def k0_by_quadrature(x):
    upper = np.arccosh(max(700.0 / x, 1.0)) + 1.0
    return integrate.quad(lambda t: np.exp(-x * np.cosh(t)), 0.0, upper, epsabs=0.0, epsrel=1e-13, limit=200)[0]


def test_k0_matches_integral_representation():
    assert bessel("K", 0, 1.0).value == pytest.approx(k0_by_quadrature(1.0), rel=1e-10, abs=0)


def test_order_one_wronskian_at_two():
    j, y = bessel("J", 1, 2.0), bessel("Y", 1, 2.0)
    assert abs(j.value * y.derivative - j.derivative * y.value - 1.0 / np.pi) <= 1e-12


def test_k1_derivative_recurrence():
    k0, k1 = bessel("K", 0, 3.0).value, bessel("K", 1, 3.0)
    assert abs(k1.derivative - (-k0 - k1.value / 3.0)) <= 1e-12


def test_cross_product_diagonal_fourth_is_two_over_pi():
    s = 2.0
    _, _, _, d = cross_products(3, s, s)
    assert abs(d - 2.0 / (np.pi * s)) <= 1e-13
    assert abs(s * d - 2.0 / np.pi) <= 1e-13


def test_cross_order_wronskian():
    s = 1.5
    j2, y2 = bessel("J", 2, s).value, bessel("Y", 2, s).value
    j3, y3 = bessel("J", 3, s).value, bessel("Y", 3, s).value
    assert abs(abs(y2 * j3 - j2 * y3) - 2.0 / (np.pi * s)) <= 1e-13


def test_cross_product_b_vanishes_on_diagonal():
    assert cross_products(0, 1.0, 1.0)[1] == 0.0


def test_nonpositive_argument_is_domain_error():
    with pytest.raises(DomainError):
        bessel("K", 0, 0.0)
    with pytest.raises(DomainError):
        cross_products(1, -1.0, 2.0)


def test_unscaled_overflow_asks_for_scaled():
    with pytest.raises(RangeError, match="scaled=True"):
        bessel("I", 0, 800.0)
    with pytest.raises(RangeError, match="scaled=True"):
        bessel("K", 3, 800.0)
    assert np.isfinite(bessel("I", 0, 700.0, scaled=True).value)
    assert bessel("K", 3, 700.0, scaled=True).value > 0


def test_bad_kind_and_scaled_oscillatory_rejected():
    with pytest.raises(ValueError):
        bessel("H", 0, 1.0)
    with pytest.raises(ValueError):
        bessel("J", 0, 1.0, scaled=True)


def test_negative_order_sign_symmetry():
    for kind in ("J", "Y"):
        v3, d3 = bessel_pair(kind, 3, 2.2)
        vm, dm = bessel_pair(kind, -3, 2.2)
        assert (vm, dm) == (-v3, -d3)
    assert bessel_pair("K", -4, 1.3) == bessel_pair("K", 4, 1.3)


def test_wronskian_sweep():
    t = np.geomspace(0.5, 50.0, 300)
    for k in range(61):
        j, dj = bessel_pair("J", k, t)
        y, dy = bessel_pair("Y", k, t)
        assert np.max(np.abs((j * dy - dj * y) * np.pi * t / 2 - 1)) <= 1e-10


orders = st.integers(min_value=0, max_value=60)
args = st.floats(min_value=0.5, max_value=50.0)


@settings(max_examples=200, deadline=None)
@given(orders, args)
def test_wronskian_property(k, t):
    j, y = bessel("J", k, t), bessel("Y", k, t)
    w = j.value * y.derivative - j.derivative * y.value
    assert abs(w * np.pi * t / 2 - 1) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=1, max_value=59), args)
def test_recurrence_closure(k, x):
    lo, mid, hi = (bessel_pair("J", n, x)[0] for n in (k - 1, k, k + 1))
    scale = max(abs(lo), abs(hi), abs(2 * k / x * mid), 1e-300)
    assert abs(lo + hi - 2 * k / x * mid) <= 1e-10 * scale


@settings(max_examples=200, deadline=None)
@given(orders, st.floats(min_value=1e-3, max_value=600.0))
def test_k_positive_and_decreasing(k, x):
    val, der = bessel_pair("K", k, x, scaled=True)
    assert val > 0 and der < 0


@settings(max_examples=200, deadline=None)
@given(orders, st.floats(min_value=0.05, max_value=300.0), st.sampled_from(["I", "K"]))
def test_scaled_consistency(k, x, kind):
    raw = bessel_pair(kind, k, x)[0]
    scaled = bessel_pair(kind, k, x, scaled=True)[0]
    back = scaled * (np.exp(x) if kind == "I" else np.exp(-x))
    if np.isfinite(raw) and raw > 1e-290 and np.isfinite(back) and back > 1e-290:
        assert back == pytest.approx(raw, rel=1e-12)


def second_derivative(kind, k, x):
    # differentiate f' = Z_{k-1} - (k/x) Z_k (or ∓Z_1 for k = 0) with the same recurrences
    if k == 0:
        _, d1 = bessel_pair(kind, 1, x)
        return d1 if kind == "I" else -d1
    z, dz = bessel_pair(kind, k, x)
    _, dlo = bessel_pair(kind, k - 1, x)
    sign = -1.0 if kind == "K" else 1.0
    return sign * dlo - (k / x) * dz + (k / x**2) * z


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=30), st.floats(min_value=0.5, max_value=40.0),
       st.sampled_from(["J", "Y", "I", "K"]))
def test_defining_ode_residual(k, x, kind):
    f, df = bessel_pair(kind, k, x)
    d2 = second_derivative(kind, k, x)
    # L_k f = -f for J, Y and +f for I, K
    target = f if kind in ("I", "K") else -f
    res = d2 + df / x - k * k * f / x**2 - target
    assert abs(res) <= 1e-10 * (abs(f) + abs(d2))
