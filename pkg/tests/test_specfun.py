import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hotspot_dw import specfun as sf
from hotspot_dw.specfun import KernelId, Regime, ScaledValue

mp.mp.dps = 40


# -- high-precision oracles -------------------------------------------------


def mp_odd(ell, s):
    s = mp.mpf(s)
    if s == 0:
        return mp.mpf(1) / (2**ell * mp.factorial(ell))
    return mp.besseli(ell, s) / s**ell


def mp_even(ell, s, deriv=False):
    # sum_j s^{2j+1} / ((2(j+l))!! (2j+1)!!), summed until negligible
    s = mp.mpf(s)
    total = mp.mpf(0)
    for j in range(400):
        num = (2 * j + 1) * s ** (2 * j) if deriv else s ** (2 * j + 1)
        term = num / (mp.fac2(2 * (j + ell)) * mp.fac2(2 * j + 1))
        total += term
        if j > 5 and abs(term) < mp.mpf(10) ** -35 * abs(total):
            break
    return total


def mp_odd_deriv(ell, s):
    return mp.diff(lambda z: mp_odd(ell, z), mp.mpf(s))


# -- Bessel functions ---------------------------------------------------------


def test_bessel_i_exact_at_zero():
    assert sf.bessel_i(0, 0.0) == 1.0
    assert sf.bessel_i(1, 0.0) == 0.0
    assert sf.bessel_i_scaled(0, 0.0) == 1.0


def test_bessel_i0_at_one():
    assert sf.bessel_i(0, 1.0) == pytest.approx(float(mp.besseli(0, 1)), rel=1e-15)
    assert sf.bessel_i(0, 1.0) == pytest.approx(1.2660658777520082, rel=1e-15)


@pytest.mark.parametrize("nu", [0, 1, 2, 5])
@pytest.mark.parametrize("s", [0.01, 0.7, 3.0, 12.0, 29.9, 30.0, 45.0, 99.0, 250.0])
def test_bessel_i_against_mpmath(nu, s):
    ref = mp.besseli(nu, s)
    assert sf.bessel_i(nu, s) == pytest.approx(float(ref), rel=1e-13)
    assert sf.bessel_i_scaled(nu, s) == pytest.approx(float(ref * mp.exp(-s)), rel=1e-13)


def test_bessel_i_scaled_large_argument():
    ref = mp.besseli(0, 100) * mp.exp(-100)
    assert sf.bessel_i_scaled(0, 100.0) == pytest.approx(float(ref), rel=1e-10)
    assert sf.bessel_i_scaled(0, 650.0) > 0


def test_bessel_ratio_below_one():
    assert sf.bessel_i_scaled(1, 50.0) / sf.bessel_i_scaled(0, 50.0) < 1


def test_bessel_i0_derivative_is_i1():
    s = np.linspace(0.2, 25, 40)
    h = 1e-5
    fd = (sf.bessel_i(0, s + h) - sf.bessel_i(0, s - h)) / (2 * h)
    np.testing.assert_allclose(fd, sf.bessel_i(1, s), rtol=1e-6)


def test_bessel_domain_errors():
    with pytest.raises(sf.SpecfunDomainError):
        sf.bessel_i(0, -1.0)
    with pytest.raises(sf.SpecfunDomainError):
        sf.bessel_i_scaled(1, -0.5)
    with pytest.raises(sf.SpecfunDomainError):
        sf.bessel_i(0, 800.0)
    with pytest.raises(sf.SpecfunDomainError):
        sf.bessel_i(-1, 1.0)


def test_bessel_vectorised_matches_scalar():
    s = np.array([0.0, 0.5, 31.0, 200.0])
    v = sf.bessel_i_scaled(2, s)
    assert v.shape == s.shape
    for si, vi in zip(s, v):
        assert vi == sf.bessel_i_scaled(2, float(si))


# -- kernels ------------------------------------------------------------------


def test_kernel_values_at_zero():
    assert sf.kernel_k(KernelId.odd(1), 0.0) == 0.5
    assert sf.kernel_k(KernelId.even(2), 0.0) == 0.0
    assert sf.kernel_k_deriv(KernelId.odd(2), 0.0) == 0.0
    assert sf.kernel_k_deriv(KernelId.even(3), 0.0) == pytest.approx(1 / 48, rel=1e-15)
    for ell in range(6):
        assert sf.kernel_k_at_zero(KernelId.odd(ell)) == 1 / (2**ell * math.factorial(ell))
    assert sf.kernel_k_deriv_at_zero(KernelId.even(3)) == 1 / 48


def test_even_first_kernel_closed_form():
    assert sf.kernel_k(KernelId.even(1), 2.0) == pytest.approx((math.cosh(2) - 1) / 2, rel=1e-14)


def test_odd_recursion_example():
    lhs = sf.kernel_k_deriv(KernelId.odd(1), 2.0)
    assert lhs == pytest.approx(2.0 * sf.kernel_k(KernelId.odd(2), 2.0), rel=1e-14)


@pytest.mark.parametrize("ell", [0, 1, 2, 3, 5])
@pytest.mark.parametrize("s", [0.0, 0.3, 4.0, 17.5, 29.0, 31.0, 60.0, 95.0])
def test_odd_kernel_against_mpmath(ell, s):
    kid = KernelId.odd(ell)
    assert sf.kernel_k(kid, s) == pytest.approx(float(mp_odd(ell, s)), rel=1e-13)
    if s > 0:
        assert sf.kernel_k_deriv(kid, s) == pytest.approx(float(mp_odd_deriv(ell, s)), rel=1e-12)


@pytest.mark.parametrize("ell", [1, 2, 3, 4, 6])
@pytest.mark.parametrize("s", [0.0, 0.3, 4.0, 17.5, 29.0, 31.0, 60.0, 95.0])
def test_even_kernel_against_mpmath(ell, s):
    kid = KernelId.even(ell)
    ref = mp_even(ell, s)
    dref = mp_even(ell, s, deriv=True)
    assert sf.kernel_k(kid, s) == pytest.approx(float(ref), rel=1e-13, abs=1e-300)
    assert sf.kernel_k_deriv(kid, s) == pytest.approx(float(dref), rel=1e-12)


@pytest.mark.parametrize("kid", [KernelId.odd(0), KernelId.odd(2), KernelId.even(1), KernelId.even(3)])
@pytest.mark.parametrize("s,shift", [(5.0, 5.0), (29.999, 40.0), (30.0, 40.0), (40.0, 50.0), (150.0, 160.0), (400.0, 400.0)])
def test_scaled_kernel_against_mpmath(kid, s, shift):
    base = mp_odd(kid.order, s) if kid.family is sf.Family.ODD else mp_even(kid.order, s)
    ref = base * mp.exp(-shift)
    assert sf.kernel_k_scaled(kid, s, shift) == pytest.approx(float(ref), rel=1e-12)


def test_scaled_kernel_spec_examples():
    assert sf.kernel_k_scaled(KernelId.odd(1), 0.0, 5.0) == pytest.approx(math.exp(-5) / 2, rel=1e-15)
    ref = mp_even(2, 40) * mp.exp(-50)
    assert sf.kernel_k_scaled(KernelId.even(2), 40.0, 50.0) == pytest.approx(float(ref), rel=1e-10)
    s = 60.0
    approx = (1 / s**2) / math.sqrt(2 * math.pi * s) * (1 - 1.5 * 2.5 / (2 * s))
    assert sf.kernel_k_scaled(KernelId.odd(2), s, s) == pytest.approx(approx, rel=1e-3)


def test_scaled_kernel_rejects_small_shift():
    with pytest.raises(sf.SpecfunDomainError):
        sf.kernel_k_scaled(KernelId.odd(1), 10.0, 9.0)
    # inside the 1e-9 slack is fine
    sf.kernel_k_scaled(KernelId.odd(1), 10.0, 10.0 - 5e-10)


@pytest.mark.parametrize("kid", [KernelId.odd(1), KernelId.odd(3), KernelId.even(2), KernelId.even(4)])
def test_scaled_switch_is_continuous(kid):
    # series below s = 30, large-argument form above
    lo = sf.kernel_k_scaled(kid, np.nextafter(30.0, 0.0), 30.0)
    hi = sf.kernel_k_scaled(kid, 30.0, 30.0)
    assert abs(lo - hi) <= 1e-13 * abs(hi)
    dlo = sf.kernel_k_scaled(kid, np.nextafter(30.0, 0.0), 30.0, deriv=True)
    dhi = sf.kernel_k_scaled(kid, 30.0, 30.0, deriv=True)
    assert abs(dlo - dhi) <= 1e-12 * abs(dhi)


@settings(max_examples=60, deadline=None)
@given(ell=st.integers(1, 6), s=st.floats(0.05, 90.0))
def test_even_recursion_property(ell, s):
    # k_{l+1}(s) s = k_l'(s) - k_l'(0)
    lhs = sf.kernel_k(KernelId.even(ell + 1), s) * s
    rhs = sf.kernel_k_deriv(KernelId.even(ell), s) - sf.kernel_k_deriv_at_zero(KernelId.even(ell))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(ell=st.integers(0, 6), s=st.floats(0.05, 29.0))
def test_odd_recursion_property(ell, s):
    lhs = sf.kernel_k(KernelId.odd(ell + 1), s) * s
    rhs = sf.kernel_k_deriv(KernelId.odd(ell), s)
    assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(ell=st.integers(0, 5), s=st.floats(0.0, 80.0))
def test_kernels_positive_and_increasing(ell, s):
    for kid in (KernelId.odd(ell), KernelId.even(ell + 1)):
        assert sf.kernel_k(kid, s + 0.5) > sf.kernel_k(kid, s) >= 0


def test_kernel_id_validation():
    with pytest.raises(sf.SpecfunDomainError):
        KernelId.even(0)
    with pytest.raises(sf.SpecfunDomainError):
        KernelId.odd(-1)
    assert KernelId.odd(2).next() == KernelId.odd(3)


# -- asymptotics --------------------------------------------------------------


def test_asymptotic_even_first_order():
    s = 40.0
    v = sf.kernel_asymptotic(KernelId.even(1), s, 1)
    assert v.log_abs() == pytest.approx(s - math.log(2 * s), abs=1e-12)


def test_asymptotic_odd_error_decays_like_inverse_s():
    kid = KernelId.odd(1)
    errs = []
    for s in (30.0, 50.0, 100.0):
        a = sf.kernel_asymptotic(kid, s, 0)
        exact = float(mp.log(mp_odd(1, s)))
        errs.append(abs(math.expm1(a.log_abs() - exact)) * s)
    # s * relative error stays bounded (close to the 3/8 coefficient)
    assert max(errs) / min(errs) < 1.5
    assert max(errs) < 0.5


def test_asymptotic_even_second_term_error():
    kid = KernelId.even(2)
    for s in (30.0, 50.0, 100.0):
        a = sf.kernel_asymptotic(kid, s, 1)
        exact = float(mp.log(mp_even(2, s)))
        assert abs(math.expm1(a.log_abs() - exact)) * s * s < 10.0


def test_asymptotic_domain():
    with pytest.raises(sf.SpecfunDomainError):
        sf.kernel_asymptotic(KernelId.odd(1), 5.0, 0)


def test_scaled_value_normalised():
    for x in (1e-300, 3e-7, 0.5, 9.99, 10.0, 7e12):
        v = ScaledValue.from_log(1.0, math.log(x))
        assert 0.1 <= abs(v.mantissa) < 10
        assert v.value() == pytest.approx(x, rel=1e-12)
    assert ScaledValue.from_log(0.0, 1.0).mantissa == 0
    big = ScaledValue.from_log(-1.0, 5000.0)
    assert big.mantissa < 0 and big.log_abs() == pytest.approx(5000.0)


# -- constants and the E_n weight --------------------------------------------


def sphere_area(k):
    return 2 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def dfact(m):
    return math.prod(range(m, 0, -2)) if m > 0 else 1


@pytest.mark.parametrize("n", range(1, 8))
def test_c_n_against_double_factorial_definition(n):
    if n == 1:
        ref = 1.0
    elif n % 2:
        ref = 1.0 / (dfact(n - 2) * sphere_area(n - 1))
    else:
        ref = 1.0 / (dfact(n - 1) * sphere_area(n))
    assert sf.c_n(n) == pytest.approx(ref, rel=1e-14)


def test_c_n_domain():
    with pytest.raises(sf.SpecfunDomainError):
        sf.c_n(0)


def mp_e_weight(n, r, t):
    pref, kid = sf.j_prefactor(n)
    s = mp.sqrt(mp.mpf(t) ** 2 - mp.mpf(r) ** 2) / 2
    k = mp_odd(kid.order + 1, s) if kid.family is sf.Family.ODD else mp_even(kid.order + 1, s)
    return mp.mpf(pref) / 4 * mp.exp(-mp.mpf(t) / 2) * k


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("r,t", [(0.0, 1.0), (0.5, 2.0), (3.0, 10.0), (9.99, 10.0), (20.0, 80.0)])
def test_e_weight_against_mpmath(n, r, t):
    assert sf.e_weight(n, r, t) == pytest.approx(float(mp_e_weight(n, r, t)), rel=1e-12)


def test_e_weight_one_dimensional_form():
    # n = 1: e^{-t/2}/4 * I_1(q) / (2q) with q = sqrt(t^2 - r^2)/2
    r, t = 1.2, 3.0
    q = 0.5 * math.sqrt(t * t - r * r)
    ref = math.exp(-t / 2) / 4 * float(mp.besseli(1, q)) / (2 * q)
    assert sf.e_weight(1, r, t) == pytest.approx(ref, rel=1e-14)


def test_e_weight_rim_limit():
    t = 7.0
    v = sf.e_weight(1, t * (1 - 1e-12), t)
    assert v == pytest.approx(math.exp(-t / 2) / 16, rel=1e-9)


def test_e_weight_monotone_in_r():
    assert sf.e_weight(3, 1.0, 10.0) > sf.e_weight(3, 2.0, 10.0)
    r = np.linspace(0, 9.9, 50)
    for n in (1, 2, 3):
        assert np.all(np.diff(sf.e_weight(n, r, 10.0)) < 0)


def test_e_weight_domain():
    with pytest.raises(sf.SpecfunDomainError):
        sf.e_weight(2, 5.0, 5.0)
    with pytest.raises(sf.SpecfunDomainError):
        sf.e_weight(2, -0.1, 5.0)


@pytest.mark.xfail(strict=True, reason="leading-order formula is 5.0000004% off at t = 40; see notes")
def test_e_weight_leading_order_at_40():
    ref = 1 / (2 * 4 * math.pi * 40.0**2)
    assert sf.e_weight(2, 0.0, 40.0) == pytest.approx(ref, rel=0.05)


def test_e_weight_leading_order_at_40_ratio():
    # the miss above is a genuine O(1/t) correction, not a bug
    ratio = sf.e_weight(2, 0.0, 40.0) * 2 * 4 * math.pi * 40.0**2
    assert 0.949 < ratio < 0.951
    ratio_400 = sf.e_weight(2, 0.0, 400.0) * 2 * 4 * math.pi * 400.0**2
    assert abs(1 - ratio_400) < abs(1 - ratio) / 9


@pytest.mark.parametrize("n", [1, 2, 3])
def test_e_weight_asymptotic_origin(n):
    t = 60.0
    v = sf.e_weight_asymptotic(n, 0.0, t, Regime.SMALL_ORDER_SQRT_T)
    assert v.value() == pytest.approx(1 / (2 * (4 * math.pi) ** (n / 2) * t ** (n / 2 + 1)), rel=1e-13)


def test_e_weight_asymptotic_sqrt_regime_converges():
    errs = []
    for t in (50.0, 100.0, 200.0):
        a = sf.e_weight_asymptotic(2, math.sqrt(t), t, Regime.SMALL_ORDER_SQRT_T).value()
        errs.append(abs(a / sf.e_weight(2, math.sqrt(t), t) - 1))
    assert errs[0] > errs[1] > errs[2]


def test_e_weight_asymptotic_small_order_t_factor():
    t = 80.0
    phi = t / 2
    a = sf.e_weight_asymptotic(1, phi, t, Regime.SMALL_ORDER_T)
    b = sf.e_weight_asymptotic(1, 0.0, t, Regime.SMALL_ORDER_T)
    expo = (-t + math.sqrt(t * t - phi * phi)) / 2
    assert a.log_abs() - b.log_abs() == pytest.approx(expo, abs=1e-12)


def test_e_weight_asymptotic_general_regime():
    for t in (100.0, 400.0):
        phi = 0.8 * t
        a = sf.e_weight_asymptotic(3, phi, t, Regime.GENERAL)
        exact = float(mp.log(mp_e_weight(3, phi, t)))
        assert abs(a.log_abs() - exact) < 5.0 / math.sqrt(t * t - phi * phi)


def test_e_weight_asymptotic_domain():
    with pytest.raises(sf.SpecfunDomainError):
        sf.e_weight_asymptotic(2, 10.0, 10.0, Regime.GENERAL)
