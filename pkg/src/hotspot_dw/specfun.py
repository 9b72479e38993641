"""Modified Bessel functions and the two radial kernel families.

The odd family is ``k_l(s) = I_l(s) / s**l`` and the even family is the
cosh-derived series ``k_l(s) = sum_j s**(2j+1) / ((2(j+l))!! (2j+1)!!)``.
Both grow like ``e**s``; every routine that is used inside an integral
over a ball of radius ``t`` is available in a scaled form that returns
``exp(-shift) * k_l(s)`` without ever forming ``e**s`` on its own.

All functions accept scalars or numpy arrays for the argument ``s``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "Family",
    "KernelId",
    "ScaledValue",
    "Regime",
    "SpecfunDomainError",
    "bessel_i",
    "bessel_i_scaled",
    "kernel_k",
    "kernel_k_deriv",
    "kernel_k_scaled",
    "kernel_k_at_zero",
    "kernel_k_deriv_at_zero",
    "kernel_asymptotic",
    "e_weight",
    "e_weight_scaled_kernel",
    "e_weight_asymptotic",
    "c_n",
    "j_prefactor",
]

SWITCH = 30.0  # series below, asymptotic/closed form above (scaled evaluation)
SERIES_MAX = 100.0  # unscaled evaluation uses the series up to here
SERIES_RTOL = 1e-17
SERIES_CAP = 200
ASYM_TOL = 1e-17

# factorial table as reals, log-gamma beyond
_FACT = [1.0]
for _i in range(1, 61):
    _FACT.append(_FACT[-1] * _i)


def factorial(k: int) -> float:
    if k < 0:
        raise ValueError("negative factorial")
    if k <= 60:
        return _FACT[k]
    return math.exp(math.lgamma(k + 1.0))


# past this argument e^s overflows a double; use the *_scaled forms
OVERFLOW_ARG = 700.0

class SpecfunDomainError(ValueError):
    """Argument outside the domain of a special-function routine."""


class Family(enum.Enum):
    ODD = "OddSeries"
    EVEN = "EvenSeries"


@dataclass(frozen=True)
class KernelId:
    family: Family
    order: int

    def __post_init__(self):
        lo = 0 if self.family is Family.ODD else 1
        if int(self.order) != self.order or self.order < lo:
            raise SpecfunDomainError(f"invalid kernel order {self.order} for {self.family.value}")

    @classmethod
    def odd(cls, order: int) -> "KernelId":
        return cls(Family.ODD, order)

    @classmethod
    def even(cls, order: int) -> "KernelId":
        return cls(Family.EVEN, order)

    def next(self) -> "KernelId":
        return KernelId(self.family, self.order + 1)


@dataclass(frozen=True)
class ScaledValue:
    """``mantissa * exp(log_scale)`` with ``0.1 <= |mantissa| < 10`` (or 0)."""

    mantissa: float
    log_scale: float

    @classmethod
    def from_log(cls, sign: float, log_abs: float) -> "ScaledValue":
        if sign == 0 or not np.isfinite(log_abs):
            return cls(0.0, 0.0)
        k = math.floor(log_abs / math.log(10.0))
        frac = log_abs - k * math.log(10.0)
        m = math.copysign(math.exp(frac), sign)
        if abs(m) >= 10.0:  # guard rounding at the upper edge
            m /= 10.0
            k += 1
        return cls(m, k * math.log(10.0))

    def log_abs(self) -> float:
        return math.log(abs(self.mantissa)) + self.log_scale

    def value(self) -> float:
        """Plain float (may overflow to inf)."""
        if self.mantissa == 0:
            return 0.0
        with np.errstate(over="ignore"):
            return float(self.mantissa * np.exp(self.log_scale))


class Regime(enum.Enum):
    GENERAL = "General"
    SMALL_ORDER_T = "SmallOrderT"
    SMALL_ORDER_SQRT_T = "SmallOrderSqrtT"


# ---------------------------------------------------------------------------
# power series


def _check_s(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise SpecfunDomainError("argument must be non-negative")
    return s


def _sum_series(first, ratio, s):
    """Sum ``first * prod(ratio(j, s))`` over j; vectorised over ``s``."""
    term = np.broadcast_to(first, s.shape).astype(float).copy()
    total = term.copy()
    for j in range(SERIES_CAP):
        term = term * ratio(j, s)
        total += term
        with np.errstate(invalid="ignore"):
            small = np.abs(term) <= SERIES_RTOL * np.abs(total)
        if np.all(small | (term == 0)):
            return total
    raise ArithmeticError("kernel series did not converge within 200 terms")


def _odd_series(order, s, deriv=False):
    # term_j = (s/2)^{2j} / (2^l j! (j+l)!)
    q = 0.25 * s * s
    c0 = 1.0 / (2.0**order * factorial(order))
    if not deriv:
        return _sum_series(c0, lambda j, _s: q / ((j + 1.0) * (j + 1.0 + order)), s)
    # d/ds term_j = (2j/s) term_j = (s/2) * (s/2)^{2j-2} / (2^l (j-1)! (j+l)!) for j >= 1
    first = 0.5 * s * c0 / (1.0 + order)
    return _sum_series(first, lambda j, _s: q / ((j + 1.0) * (j + 2.0 + order)), s)


def _even_series(order, s, deriv=False):
    # term_j = s^{2j+1} / ((2(j+l))!! (2j+1)!!), (2m)!! = 2^m m!
    c0 = 1.0 / (2.0**order * factorial(order))
    q = s * s
    if not deriv:
        return _sum_series(c0 * s, lambda j, _s: q / ((2.0 * (j + 1 + order)) * (2.0 * j + 3.0)), s)
    # d/ds term_j = (2j+1) s^{2j} / ((2(j+l))!! (2j+1)!!) = s^{2j} / ((2(j+l))!! (2j-1)!!)
    return _sum_series(c0 + 0.0 * s, lambda j, _s: q / ((2.0 * (j + 1 + order)) * (2.0 * j + 1.0)), s)


# ---------------------------------------------------------------------------
# large-argument forms


def _hankel_sum(nu, s):
    """``sum_k (-1)^k prod_{j<=k}(nu^2-(j-1/2)^2) / (k! 2^k s^k)``, truncated optimally."""
    s = np.asarray(s, dtype=float)
    term = np.ones_like(s)
    total = np.ones_like(s)
    done = np.zeros(s.shape, dtype=bool)
    nu2 = float(nu) * float(nu)
    for k in range(1, 80):
        new = -term * (nu2 - (k - 0.5) ** 2) / (k * 2.0 * s)
        grow = np.abs(new) > np.abs(term)
        done |= grow
        term = np.where(done, 0.0, new)
        total += term
        done |= np.abs(term) <= ASYM_TOL * np.abs(total)
        if np.all(done):
            break
    return total


def _odd_large_scaled(order, s, shift, deriv=False):
    """exp(-shift) * k_l(s) (or its derivative) for large s, via Hankel's expansion."""
    if deriv:  # k_l' = s k_{l+1}
        return s * _odd_large_scaled(order + 1, s, shift)
    pref = np.exp(s - shift - order * np.log(s) - 0.5 * np.log(2.0 * np.pi * s))
    return pref * _hankel_sum(order, s)


# Even family in closed form: k_l(s) = e^s A_l(1/s) + e^{-s} B_l(1/s) + R_l(1/s)
# with polynomials in u = 1/s obtained from k_1 = (cosh s - 1)/s and the recursion
# k_{l+1} = (k_l' - k_l'(0)) / s.


def _poly_deriv(p):
    return {k - 1: k * c for k, c in p.items() if k != 0}


def _poly_add(*ps):
    out: dict = {}
    for p in ps:
        for k, c in p.items():
            out[k] = out.get(k, 0) + c
    return {k: c for k, c in out.items() if c != 0}


def _poly_scale(p, a, shift=0):
    return {k + shift: a * c for k, c in p.items()}


def _even_closed_forms(lmax=20):
    half = Fraction(1, 2)
    A = {1: half}
    B = {1: half}
    R = {1: Fraction(-1)}
    table = {1: (A, B, R)}
    for ell in range(1, lmax):
        # e^s A(u): (A - u^2 A') e^s, times u
        A_new = _poly_add(_poly_scale(A, 1, 1), _poly_scale(_poly_deriv(A), -1, 3))
        B_new = _poly_add(_poly_scale(B, -1, 1), _poly_scale(_poly_deriv(B), -1, 3))
        kp0 = Fraction(1, 2**ell * math.factorial(ell))
        R_new = _poly_add(_poly_scale(_poly_deriv(R), -1, 3), {1: -kp0})
        A, B, R = A_new, B_new, R_new
        table[ell + 1] = (A, B, R)
    return table


_EVEN_CF = _even_closed_forms()


def _poly_arrays(p):
    if not p:
        return np.zeros(1)
    deg = max(p)
    arr = np.zeros(deg + 1)
    for k, c in p.items():
        arr[k] = float(c)
    return arr


_EVEN_CF_ARR = {
    ell: tuple(_poly_arrays(p) for p in polys) for ell, polys in _EVEN_CF.items()
}
_EVEN_CF_DERIV_ARR = {}
for _ell, (_A, _B, _R) in _EVEN_CF.items():
    # d/ds [e^s A(u)] = e^s (A - u^2 A'),  d/ds [e^{-s} B] = e^{-s}(-B - u^2 B'),  d/ds R = -u^2 R'
    _EVEN_CF_DERIV_ARR[_ell] = (
        _poly_arrays(_poly_add(_A, _poly_scale(_poly_deriv(_A), -1, 2))),
        _poly_arrays(_poly_add(_poly_scale(_B, -1), _poly_scale(_poly_deriv(_B), -1, 2))),
        _poly_arrays(_poly_scale(_poly_deriv(_R), -1, 2)),
    )


def _even_large_scaled(order, s, shift, deriv=False):
    if order not in _EVEN_CF_ARR:
        raise SpecfunDomainError(f"even kernel order {order} beyond closed-form table")
    A, B, R = (_EVEN_CF_DERIV_ARR if deriv else _EVEN_CF_ARR)[order]
    u = 1.0 / s
    pa = np.polynomial.polynomial.polyval(u, A)
    pb = np.polynomial.polynomial.polyval(u, B)
    pr = np.polynomial.polynomial.polyval(u, R)
    with np.errstate(under="ignore"):
        return np.exp(s - shift) * pa + np.exp(-s - shift) * pb + np.exp(-shift) * pr


def even_asymptotic_coefficients(order: int) -> np.ndarray:
    """Coefficients c_k with e^s A_l(1/s) = e^s/(2 s^l) * sum_k c_k s^{-k}."""
    A = _EVEN_CF[order][0]
    return np.array([float(2 * A.get(order + k, 0)) for k in range(max(A) - order + 1)])


# ---------------------------------------------------------------------------
# public API


def _as_out(x, like):
    return float(x) if np.ndim(like) == 0 else x


def bessel_i(nu: int, s):
    """Modified Bessel function ``I_nu(s)`` for integer ``nu >= 0``."""
    s_arr = _check_s(s)
    if nu < 0 or int(nu) != nu:
        raise SpecfunDomainError("nu must be a non-negative integer")
    if np.any(s_arr > OVERFLOW_ARG):
        raise SpecfunDomainError("s > 700 overflows; use bessel_i_scaled")
    out = np.empty_like(s_arr)
    small = s_arr <= SERIES_MAX
    if np.any(small):
        ss = s_arr[small]
        with np.errstate(divide="ignore"):
            pw = np.where(ss > 0, ss ** nu, 1.0 if nu == 0 else 0.0)
        out[small] = pw * _odd_series(nu, ss)
    if np.any(~small):
        ss = s_arr[~small]
        out[~small] = np.exp(ss - 0.5 * np.log(2 * np.pi * ss)) * _hankel_sum(nu, ss)
    return _as_out(out, s)


def bessel_i_scaled(nu: int, s):
    """``exp(-s) I_nu(s)``; series below s = 30, Hankel expansion above."""
    s_arr = _check_s(s)
    if nu < 0 or int(nu) != nu:
        raise SpecfunDomainError("nu must be a non-negative integer")
    out = np.empty_like(s_arr)
    small = s_arr < SWITCH
    if np.any(small):
        ss = s_arr[small]
        with np.errstate(divide="ignore"):
            pw = np.where(ss > 0, ss ** nu, 1.0 if nu == 0 else 0.0)
        out[small] = np.exp(-ss) * pw * _odd_series(nu, ss)
    if np.any(~small):
        ss = s_arr[~small]
        out[~small] = np.exp(-0.5 * np.log(2 * np.pi * ss)) * _hankel_sum(nu, ss)
    return _as_out(out, s)


def kernel_k(kid: KernelId, s):
    """Unscaled kernel ``k_l(s)``; exact values at ``s = 0``."""
    s_arr = _check_s(s)
    if np.any(s_arr > OVERFLOW_ARG):
        raise SpecfunDomainError("s > 700 overflows; use kernel_k_scaled")
    out = np.empty_like(s_arr)
    small = s_arr <= SERIES_MAX
    if np.any(small):
        ss = s_arr[small]
        f = _odd_series if kid.family is Family.ODD else _even_series
        out[small] = f(kid.order, ss)
    if np.any(~small):
        ss = s_arr[~small]
        f = _odd_large_scaled if kid.family is Family.ODD else _even_large_scaled
        out[~small] = f(kid.order, ss, 0.0)
    return _as_out(out, s)


def kernel_k_deriv(kid: KernelId, s):
    """``k_l'(s)`` from the term-by-term differentiated series."""
    s_arr = _check_s(s)
    if np.any(s_arr > OVERFLOW_ARG):
        raise SpecfunDomainError("s > 700 overflows")
    out = np.empty_like(s_arr)
    small = s_arr <= SERIES_MAX
    if np.any(small):
        ss = s_arr[small]
        f = _odd_series if kid.family is Family.ODD else _even_series
        out[small] = f(kid.order, ss, deriv=True)
    if np.any(~small):
        ss = s_arr[~small]
        f = _odd_large_scaled if kid.family is Family.ODD else _even_large_scaled
        out[~small] = f(kid.order, ss, 0.0, deriv=True)
    return _as_out(out, s)


def kernel_k_at_zero(kid: KernelId) -> float:
    if kid.family is Family.ODD:
        return 1.0 / (2.0**kid.order * factorial(kid.order))
    return 0.0


def kernel_k_deriv_at_zero(kid: KernelId) -> float:
    if kid.family is Family.ODD:
        return 0.0
    return 1.0 / (2.0**kid.order * factorial(kid.order))


def kernel_k_scaled(kid: KernelId, s, shift, deriv: bool = False):
    """``exp(-shift) * k_l(s)`` (or of ``k_l'``), stable for large ``s`` and ``shift``.

    ``shift`` may be a scalar or an array broadcastable against ``s``.
    """
    s_arr = _check_s(s)
    sh = np.broadcast_to(np.asarray(shift, dtype=float), s_arr.shape)
    if np.any(sh < s_arr - 1e-9):
        raise SpecfunDomainError("kernel_k_scaled requires shift >= s")
    out = np.empty_like(s_arr)
    small = s_arr < SWITCH
    if np.any(small):
        ss = s_arr[small]
        f = _odd_series if kid.family is Family.ODD else _even_series
        with np.errstate(under="ignore"):
            out[small] = np.exp(-sh[small]) * f(kid.order, ss, deriv=deriv)
    if np.any(~small):
        ss = s_arr[~small]
        f = _odd_large_scaled if kid.family is Family.ODD else _even_large_scaled
        out[~small] = f(kid.order, ss, sh[~small], deriv=deriv)
    return _as_out(out, s)


def kernel_asymptotic(kid: KernelId, s: float, terms: int) -> ScaledValue:
    """Leading large-s behaviour with ``terms`` correction terms, in scaled form."""
    if s < 10:
        raise SpecfunDomainError("asymptotic form requires s >= 10")
    ell = kid.order
    if kid.family is Family.ODD:
        corr, term = 1.0, 1.0
        for k in range(1, terms + 1):
            term = -term * (ell * ell - (k - 0.5) ** 2) / (k * 2.0 * s)
            corr += term
        log_lead = s - ell * math.log(s) - 0.5 * math.log(2 * math.pi * s)
    else:
        c = even_asymptotic_coefficients(ell)
        corr = sum(c[k] * s ** (-k) for k in range(min(terms, len(c) - 1) + 1))
        log_lead = s - math.log(2.0) - ell * math.log(s)
    if corr == 0:
        return ScaledValue(0.0, 0.0)
    return ScaledValue.from_log(math.copysign(1.0, corr), log_lead + math.log(abs(corr)))


# ---------------------------------------------------------------------------
# constants and the E_n weight


def c_n(n: int) -> float:
    """Normalising constant of the kernel formulas (c_1 = 1)."""
    if n < 1:
        raise SpecfunDomainError("dimension must be >= 1")
    if n == 1:
        return 1.0
    if n % 2 == 1:
        return 2.0 ** (-(n + 1) / 2) * math.pi ** (-(n - 1) / 2)
    return 2.0 ** (-(n + 2) / 2) * math.pi ** (-n / 2)


def j_prefactor(n: int) -> tuple[float, KernelId]:
    """Prefactor P and kernel id so that ``J_n g = P e^{-t/2} int k(s) g`` (n = 1 uses k_0 - 1)."""
    if n == 1:
        return 0.5, KernelId.odd(0)
    if n % 2 == 1:
        return c_n(n) / 2.0 ** (n - 1), KernelId.odd((n - 1) // 2)
    return c_n(n) / 2.0 ** (n - 2), KernelId.even(n // 2)


def e_weight_scaled_kernel(n: int, r, t: float):
    """E_n(r, t) without the domain check (vectorised, r < t assumed)."""
    pref, kid = j_prefactor(n)
    s = 0.5 * np.sqrt(np.maximum(t * t - np.asarray(r, dtype=float) ** 2, 0.0))
    return 0.25 * pref * kernel_k_scaled(kid.next(), s, 0.5 * t)


def e_weight(n: int, r, t: float):
    """The positive radial weight E_n(r, t) of the moment form of the gradient of J_n."""
    r_arr = np.asarray(r, dtype=float)
    if t <= 0 or np.any(r_arr < 0) or np.any(r_arr >= t):
        raise SpecfunDomainError("e_weight needs 0 <= r < t")
    return _as_out(e_weight_scaled_kernel(n, r_arr, t), r)


def e_weight_asymptotic(n: int, phi_t: float, t: float, regime: Regime) -> ScaledValue:
    """Leading-order expressions for E_n(phi, t) in the three large-t regimes."""
    if phi_t < 0 or phi_t >= t:
        raise SpecfunDomainError("need 0 <= phi_t < t")
    regime = Regime(regime)
    log_c = -math.log(2.0) - 0.5 * n * math.log(4 * math.pi)
    root = math.sqrt(t * t - phi_t * phi_t)
    expo = 0.5 * (root - t)
    if regime is Regime.GENERAL:
        log_v = log_c - (0.25 * n + 0.5) * math.log(t * t - phi_t * phi_t) + expo
    elif regime is Regime.SMALL_ORDER_T:
        log_v = log_c - (0.5 * n + 1) * math.log(t) + expo
    else:
        log_v = log_c - (0.5 * n + 1) * math.log(t)
    return ScaledValue.from_log(1.0, log_v)
