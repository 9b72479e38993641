"""Solution formulas for u_tt - Lap u + u_t = 0 with u(0) = f, u_t(0) = g.

The solution is u = S_n(t)(f + g) + d/dt S_n(t) f, and the fundamental operator
splits as S_n = J_n + e^{-t/2} W_n into a heat-like part J_n, an integral of a
Bessel-type kernel k(s), s = sqrt(t^2 - r^2)/2, over the ball B_t(x), and a
wave-like part W_n living on or near the light cone.

Every kernel ``k`` here is evaluated through ``kernel_k_scaled`` with shift t/2,
so the products e^{-t/2} * k(s) never overflow.

Evaluation points may be a single point or an array of shape (M, n); results
are floats or arrays of shape (M,) / (M, n) accordingly.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field as dc_field, replace
from typing import Sequence

import numpy as np

from . import initdata
from .initdata import BumpSum, ProblemSetup
from .quadrature import DEFAULT_SPEC, QuadSpec, angular_moments, bump_rule
from .specfun import (
    Family,
    KernelId,
    c_n,
    factorial,
    j_prefactor,
    kernel_k_at_zero,
    kernel_k_deriv_at_zero,
    kernel_k_scaled,
)

__all__ = [
    "Part",
    "FieldGrid",
    "heat",
    "heat_part_J",
    "wave_part_W",
    "solution_S",
    "dt_solution_S",
    "tilde_J",
    "hat_W",
    "dt_wave_W",
    "tilde_W",
    "solve_u",
    "evaluate_part",
    "grad_J",
    "second_dir_J",
    "grad_tildeJ",
    "second_dir_tildeJ",
    "grad_tildeW",
    "second_dir_tildeW",
    "grad_u",
    "second_dir_u",
    "grad_heat",
    "field",
]

CHUNK = 192  # evaluation points per vectorised block
VECTOR_KINDS = {"mom1", "grad", "hess_mom"}


class Part(enum.Enum):
    FULL_U = "Full_u"
    HEAT_PART_J = "HeatPart_J"
    WAVE_PART_W = "WavePart_W"
    TILDE_J = "TildeJ"
    HAT_W = "HatW"
    TILDE_W = "TildeW"
    HEAT_SEMIGROUP_P = "HeatSemigroup_P"
    DIFFERENCE_U_MINUS_P = "Difference_u_minus_P"

    @classmethod
    def parse(cls, name: str) -> "Part":
        aliases = {
            "u": cls.FULL_U, "full": cls.FULL_U, "j": cls.HEAT_PART_J, "heat_part": cls.HEAT_PART_J,
            "w": cls.WAVE_PART_W, "wave": cls.WAVE_PART_W, "tildej": cls.TILDE_J,
            "hatw": cls.HAT_W, "tildew": cls.TILDE_W, "p": cls.HEAT_SEMIGROUP_P,
            "heat": cls.HEAT_SEMIGROUP_P, "difference": cls.DIFFERENCE_U_MINUS_P,
        }
        for p in cls:
            if name == p.value:
                return p
        key = name.lower().replace("-", "_")
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown part '{name}'")


# ---------------------------------------------------------------------------
# radial kernels as short linear combinations of k_l


@dataclass(frozen=True)
class Chain:
    """K(s) = sum_i coef_i k_{order_i}(s) + offset, all from one family."""

    family: Family
    terms: tuple  # ((coef, order), ...)
    offset: float = 0.0

    def scaled(self, s, t):
        """e^{-t/2} K(s)."""
        out = 0.0
        for coef, order in self.terms:
            if coef != 0:
                out = out + coef * kernel_k_scaled(KernelId(self.family, order), s, 0.5 * t)
        if self.offset:
            out = out + self.offset * math.exp(-0.5 * t)
        return out

    def at0(self) -> float:
        return sum(c * kernel_k_at_zero(KernelId(self.family, o)) for c, o in self.terms) + self.offset

    def deriv_at0(self) -> float:
        return sum(c * kernel_k_deriv_at_zero(KernelId(self.family, o)) for c, o in self.terms)

    def next(self) -> "Chain":
        # odd: K'/s;  even: (K' - K'(0))/s.  Both shift every order by one.
        return Chain(self.family, tuple((c, o + 1) for c, o in self.terms), 0.0)


def j_chain(n: int) -> tuple[float, Chain]:
    pref, kid = j_prefactor(n)
    return pref, Chain(kid.family, ((1.0, kid.order),), -1.0 if n == 1 else 0.0)


def tilde_j_chain(n: int, t: float) -> tuple[float, Chain]:
    pref, kid = j_prefactor(n)
    return 0.25 * pref, Chain(kid.family, ((t, kid.order + 1), (-2.0, kid.order)))


# ---------------------------------------------------------------------------
# integration engine


def _as_points(x, n):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 0 or (X.ndim == 1 and (n > 1 or X.shape[0] == 1) and X.shape[-1] == n)
    if n == 1 and X.ndim == 1 and X.shape[0] != 1:
        single = False
        X = X[:, None]
    X = np.atleast_2d(X.reshape(-1, n))
    return X, single


def _finish(arr, single, vector):
    if single:
        return arr[0].copy() if vector else float(arr[0])
    return arr


def _integrate(datum: BumpSum, X, t, mode, kernel, kinds, omega=None, weight="dr", spec=DEFAULT_SPEC):
    """Sum over bumps of int K(r) * kind-integrand over the region ``mode``.

    ``kernel(rule)`` returns radial kernel values (M, Nr) or a scalar.
    ``weight`` selects dr (plain) or du (= dr / sqrt(t^2 - r^2)) measure.
    """
    M, n = X.shape
    out = {k: np.zeros((M, n)) if k in VECTOR_KINDS else np.zeros(M) for k in kinds}
    for b in datum.scaled_bumps():
        if b.amplitude == 0:
            continue
        for lo in range(0, M, CHUNK):
            Xc = X[lo : lo + CHUNK]
            rule = bump_rule(Xc, b.center, b.radius, mode, t, spec)
            w = rule.wu if weight == "du" else rule.wr
            if not np.any(w):
                continue
            mom = angular_moments(rule, b.profile, kinds, omega)
            K = kernel(rule) if kernel is not None else 1.0
            for k in kinds:
                val = np.sum(K * w * mom[k], axis=1)
                if k in VECTOR_KINDS:
                    out[k][lo : lo + CHUNK] += val[:, None] * rule.e
                else:
                    out[k][lo : lo + CHUNK] += val
    return out


def _chain_kernel(chain: Chain, t):
    return lambda rule: chain.scaled(0.5 * rule.rim, t)


def _check_t(t):
    if not t > 0:
        raise ValueError("t must be positive")


# ---------------------------------------------------------------------------
# heat semigroup


def heat(n: int, phi: BumpSum, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    """(4 pi t)^{-n/2} int exp(-|x-y|^2/4t) phi(y) dy."""
    _check_t(t)
    X, single = _as_points(x, n)
    norm = (4 * math.pi * t) ** (-0.5 * n)
    ker = lambda rule: norm * np.exp(-rule.r**2 / (4 * t))  # noqa: E731
    res = _integrate(phi, X, t, "full", ker, ["val"], spec=spec)["val"]
    return _finish(res, single, False)


def grad_heat(n: int, phi: BumpSum, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    _check_t(t)
    X, single = _as_points(x, n)
    norm = (4 * math.pi * t) ** (-0.5 * n)
    ker = lambda rule: -norm * np.exp(-rule.r**2 / (4 * t)) / (2 * t)  # noqa: E731
    res = _integrate(phi, X, t, "full", ker, ["mom1"], spec=spec)["mom1"]
    return _finish(res, single, True)


# ---------------------------------------------------------------------------
# heat part, wave part, fundamental operator


def heat_part_J(n: int, g: BumpSum, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    """J_n(t) g(x) for n = 1..7."""
    _check_t(t)
    if not 1 <= n <= 7:
        raise ValueError("heat_part_J supports n = 1..7")
    X, single = _as_points(x, n)
    pref, chain = j_chain(n)
    res = _integrate(g, X, t, "ball", _chain_kernel(chain, t), ["val"], spec=spec)["val"]
    return _finish(pref * res, single, False)


def _wave_raw(n, g, X, t, kinds, spec):
    """Un-normalised wave integrals: interval (n=1), du-weighted disc (n=2), sphere (n=3)."""
    if n == 1:
        return _integrate(g, X, t, "ball", None, kinds, spec=spec)
    if n == 2:
        return _integrate(g, X, t, "ball", None, kinds, weight="du", spec=spec)
    if n == 3:
        return _integrate(g, X, t, "sphere", None, kinds, spec=spec)
    raise ValueError("wave parts are implemented for n = 1, 2, 3")


def _wave_norm(n, t):
    return {1: 0.5, 2: 1.0 / (2 * math.pi), 3: 1.0 / (4 * math.pi * t)}[n]


def wave_part_W(n: int, g: BumpSum, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    """W_n(t) g(x) (bold W of the decomposition), n = 1..3."""
    _check_t(t)
    X, single = _as_points(x, n)
    res = _wave_norm(n, t) * _wave_raw(n, g, X, t, ["val"], spec)["val"]
    return _finish(res, single, False)


def hat_W(n: int, f: BumpSum, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    """The boundary-generated wave term of d/dt S_n f."""
    _check_t(t)
    X, single = _as_points(x, n)
    if n == 1:
        res = 0.5 * (initdata.eval(f, X + t) + initdata.eval(f, X - t))
        res = np.atleast_1d(res)
    elif n == 2:
        coef = c_n(2) * t / (2.0 ** 2 * factorial(1))
        res = coef * _wave_raw(2, f, X, t, ["val"], spec)["val"]
    elif n == 3:
        coef = c_n(3) / (2.0 ** 3 * factorial(1))
        res = coef * _wave_raw(3, f, X, t, ["val"], spec)["val"]
    else:
        raise ValueError("hat_W is implemented for n = 1, 2, 3")
    return _finish(res, single, False)


def dt_wave_W(n: int, f: BumpSum, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    """d/dt W_n(t) f(x) = (1/t) W_n[f + (y - x).grad f] for n = 2, 3."""
    _check_t(t)
    X, single = _as_points(x, n)
    if n == 1:
        res = np.atleast_1d(0.5 * (initdata.eval(f, X + t) + initdata.eval(f, X - t)))
    else:
        raw = _wave_raw(n, f, X, t, ["val", "rgrad"], spec)
        res = _wave_norm(n, t) / t * (raw["val"] + raw["rgrad"])
    return _finish(res, single, False)


def tilde_J(n: int, f: BumpSum, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    """The heat-like part of d/dt S_n f (kernel t k_{l+1} - 2 k_l)."""
    _check_t(t)
    X, single = _as_points(x, n)
    pref, chain = tilde_j_chain(n, t)
    res = _integrate(f, X, t, "ball", _chain_kernel(chain, t), ["val"], spec=spec)["val"]
    return _finish(pref * res, single, False)


def tilde_W(n: int, f: BumpSum, g: BumpSum, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    """Aggregate wave-type term: u = J_n h + tildeJ_n f + e^{-t/2} tildeW_n(f, g)."""
    _check_t(t)
    X, single = _as_points(x, n)
    if n == 1:
        res = wave_part_W(1, f + g, X, t, spec) + hat_W(1, f, X, t, spec)
    else:
        res = (
            0.5 * wave_part_W(n, f, X, t, spec)
            + wave_part_W(n, g, X, t, spec)
            + hat_W(n, f, X, t, spec)
            + dt_wave_W(n, f, X, t, spec)
        )
    return _finish(np.atleast_1d(res), single, False)


def solution_S(n: int, g: BumpSum, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    """S_n(t) g(x): direct kernels for n = 1, 2; J_3 + e^{-t/2} W_3 for n = 3."""
    _check_t(t)
    X, single = _as_points(x, n)
    if n == 1:
        k0 = KernelId.odd(0)
        ker = lambda rule: kernel_k_scaled(k0, 0.5 * rule.rim, 0.5 * t)  # noqa: E731
        res = 0.5 * _integrate(g, X, t, "ball", ker, ["val"], spec=spec)["val"]
    elif n == 2:
        res = (1.0 / (2 * math.pi)) * _integrate(
            g, X, t, "ball", lambda rule: _cosh_scaled(0.5 * rule.rim, t), ["val"], weight="du", spec=spec
        )["val"]
    elif n == 3:
        res = heat_part_J(3, g, X, t, spec) + math.exp(-0.5 * t) * wave_part_W(3, g, X, t, spec)
    else:
        raise ValueError("solution_S supports n = 1, 2, 3")
    return _finish(np.atleast_1d(res), single, False)


def _cosh_scaled(s, t):
    return 0.5 * (np.exp(s - 0.5 * t) + np.exp(-s - 0.5 * t))


def _sinh_scaled(s, t):
    return 0.5 * (np.exp(s - 0.5 * t) - np.exp(-s - 0.5 * t))


def dt_solution_S(n: int, f: BumpSum, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    """d/dt S_n(t) f(x).

    n = 1 and n = 3 use the resolved form tildeJ + e^{-t/2}(hatW - W/2 + dW/dt)
    (for n = 1 the last two terms cancel against part of tildeJ's normalisation
    and only hatW remains); n = 2 differentiates the cosh kernel directly.
    """
    _check_t(t)
    X, single = _as_points(x, n)
    et = math.exp(-0.5 * t)
    if n == 1:
        res = tilde_J(1, f, X, t, spec) + et * hat_W(1, f, X, t, spec)
    elif n == 2:
        S = solution_S(2, f, X, t, spec)
        a = _integrate(
            f, X, t, "ball", lambda rule: _cosh_scaled(0.5 * rule.rim, t), ["val", "rgrad"], weight="du", spec=spec
        )
        b = _integrate(f, X, t, "ball", lambda rule: _sinh_scaled(0.5 * rule.rim, t), ["val"], spec=spec)
        res = -0.5 * S + (a["val"] + a["rgrad"] + 0.5 * b["val"]) / (2 * math.pi * t)
    elif n == 3:
        res = tilde_J(3, f, X, t, spec) + et * (
            hat_W(3, f, X, t, spec) - 0.5 * wave_part_W(3, f, X, t, spec) + dt_wave_W(3, f, X, t, spec)
        )
    else:
        raise ValueError("dt_solution_S supports n = 1, 2, 3")
    return _finish(np.atleast_1d(res), single, False)


def solve_u(setup: ProblemSetup, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    """u(x, t) = S_n(t) h + d/dt S_n(t) f; u(x, 0) = f(x)."""
    n = setup.dim
    if n > 3:
        raise ValueError("solve_u supports n <= 3")
    X, single = _as_points(x, n)
    if t == 0:
        return _finish(np.atleast_1d(initdata.eval(setup.f, X)), single, False)
    if t < 0:
        raise ValueError("t must be non-negative")
    res = solution_S(n, setup.h, X, t, spec)
    if not setup.f.is_zero():
        res = res + dt_solution_S(n, setup.f, X, t, spec)
    return _finish(np.atleast_1d(res), single, False)


def evaluate_part(setup: ProblemSetup, part: Part, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    """Dispatch on :class:`Part`; HeatPart_J/WavePart_W act on h, TildeJ/HatW on f."""
    part = Part(part) if not isinstance(part, Part) else part
    n = setup.dim
    X, single = _as_points(x, n)
    if t == 0:
        if part in (Part.FULL_U,):
            return solve_u(setup, x, 0.0, spec)
        raise ValueError(f"part {part.value} needs t > 0")
    if part is Part.FULL_U:
        res = solve_u(setup, X, t, spec)
    elif part is Part.HEAT_PART_J:
        res = heat_part_J(n, setup.h, X, t, spec)
    elif part is Part.WAVE_PART_W:
        res = wave_part_W(n, setup.h, X, t, spec)
    elif part is Part.TILDE_J:
        res = tilde_J(n, setup.f, X, t, spec)
    elif part is Part.HAT_W:
        res = hat_W(n, setup.f, X, t, spec)
    elif part is Part.TILDE_W:
        res = tilde_W(n, setup.f, setup.g, X, t, spec)
    elif part is Part.HEAT_SEMIGROUP_P:
        res = heat(n, setup.h, X, t, spec)
    else:
        res = solve_u(setup, X, t, spec) - heat(n, setup.h, X, t, spec)
    return _finish(np.atleast_1d(res), single, False)


# ---------------------------------------------------------------------------
# derivatives of the heat-like parts
#
# For J(x) = P int_{B_t(x)} e^{-t/2} K(s) h(y) dy with s = sqrt(t^2-|x-y|^2)/2:
#   grad J = P e^{-t/2} [ K(0) (1/t) int_{S_t} h (y-x) dsigma
#                        + K'(0)/2 int_{B_t} h (y-x) / sqrt(t^2-r^2) dy ]
#            - P/4 int_{B_t} e^{-t/2} K_next(s) h (x-y) dy
# where K_next = K'/s (odd family) or (K' - K'(0))/s (even family).  Exactly
# one of K(0), K'(0) is non-zero.  Applying the same rule once more gives the
# second directional derivative.


def _moment_form_region(datum: BumpSum, X, t):
    """Points where the boundary sphere cannot meet the support (moment form applies)."""
    hull = initdata.support_hull(datum)
    d_h = initdata._diameter(hull)
    if t < d_h or hull.empty:
        return np.zeros(X.shape[0], dtype=bool)
    return np.atleast_1d(hull.contains(X, tol=t - d_h))


def _grad_chain(n, pref, chain: Chain, datum: BumpSum, X, t, spec, use_moment_form=True):
    M = X.shape[0]
    et = math.exp(-0.5 * t)
    nxt = chain.next()
    out = -0.25 * pref * _integrate(datum, X, t, "ball", _chain_kernel(nxt, t), ["mom1"], spec=spec)["mom1"]
    K0, K0d = chain.at0(), chain.deriv_at0()
    if K0 != 0:
        skip = _moment_form_region(datum, X, t) if use_moment_form else np.zeros(M, dtype=bool)
        idx = np.nonzero(~skip)[0]
        if len(idx):
            sph = _integrate(datum, X[idx], t, "sphere", None, ["mom1"], spec=spec)["mom1"]
            out[idx] += pref * et * K0 * (-sph / t)
    if K0d != 0:
        cb = _integrate(datum, X, t, "ball", None, ["mom1"], weight="du", spec=spec)["mom1"]
        out += pref * et * 0.5 * K0d * (-cb)
    return out


def _second_chain(n, pref, chain: Chain, datum: BumpSum, X, t, omega, spec):
    et = math.exp(-0.5 * t)
    nxt, nn = chain.next(), chain.next().next()
    a = _integrate(datum, X, t, "ball", _chain_kernel(nxt, t), ["val"], omega=omega, spec=spec)["val"]
    b = _integrate(datum, X, t, "ball", _chain_kernel(nn, t), ["mom2"], omega=omega, spec=spec)["mom2"]
    out = pref * (-0.25 * a + b / 16.0)
    K0, K0d, N0, N0d = chain.at0(), chain.deriv_at0(), nxt.at0(), nxt.deriv_at0()
    if K0 != 0 or N0 != 0:
        sph = _integrate(datum, X, t, "sphere", None, ["wgrad_mom", "mom2"], omega=omega, spec=spec)
        out += pref * et * (K0 * sph["wgrad_mom"] + 0.25 * N0 * sph["mom2"]) / t
    if K0d != 0 or N0d != 0:
        cb = _integrate(datum, X, t, "ball", None, ["wgrad_mom", "mom2"], omega=omega, weight="du", spec=spec)
        out += pref * et * (0.5 * K0d * cb["wgrad_mom"] + 0.125 * N0d * cb["mom2"])
    return out


def _unit(omega, n):
    w = np.asarray(omega, dtype=float).reshape(n)
    nrm = np.linalg.norm(w)
    if not abs(nrm - 1.0) < 1e-9:
        raise ValueError("omega must be a unit vector")
    return w


def grad_J(n: int, h: BumpSum, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    """Gradient of J_n(t) h at x.

    Inside CS(h) + (t - d_h)B (t >= d_h) the sphere term vanishes and only the
    moment form -int E_n h (x - y) dy is evaluated; in even dimensions the
    weighted-ball term (of size e^{-t/2}) is always kept.
    """
    _check_t(t)
    X, single = _as_points(x, n)
    pref, chain = j_chain(n)
    return _finish(_grad_chain(n, pref, chain, h, X, t, spec), single, True)


def second_dir_J(n: int, h: BumpSum, x, t: float, omega, spec: QuadSpec = DEFAULT_SPEC):
    """(omega . grad)^2 J_n(t) h(x)."""
    _check_t(t)
    X, single = _as_points(x, n)
    pref, chain = j_chain(n)
    return _finish(_second_chain(n, pref, chain, h, X, t, _unit(omega, n), spec), single, False)


def grad_tildeJ(n: int, f: BumpSum, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    _check_t(t)
    X, single = _as_points(x, n)
    pref, chain = tilde_j_chain(n, t)
    return _finish(_grad_chain(n, pref, chain, f, X, t, spec, use_moment_form=True), single, True)


def second_dir_tildeJ(n: int, f: BumpSum, x, t: float, omega, spec: QuadSpec = DEFAULT_SPEC):
    _check_t(t)
    X, single = _as_points(x, n)
    pref, chain = tilde_j_chain(n, t)
    return _finish(_second_chain(n, pref, chain, f, X, t, _unit(omega, n), spec), single, False)


# ---------------------------------------------------------------------------
# derivatives of the wave-type terms (gradient moved onto the data)


def grad_tildeW(n: int, f: BumpSum, g: BumpSum, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    _check_t(t)
    X, single = _as_points(x, n)
    if n == 1:
        h = f + g
        res = 0.5 * (initdata.eval(h, X + t) - initdata.eval(h, X - t))
        res = np.atleast_1d(res)[:, None] + 0.5 * (initdata.grad(f, X + t) + initdata.grad(f, X - t))
        return _finish(res, single, True)
    norm = _wave_norm(n, t)
    # second derivatives of the bumps are steep near their edges: refine
    fine = replace(spec, radial_order=2 * spec.radial_order, angular_order=2 * spec.angular_order)
    gw_g = _wave_raw(n, g, X, t, ["grad"], fine)["grad"]
    fw = _wave_raw(n, f, X, t, ["grad", "hess_mom"], fine)
    if n == 2:
        hat = c_n(2) * t / 4.0
    else:
        hat = c_n(3) / 8.0
    res = norm * (0.5 * fw["grad"] + gw_g) + hat * fw["grad"] + norm / t * (fw["grad"] + fw["hess_mom"])
    return _finish(res, single, True)


def second_dir_tildeW(n, f, g, x, t, omega, step: float = 1e-5, spec: QuadSpec = DEFAULT_SPEC):
    """(omega . grad)^2 tildeW by central differencing of the analytic gradient."""
    X, single = _as_points(x, n)
    w = _unit(omega, n)
    gp = grad_tildeW(n, f, g, X + step * w, t, spec)
    gm = grad_tildeW(n, f, g, X - step * w, t, spec)
    res = ((gp - gm) @ w) / (2 * step)
    return _finish(np.atleast_1d(res), single, False)


def grad_u(setup: ProblemSetup, x, t: float, spec: QuadSpec = DEFAULT_SPEC):
    """grad J_n h + grad tildeJ_n f + e^{-t/2} grad tildeW_n(f, g)."""
    n = setup.dim
    _check_t(t)
    X, single = _as_points(x, n)
    res = grad_J(n, setup.h, X, t, spec)
    if not setup.f.is_zero():
        res = res + grad_tildeJ(n, setup.f, X, t, spec)
    et = math.exp(-0.5 * t)
    if et > 0:
        res = res + et * grad_tildeW(n, setup.f, setup.g, X, t, spec)
    return _finish(res, single, True)


def second_dir_u(setup: ProblemSetup, x, t: float, omega, spec: QuadSpec = DEFAULT_SPEC):
    n = setup.dim
    X, single = _as_points(x, n)
    res = second_dir_J(n, setup.h, X, t, omega, spec)
    if not setup.f.is_zero():
        res = res + second_dir_tildeJ(n, setup.f, X, t, omega, spec)
    et = math.exp(-0.5 * t)
    if et > 0:
        res = res + et * second_dir_tildeW(n, setup.f, setup.g, X, t, omega, spec=spec)
    return _finish(np.atleast_1d(res), single, False)


# ---------------------------------------------------------------------------
# dense evaluation


@dataclass
class FieldGrid:
    lo: np.ndarray
    hi: np.ndarray
    resolution: tuple
    values: np.ndarray  # flattened, C order (first axis slowest)
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.values.size != int(np.prod(self.resolution)):
            raise ValueError("value count must equal the product of resolutions")

    def axes(self):
        return [np.linspace(self.lo[k], self.hi[k], self.resolution[k]) for k in range(len(self.resolution))]

    def nodes(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def to_csv(self) -> str:
        n = len(self.resolution)
        names = ["x", "y", "z"][:n]
        lines = [",".join(names + ["value"])]
        for p, v in zip(self.nodes(), self.values):
            lines.append(",".join(f"{c:.10g}" for c in p) + f",{v:.17g}")
        return "\n".join(lines) + "\n"

    def header(self) -> dict:
        return {
            "lo": [float(v) for v in self.lo],
            "hi": [float(v) for v in self.hi],
            "resolution": list(self.resolution),
            **self.meta,
        }

    def to_json(self) -> str:
        return json.dumps({"header": self.header(), "values": [float(repr_round(v)) for v in self.values]}, sort_keys=True)


def repr_round(v: float) -> float:
    return float(f"{v:.17g}")


def setup_hash(setup: ProblemSetup) -> str:
    return hashlib.sha256(setup.to_json().encode()).hexdigest()[:16]


def field(setup: ProblemSetup, part, t: float, box, resolution, spec: QuadSpec = DEFAULT_SPEC) -> FieldGrid:
    """Evaluate ``part`` on an axis-aligned grid ``box = (lo, hi)``."""
    part = Part.parse(part) if isinstance(part, str) else Part(part)
    lo, hi = (np.asarray(b, dtype=float).reshape(setup.dim) for b in box)
    if np.any(hi <= lo):
        raise ValueError("box must be non-degenerate")
    res = tuple(int(r) for r in np.broadcast_to(resolution, (setup.dim,)))
    grid = FieldGrid(lo, hi, res, np.zeros(int(np.prod(res))))
    pts = grid.nodes()
    grid.values = np.asarray(evaluate_part(setup, part, pts, t, spec), dtype=float).reshape(-1)
    grid.meta = {"t": float(t), "part": part.value, "setup_hash": setup_hash(setup)}
    return grid
