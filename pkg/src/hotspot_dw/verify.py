"""Independent checks: a finite-difference damped-wave solver, the PDE residual of
the explicit solution, decay-rate fits, and a descent-route oracle for S_3.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import interpolate, optimize, special

from . import initdata, pde
from .initdata import BumpSum, ProblemSetup
from .quadrature import DEFAULT_SPEC, QuadSpec, bump_rule, angular_moments

__all__ = [
    "FDConfig",
    "FDResult",
    "FDError",
    "fd_solve",
    "compare_oracle",
    "pde_residual",
    "Quantity",
    "DecayFit",
    "decay_fit",
    "sup_norm",
    "solution_S3_descent",
]

log = logging.getLogger(__name__)


class FDError(RuntimeError):
    """CFL violation or the signal reaching the domain boundary."""


# ---------------------------------------------------------------------------
# finite-difference oracle


@dataclass(frozen=True)
class FDConfig:
    dx: float
    T_final: float
    dt: float | None = None  # default 0.9 dx (1D) or 0.9 dx / sqrt 2 (2D), then shrunk to hit T_final
    margin: float = 0.25
    lo: tuple | None = None  # domain box; default from the data support
    hi: tuple | None = None

    def time_step(self, n: int) -> float:
        cfl = 0.9 * self.dx / math.sqrt(n)
        dt = cfl if self.dt is None else self.dt
        if dt > cfl * (1 + 1e-12):
            raise FDError(f"CFL violated: dt = {dt} > {cfl}")
        steps = max(1, math.ceil(self.T_final / dt - 1e-9))
        return self.T_final / steps


@dataclass
class FDResult:
    axes: list
    times: np.ndarray
    frames: list  # u at each saved time, shape per axes

    def interpolant(self, k: int = -1):
        return interpolate.RegularGridInterpolator(tuple(self.axes), self.frames[k], method="cubic")

    def at(self, points, k: int = -1) -> np.ndarray:
        P = np.asarray(points, float).reshape(-1, len(self.axes))
        return self.interpolant(k)(P)


def _laplacian(u, dx):
    """Standard (2n+1)-point Laplacian; the outermost ring is left at zero."""
    lap = np.zeros_like(u)
    inner = tuple(slice(1, -1) for _ in range(u.ndim))
    for ax in range(u.ndim):
        plus, minus = list(inner), list(inner)
        plus[ax] = slice(2, None)
        minus[ax] = slice(None, -2)
        lap[inner] += u[tuple(plus)] - 2 * u[inner] + u[tuple(minus)]
    return lap / (dx * dx)


def fd_solve(n: int, setup: ProblemSetup, config: FDConfig, save_times=None) -> FDResult:
    """Explicit leapfrog for u_tt - Lap u + u_t = 0 with the damping term time-centred.

    Start-up uses u^1 = f + dt g + dt^2/2 (Lap f - g).  Raises :class:`FDError`
    when the signal comes within two cells of the boundary.
    """
    if n not in (1, 2) or setup.dim != n:
        raise ValueError("fd_solve supports n = 1, 2 matching the setup")
    dt = config.time_step(n)
    dx = config.dx
    if config.lo is None:
        hulls = [h for h in (setup.hull_h, setup.hull_f) if not h.empty]
        lo = np.min([h.bounding_box()[0] for h in hulls], axis=0) - config.T_final - config.margin
        hi = np.max([h.bounding_box()[1] for h in hulls], axis=0) + config.T_final + config.margin
    else:
        lo, hi = np.asarray(config.lo, float), np.asarray(config.hi, float)
    axes = []
    for k in range(n):
        m = int(math.ceil((hi[k] - lo[k]) / dx))
        axes.append(lo[k] + dx * np.arange(m + 1))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    f = initdata.eval(setup.f, mesh) if not setup.f.is_zero() else np.zeros(mesh.shape[:-1])
    g = initdata.eval(setup.g, mesh) if not setup.g.is_zero() else np.zeros(mesh.shape[:-1])
    f, g = np.asarray(f, float), np.asarray(g, float)
    steps = int(round(config.T_final / dt))
    save = sorted(set([steps] + [int(round(s / dt)) for s in (save_times or [])]))

    u_prev = f
    u = f + dt * g + 0.5 * dt * dt * (_laplacian(f, dx) - g)
    frames, times = [], []
    if 0 in save:
        frames.append(f.copy())
        times.append(0.0)
    a = 1.0 / (dt * dt) + 0.5 / dt
    b = 1.0 / (dt * dt) - 0.5 / dt
    scale = max(float(np.max(np.abs(f))), float(np.max(np.abs(g))), 1e-300)
    for k in range(1, steps + 1):
        if k in save:
            frames.append(u.copy())
            times.append(k * dt)
        if k == steps:
            break
        u_next = (2.0 * u / (dt * dt) - b * u_prev + _laplacian(u, dx)) / a
        u_prev, u = u, u_next
        if k % 16 == 0 and _edge_max(u) > 1e-12 * scale:
            raise FDError(f"signal reached the boundary at t = {k * dt:.4g}")
    if _edge_max(u) > 1e-12 * scale:
        raise FDError("signal reached the boundary")
    return FDResult(axes, np.array(times), frames)


def _edge_max(u):
    out = 0.0
    for ax in range(u.ndim):
        for idx in (slice(0, 3), slice(-3, None)):
            sl = [slice(None)] * u.ndim
            sl[ax] = idx
            out = max(out, float(np.max(np.abs(u[tuple(sl)]))))
    return out


def compare_oracle(n: int, setup: ProblemSetup, t: float, probe_points, dx: float | None = None, spec: QuadSpec = DEFAULT_SPEC) -> dict:
    """max |FD interpolant - solve_u| over the probe points at time t."""
    dx = dx or (1 / 400 if n == 1 else 1 / 150)
    res = fd_solve(n, setup, FDConfig(dx=dx, T_final=t))
    P = np.asarray(probe_points, float).reshape(-1, n)
    fd = res.at(P)
    ex = np.atleast_1d(pde.solve_u(setup, P, t, spec))
    err = np.abs(fd - ex)
    return {"max_abs_error": float(np.max(err)), "errors": err, "fd": fd, "exact": ex, "dx": dx, "t": t}


# ---------------------------------------------------------------------------
# PDE residual


def pde_residual(setup: ProblemSetup, x, t: float, step: float = 1e-3, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """u_tt - Lap u + u_t from second-order central differences of solve_u."""
    if not t > 2 * step:
        raise ValueError("need t > 2 step")
    n = setup.dim
    x = np.asarray(x, float).reshape(n)
    u_c, u_m, u_p = (pde.solve_u(setup, x[None], tt, spec)[0] for tt in (t, t - step, t + step))
    # spatial stencil x +- step e_k in one vectorised call
    sp = np.concatenate([np.stack([x + step * e, x - step * e]) for e in np.eye(n)])
    us = np.atleast_1d(pde.solve_u(setup, sp, t, spec))
    lap = float(np.sum(us[0::2] + us[1::2] - 2 * u_c)) / step**2
    utt = (u_p - 2 * u_c + u_m) / step**2
    ut = (u_p - u_m) / (2 * step)
    return float(utt - lap + ut)


# ---------------------------------------------------------------------------
# decay fits


class Quantity(enum.Enum):
    J = "J"  # ||J_n(t) g||_inf
    J_MINUS_P = "J_minus_P"  # ||J_n(t) g - P_n(t) g||_inf
    TILDE_J = "TildeJ"  # ||tildeJ_n(t) f||_inf
    FULL_DIFFERENCE = "full_difference"  # ||u - P_n h - e^{-t/2} tildeW||_inf

    @property
    def target_offset(self) -> float:
        """Exponent is -(n/2) - offset."""
        return 0.0 if self is Quantity.J else 1.0


@dataclass
class DecayFit:
    quantity: str
    dim: int
    times: list
    values: list
    slope: float
    intercept: float
    max_residual: float
    target_slope: float
    exterior_envelope: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.times) < 4:
            raise ValueError("a decay fit needs at least 4 samples")
        if max(self.times) < 10 * min(self.times) * (1 - 1e-12):
            raise ValueError("decay-fit times must span at least one decade")

    def to_dict(self) -> dict:
        return asdict(self)


def _field_fn(quantity: Quantity, setup: ProblemSetup, t: float, spec):
    n = setup.dim
    if quantity is Quantity.J:
        return lambda X: pde.heat_part_J(n, setup.h, X, t, spec)
    if quantity is Quantity.J_MINUS_P:
        return lambda X: pde.heat_part_J(n, setup.h, X, t, spec) - pde.heat(n, setup.h, X, t, spec)
    if quantity is Quantity.TILDE_J:
        return lambda X: pde.tilde_J(n, setup.f, X, t, spec)

    def full(X):
        v = pde.solve_u(setup, X, t, spec) - pde.heat(n, setup.h, X, t, spec)
        et = math.exp(-0.5 * t)
        if et > 0:
            v = v - et * pde.tilde_W(n, setup.f, setup.g, X, t, spec)
        return v

    return full


def sup_norm(fun, n: int, lo, hi, per_axis: int) -> tuple[float, np.ndarray]:
    """max |fun| over a box: grid scan followed by a Nelder-Mead polish of the best node."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    axes = [np.linspace(lo[k], hi[k], per_axis) for k in range(n)]
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = np.abs(np.atleast_1d(fun(pts)))
    i = int(np.argmax(vals))
    x0, v0 = pts[i], float(vals[i])
    h = float(np.max((hi - lo) / (per_axis - 1)))
    # step inwards so the simplex stays inside the box
    simplex = np.vstack([x0] + [x0 + h * e * (1.0 if x0[k] + h <= hi[k] else -1.0) for k, e in enumerate(np.eye(n))])
    res = optimize.minimize(
        lambda z: -abs(float(np.atleast_1d(fun(np.asarray(z)[None]))[0])),
        x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
        options={"initial_simplex": simplex, "xatol": 1e-8 * max(1.0, h), "fatol": 1e-15 * max(v0, 1e-300), "maxiter": 300},
    )
    if -res.fun > v0:
        return float(-res.fun), np.asarray(res.x)
    return v0, x0


def decay_fit(
    setup: ProblemSetup,
    quantity,
    times,
    per_axis: int | None = None,
    phi_exponent: float = 2.0 / 3.0,
    spec: QuadSpec = DEFAULT_SPEC,
    mapper: Callable = map,
) -> DecayFit:
    """Least-squares slope of log ||quantity(t)||_inf against log t.

    The sup is taken over CS(h) + phi(t) B (its bounding box); outside that
    region the solution is bounded by an exponential envelope
    exp(-phi(t)^2 / 4t), which is recorded alongside the fit.
    """
    q = Quantity(quantity) if not isinstance(quantity, Quantity) else quantity
    n = setup.dim
    if q is Quantity.TILDE_J and setup.f.is_zero():
        raise ValueError("TildeJ decay needs f != 0")
    per_axis = per_axis or {1: 401, 2: 41, 3: 17}[n]
    lo0, hi0 = setup.hull_h.bounding_box()
    if not setup.f.is_zero():
        lf, hf = setup.hull_f.bounding_box()
        lo0, hi0 = np.minimum(lo0, lf), np.maximum(hi0, hf)
    times = [float(t) for t in times]

    def one(t):
        phi = t**phi_exponent
        v, _ = sup_norm(_field_fn(q, setup, t, spec), n, lo0 - phi, hi0 + phi, per_axis)
        log.info("decay %s t=%g value=%.6e", q.value, t, v)
        return v

    vals = list(mapper(one, times))
    env = [math.exp(-(t**phi_exponent) ** 2 / (4 * t)) for t in times]
    lt, lv = np.log(times), np.log(vals)
    slope, intercept = np.polyfit(lt, lv, 1)
    resid = lv - (slope * lt + intercept)
    return DecayFit(q.value, n, times, vals, float(slope), float(intercept), float(np.max(np.abs(resid))),
                    -0.5 * n - q.target_offset, env)


# ---------------------------------------------------------------------------
# descent-route oracle for S_3


def solution_S3_descent(g: BumpSum, x, t: float, h: float | None = None, spec: QuadSpec | None = None) -> float:
    """S_3(t) g(x) = e^{-t/2} / (4 pi t) d/dt int_{B_t(x)} I_0(sqrt(t^2 - |x-y|^2)/2) g(y) dy.

    Independent of the kernel library: I_0 comes from scipy.special and the
    t-derivative is a five-point difference of the ball integral.
    """
    spec = spec or QuadSpec(radial_order=80, angular_order=96)
    X = np.asarray(x, float).reshape(1, 3)
    h = h or 1e-3 * max(t, 1.0)

    def F(tau):
        tot = 0.0
        for b in g.scaled_bumps():
            rule = bump_rule(X, b.center, b.radius, "ball", tau, spec)
            mom = angular_moments(rule, b.profile, ["val"])["val"]
            tot += float(np.sum(special.i0(0.5 * rule.rim) * rule.wr * mom))
        return tot

    dF = (-F(t + 2 * h) + 8 * F(t + h) - 8 * F(t - h) + F(t - 2 * h)) / (12 * h)
    return math.exp(-0.5 * t) / (4 * math.pi * t) * dF
