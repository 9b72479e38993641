"""Deterministic quadrature: intervals, balls, spheres and the 1/sqrt(t^2-r^2) weight.

Two layers live here.

* General-purpose integrators (``integrate_interval``, ``integrate_ball``,
  ``integrate_sphere``, ``integrate_ball_chebweight``) that take an arbitrary
  vectorised integrand and refine until a tolerance is met.
* ``BumpRule``: fixed polar rules centred at evaluation points and aligned with
  one radial bump.  For data that is radially symmetric about the bump centre,
  the angular integral over a sphere reduces to a single integral in the polar
  angle measured from the bump direction, so ``n``-dimensional integrals cost
  the same as two-dimensional ones.  These rules are vectorised over many
  evaluation points and are what the solution formulas use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "QuadSpec",
    "QuadratureError",
    "gauss_legendre",
    "composite_gauss",
    "integrate_interval",
    "integrate_ball",
    "integrate_sphere",
    "integrate_ball_chebweight",
    "sphere_area",
    "BumpRule",
    "bump_rule",
    "angular_moments",
]


class QuadratureError(ArithmeticError):
    """Tolerance not met after the maximum refinement depth."""


@dataclass(frozen=True)
class QuadSpec:
    target_abs_tol: float = 1e-9
    target_rel_tol: float = 1e-9
    max_refinement_depth: int = 14
    base_order: int = 16
    # fixed orders of the per-bump polar rules used by the solution formulas
    radial_order: int = 40
    angular_order: int = 64

    def __post_init__(self):
        if not (self.target_abs_tol > 0 and self.target_rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 <= self.max_refinement_depth <= 20):
            raise ValueError("max_refinement_depth must lie in [0, 20]")
        if self.base_order < 1 or self.radial_order < 2 or self.angular_order < 2:
            raise ValueError("quadrature orders must be positive")

    def with_tol(self, tol: float) -> "QuadSpec":
        return replace(self, target_abs_tol=tol, target_rel_tol=tol)


DEFAULT_SPEC = QuadSpec()


@lru_cache(maxsize=64)
def _gl(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(order: int, a: float = -1.0, b: float = 1.0):
    """Nodes and weights of the ``order``-point Gauss-Legendre rule on [a, b]."""
    x, w = _gl(order)
    h = 0.5 * (b - a)
    return a + h * (x + 1.0), h * w


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere S^k in R^{k+1} (S^0 counts two points)."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def _vec(fn):
    """Call ``fn`` on an array, falling back to element-wise evaluation."""

    def call(x):
        try:
            y = np.asarray(fn(x), dtype=float)
            if y.shape == np.shape(x):
                return y
        except Exception:  # scalar-only integrand
            pass
        return np.array([float(fn(xi)) for xi in np.ravel(x)]).reshape(np.shape(x))

    return call


def composite_gauss(fn, a: float, b: float, panels: int, order: int) -> float:
    """Fixed composite Gauss-Legendre rule with equal panels."""
    f = _vec(fn)
    edges = np.linspace(a, b, panels + 1)
    x, w = _gl(order)
    h = 0.5 * np.diff(edges)
    nodes = edges[:-1, None] + h[:, None] * (x[None, :] + 1.0)
    vals = f(nodes.ravel()).reshape(nodes.shape)
    return math.fsum((vals * w[None, :] * h[:, None]).ravel())


def integrate_interval(fn: Callable, a: float, b: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Adaptive Gauss-Legendre with panel bisection.

    A panel is accepted when the whole-panel estimate and the sum of its two
    halves agree to the panel's share of the tolerance.
    """
    if b < a:
        raise ValueError("integrate_interval needs a <= b")
    if b == a:
        return 0.0
    f = _vec(fn)
    x, w = _gl(spec.base_order)

    def rule(lo, hi):
        h = 0.5 * (hi - lo)
        return math.fsum(h * w * f(lo + h * (x + 1.0)))

    total_len = b - a
    whole = rule(a, b)
    accepted: list[tuple[float, float]] = []
    stack = [(a, b, whole, 0)]
    scale = abs(whole)
    while stack:
        lo, hi, val, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = rule(lo, mid), rule(mid, hi)
        refined = left + right
        share = (hi - lo) / total_len
        tol = max(spec.target_abs_tol, spec.target_rel_tol * scale) * max(share, 1e-3)
        if abs(refined - val) <= tol:
            accepted.append((lo, refined))
            continue
        if depth >= spec.max_refinement_depth:
            raise QuadratureError(
                f"integrate_interval: tolerance not met on [{lo}, {hi}] after depth {depth}"
            )
        stack.append((mid, hi, right, depth + 1))
        stack.append((lo, mid, left, depth + 1))
    accepted.sort()
    return math.fsum(v for _, v in accepted)


# ---------------------------------------------------------------------------
# general-purpose ball and sphere integrators (order doubling)


def _support_radii(center, support, n):
    """Radial window [rmin, rmax] about ``center`` covering a union of balls."""
    if not support:
        return 0.0, math.inf
    lo, hi = math.inf, 0.0
    for c, rho in support:
        d = float(np.linalg.norm(np.asarray(c, float).reshape(n) - center))
        lo = min(lo, max(0.0, d - rho))
        hi = max(hi, d + rho)
    return lo, hi


def _directions(n, n_theta, n_phi):
    """Product angular rule on S^{n-1}: returns unit vectors (K, n) and weights (K,)."""
    if n == 2:
        ang = 2 * np.pi * np.arange(n_phi) / n_phi
        return np.stack([np.cos(ang), np.sin(ang)], axis=1), np.full(n_phi, 2 * np.pi / n_phi)
    mu, wmu = gauss_legendre(n_theta, -1.0, 1.0)
    ang = 2 * np.pi * np.arange(n_phi) / n_phi
    s = np.sqrt(1 - mu**2)
    dirs = np.stack(
        [
            (s[:, None] * np.cos(ang)[None, :]).ravel(),
            (s[:, None] * np.sin(ang)[None, :]).ravel(),
            np.repeat(mu, n_phi),
        ],
        axis=1,
    )
    wts = (wmu[:, None] * np.full(n_phi, 2 * np.pi / n_phi)[None, :]).ravel()
    return dirs, wts


MAX_NODES = 2**23  # per estimate; 2D level 7, 3D level 4; deeper levels exhaust memory


def _converge(estimate, spec, what, nodes=None):
    """Double the rule until two successive estimates agree.

    ``nodes(level)`` (optional) gives the node count of a level; the
    refinement stops with QuadratureError before exceeding MAX_NODES.
    """
    prev = None
    for level in range(spec.max_refinement_depth + 1):
        if nodes is not None and nodes(level) > MAX_NODES:
            raise QuadratureError(f"{what}: tolerance not met within {MAX_NODES} nodes (level {level})")
        val = estimate(level)
        if prev is not None and abs(val - prev) <= max(
            spec.target_abs_tol, spec.target_rel_tol * abs(val)
        ):
            return val
        prev = val
    raise QuadratureError(f"{what}: tolerance not met after {spec.max_refinement_depth} doublings")


def _support_cone(center, support, n):
    """(axis, half-angle) of a cone from ``center`` covering every support ball.

    None when the centre lies in a support ball or no cone narrower than a
    half-space covers them.
    """
    if not support:
        return None
    offs = [np.asarray(c, float).reshape(n) - center for c, _ in support]
    dists = [float(np.linalg.norm(o)) for o in offs]
    if any(d <= rho for d, (_, rho) in zip(dists, support)):
        return None
    axis = sum(o / d for o, d in zip(offs, dists))
    norm = float(np.linalg.norm(axis))
    if norm < 1e-12:
        return None
    axis = axis / norm
    half = max(
        math.acos(min(1.0, max(-1.0, float(axis @ o) / d))) + math.asin(rho / d)
        for o, d, (_, rho) in zip(offs, dists, support)
    )
    return (axis, half) if half < 0.5 * math.pi else None


def _cone_directions(n, axis, half, m, m_polar=None):
    """Gauss rule in the polar angle (uniform in azimuth) on a spherical cap.

    ``m`` polar nodes per side in 2D; in 3D ``m`` azimuthal and ``m_polar``
    (default ``m``) polar nodes.
    """
    th, wth = gauss_legendre(m if n == 2 or m_polar is None else m_polar, 0.0, half)
    frame = _orthonormal_frame(axis)
    if n == 2:
        dirs = np.concatenate(
            [np.cos(th)[:, None] * axis + sgn * np.sin(th)[:, None] * frame[:, 0] for sgn in (1, -1)]
        )
        return dirs, np.concatenate([wth, wth])
    ang = 2 * np.pi * np.arange(m) / m
    st, ct = np.sin(th), np.cos(th)
    dirs = (
        ct[:, None, None] * axis
        + st[:, None, None] * (np.cos(ang)[None, :, None] * frame[:, 0] + np.sin(ang)[None, :, None] * frame[:, 1])
    ).reshape(-1, 3)
    wts = ((wth * st)[:, None] * np.full(m, 2 * np.pi / m)[None, :]).ravel()
    return dirs, wts


def integrate_ball(
    n: int,
    center,
    radius: float,
    integrand: Callable,
    spec: QuadSpec = DEFAULT_SPEC,
    support: Sequence | None = None,
) -> float:
    """Integral of ``integrand`` (points of shape (..., n) -> values) over B_radius(center).

    ``support`` is an optional list of ``(centre, radius)`` balls outside which
    the integrand vanishes; the radial range is clipped to it, and when the
    centre lies outside every ball the angular range shrinks to a covering cone.

    Radial panels and angular nodes are doubled together, so small bumps far
    from the centre converge slowly; in 3D a relative tolerance near 1e-6 is
    the practical limit under the node cap.  The fixed per-bump rules of
    ``bump_rule`` are the accurate path for bump data.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float).reshape(n)
    rmin, rmax = _support_radii(center, support, n)
    rmax = min(rmax, radius)
    if rmax <= rmin:
        return 0.0
    if n == 1:
        f = lambda y: np.asarray(integrand(np.asarray(y)[..., None]), dtype=float)  # noqa: E731
        total = 0.0
        for sgn in (1.0, -1.0):
            total += integrate_interval(
                lambda r: f(center[0] + sgn * r), rmin, rmax, spec
            )
        return total
    if n not in (2, 3):
        raise ValueError("integrate_ball supports n = 1, 2, 3")
    cone = _support_cone(center, support, n)

    def estimate(level):
        panels = 2**level
        n_ang = 16 * 2**level
        if cone is None:
            dirs, wts = _directions(n, max(8, n_ang // 2), n_ang)
        else:
            dirs, wts = _cone_directions(n, *cone, n_ang, max(8, n_ang // 2))
        edges = np.linspace(rmin, rmax, panels + 1)
        x, w = _gl(spec.base_order)
        h = 0.5 * np.diff(edges)
        r = (edges[:-1, None] + h[:, None] * (x[None, :] + 1.0)).ravel()
        wr = (h[:, None] * w[None, :]).ravel() * r ** (n - 1)
        pts = center + r[:, None, None] * dirs[None, :, :]
        vals = np.asarray(integrand(pts), dtype=float)
        return math.fsum((vals * wr[:, None] * wts[None, :]).ravel())

    def nodes(level):
        m = 16 * 2**level
        if n == 2:
            per_shell = m if cone is None else 2 * m
        else:
            per_shell = m * max(8, m // 2)
        return 2**level * spec.base_order * per_shell

    return _converge(estimate, spec, "integrate_ball", nodes)


def integrate_sphere(
    n: int,
    center,
    radius: float,
    integrand: Callable,
    spec: QuadSpec = DEFAULT_SPEC,
    support: Sequence | None = None,
) -> float:
    """Surface integral over S_radius(center) in R^n, n in {2, 3}.

    With a single support ball the rule is aligned with the cap the sphere cuts
    out of it, which resolves small caps without global refinement.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if n not in (2, 3):
        raise ValueError("integrate_sphere supports n = 2, 3")
    center = np.asarray(center, dtype=float).reshape(n)
    if support is not None and len(support) == 1:
        c, rho = support[0]
        c = np.asarray(c, dtype=float).reshape(n)
        d = float(np.linalg.norm(c - center))
        if d > 0:
            gam = (radius**2 + d**2 - rho**2) / (2 * radius * d)
            if gam >= 1.0:
                return 0.0
            theta_max = math.acos(max(gam, -1.0))
            e = (c - center) / d
            return _cap_integral(n, center, radius, e, theta_max, integrand, spec)
        if radius >= rho:
            return 0.0

    def estimate(level):
        n_ang = 16 * 2**level
        dirs, wts = _directions(n, max(8, n_ang // 2), n_ang)
        vals = np.asarray(integrand(center + radius * dirs), dtype=float)
        return math.fsum(vals * wts) * radius ** (n - 1)

    def nodes(level):
        n_ang = 16 * 2**level
        return n_ang if n == 2 else n_ang * max(8, n_ang // 2)

    return _converge(estimate, spec, "integrate_sphere", nodes)


def _orthonormal_frame(e):
    """Columns completing the unit vector(s) ``e`` (..., n) to an orthonormal basis."""
    e = np.asarray(e, dtype=float)
    n = e.shape[-1]
    if n == 1:
        return np.zeros(e.shape[:-1] + (1, 0))
    if n == 2:
        return np.stack([-e[..., 1], e[..., 0]], axis=-1)[..., :, None]
    helper = np.where(np.abs(e[..., :1]) < 0.9, np.eye(3)[0], np.eye(3)[1])
    u = helper - np.sum(helper * e, axis=-1, keepdims=True) * e
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    v = np.cross(e, u)
    return np.stack([u, v], axis=-1)


def _cap_integral(n, center, radius, e, theta_max, integrand, spec):
    def estimate(level):
        dirs, wts = _cone_directions(n, e, theta_max, 16 * 2**level)
        vals = np.asarray(integrand(center + radius * dirs), dtype=float)
        return math.fsum(vals * wts) * radius ** (n - 1)

    def nodes(level):
        m = 16 * 2**level
        return 2 * m if n == 2 else m * m

    return _converge(estimate, spec, "integrate_sphere", nodes)


def integrate_ball_chebweight(
    n: int,
    center,
    t: float,
    g: Callable,
    spec: QuadSpec = DEFAULT_SPEC,
    support: Sequence | None = None,
) -> float:
    """``int_{B_t(center)} g(y) / sqrt(t^2 - |y - center|^2) dy`` for n = 2.

    The substitution r = t sin u turns dr / sqrt(t^2 - r^2) into du, so the rim
    singularity disappears exactly.
    """
    if n != 2:
        raise ValueError("integrate_ball_chebweight is defined for n = 2")
    if t <= 0:
        raise ValueError("t must be positive")
    center = np.asarray(center, dtype=float).reshape(2)
    rmin, rmax = _support_radii(center, support, 2)
    rmax = min(rmax, t)
    if rmax <= rmin:
        return 0.0
    u0, u1 = math.asin(min(rmin / t, 1.0)), math.asin(min(rmax / t, 1.0))

    def estimate(level):
        panels = 2**level
        n_ang = 16 * 2**level
        dirs, wts = _directions(2, 0, n_ang)
        edges = np.linspace(u0, u1, panels + 1)
        x, w = _gl(spec.base_order)
        h = 0.5 * np.diff(edges)
        u = (edges[:-1, None] + h[:, None] * (x[None, :] + 1.0)).ravel()
        wu = (h[:, None] * w[None, :]).ravel()
        r = t * np.sin(u)
        pts = center + r[:, None, None] * dirs[None, :, :]
        vals = np.asarray(g(pts), dtype=float)
        return math.fsum((vals * (wu * r)[:, None] * wts[None, :]).ravel())

    def nodes(level):
        return 2**level * spec.base_order * 16 * 2**level

    return _converge(estimate, spec, "integrate_ball_chebweight", nodes)


# ---------------------------------------------------------------------------
# per-bump polar rules (vectorised over evaluation points)


@dataclass
class BumpRule:
    """Polar rule about each evaluation point, restricted to one bump ball.

    Shapes: ``M`` evaluation points, ``Nr`` radial nodes, ``Na`` angular nodes.
    ``wr`` already contains ``r^{n-1}`` (or ``t^{n-1}`` on a sphere) and is zero
    where the bump does not meet the region.  ``rim`` is sqrt(t^2 - r^2) for
    ball rules (accurate near the rim).  ``wu`` are the weights for the measure
    dr / sqrt(t^2 - r^2) times r^{n-1}.
    """

    n: int
    r: np.ndarray  # (M, Nr)
    wr: np.ndarray  # (M, Nr)
    wu: np.ndarray | None  # (M, Nr)
    rim: np.ndarray | None  # (M, Nr)
    mu: np.ndarray  # (M, Nr, Na)
    wa: np.ndarray  # (M, Nr, Na)
    d: np.ndarray  # (M,)
    e: np.ndarray  # (M, n)


def _radial(lo, hi, mode, t, Nr, n):
    """Radial Gauss nodes on [lo, hi] per point; ball mode uses r = t sin u."""
    valid = hi > lo
    xg, wg = _gl(Nr)
    if mode == "full":
        b = np.where(valid, hi, lo + 1.0)
        half = 0.5 * (b - lo)
        r = lo[:, None] + half[:, None] * (xg[None, :] + 1.0)
        wr = half[:, None] * wg[None, :] * r ** (n - 1)
        return r, np.where(valid[:, None], wr, 0.0), None, None
    tt = float(t)
    u0 = np.arcsin(np.clip(lo / tt, 0.0, 1.0))
    u1 = np.arcsin(np.clip(hi / tt, 0.0, 1.0))
    u1 = np.where(valid, u1, np.minimum(u0 + 1e-3, 0.5 * np.pi))
    half = 0.5 * (u1 - u0)
    u = u0[:, None] + half[:, None] * (xg[None, :] + 1.0)
    r = tt * np.sin(u)
    rim = tt * np.cos(u)
    wu = half[:, None] * wg[None, :] * r ** (n - 1)
    wr = wu * rim
    return r, np.where(valid[:, None], wr, 0.0), np.where(valid[:, None], wu, 0.0), rim


def bump_rule(
    X: np.ndarray,
    center,
    radius: float,
    mode: str,
    t: float | None = None,
    spec: QuadSpec = DEFAULT_SPEC,
) -> BumpRule:
    """Build the rule for points ``X`` (M, n) and the ball B_radius(center).

    ``mode`` is ``"ball"`` (region B_t(x)), ``"full"`` (all of R^n) or
    ``"sphere"`` (the sphere S_t(x)).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    M, n = X.shape
    c = np.asarray(center, dtype=float).reshape(n)
    diff = c - X
    d = np.linalg.norm(diff, axis=1)
    tiny = d <= 1e-300
    e = np.where(tiny[:, None], np.eye(n)[0], diff / np.where(tiny, 1.0, d)[:, None])
    R = float(radius)
    Nr = 1 if mode == "sphere" else spec.radial_order * (3 if n == 1 else 1)  # 1D rules are cheap
    Na = spec.angular_order

    if mode == "sphere":
        r = np.full((M, 1), float(t))
        valid = (np.abs(d - R) < t) & (t < d + R) | ((d < R) & (t < R - d))
        wr = np.where(valid, float(t) ** (n - 1), 0.0)[:, None]
        wu = rim = None
        if n == 1:
            r = np.repeat(r, 2, axis=1)
            wr = np.repeat(wr, 2, axis=1)
    else:
        lo = np.maximum(0.0, d - R)
        hi = d + R if mode == "full" else np.minimum(float(t), d + R)
        top = np.maximum(hi, lo)
        if n == 1:
            # the side facing the bump: break at the bump centre
            breaks = [lo, np.clip(d, lo, top), top]
        else:
            # the radial profile is flat but not analytic at r = |R - d| (inside
            # the ball the far side of the sphere leaves the support there).
            # Breaks at |R - d| and halfway to the top keep the panel layout
            # continuous in d; for d >= R the first two panels are empty.
            # The extra break at 80% of [lo, |R - d|] grades the rule towards
            # the flat edge, which matters when x sits near the bump centre.
            b1 = np.clip(np.abs(R - d), lo, top)
            breaks = [lo, lo + 0.8 * (b1 - lo), b1, 0.5 * (b1 + top), top]
        parts = [_radial(a, b, mode, t, Nr, n) for a, b in zip(breaks[:-1], breaks[1:])]
        r, wr = (np.concatenate([p[k] for p in parts], axis=1) for k in (0, 1))
        wu = rim = None
        if mode != "full":
            wu, rim = (np.concatenate([p[k] for p in parts], axis=1) for k in (2, 3))
        Nr = len(parts) * Nr
        if n == 1:
            # away from the bump centre only [0, R - d] can meet the support
            hi2 = np.maximum(0.0, R - d)
            if mode != "full":
                hi2 = np.minimum(float(t), hi2)
            r2, wr2, wu2, rim2 = _radial(np.zeros(M), hi2, mode, t, Nr, n)
            r = np.concatenate([r, r2], axis=1)
            wr = np.concatenate([wr, wr2], axis=1)
            if wu is not None:
                wu = np.concatenate([wu, wu2], axis=1)
                rim = np.concatenate([rim, rim2], axis=1)

    if n == 1:
        # S^0 = {+1, -1}: first half of the radial nodes looks towards the bump
        half_n = r.shape[1] // 2
        mu = np.ones(r.shape + (1,))
        mu[:, half_n:, 0] = -1.0
        wa = np.ones_like(mu)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            gam = (r**2 + d[:, None] ** 2 - R * R) / (2.0 * r * d[:, None])
        gam = np.where(np.isnan(gam), -1.0, gam)
        theta_max = np.arccos(np.clip(gam, -1.0, 1.0))
        xa, wa0 = _gl(Na)
        th = 0.5 * theta_max[..., None] * (xa + 1.0)
        wa = 0.5 * theta_max[..., None] * wa0
        mu = np.cos(th)
        wa = wa * sphere_area(n - 2) * np.sin(th) ** (n - 2)
    return BumpRule(n=n, r=r, wr=wr, wu=wu, rim=rim, mu=mu, wa=wa, d=d, e=e)


def angular_moments(rule: BumpRule, profile, kinds: Sequence[str], omega=None) -> dict:
    """Angular integrals of bump-derived integrands at every radial node.

    ``profile(q)`` returns ``(P, P', P'')`` of the bump as a function of the
    squared distance q to its centre.  Vector-valued kinds return their
    component along ``rule.e`` (the other components integrate to zero).

    Kinds (``y`` integration point, ``x`` evaluation point, ``phi`` the bump):

    ``val``        phi(y)
    ``mom1``       phi(y) (x - y)                         [e-component]
    ``mom2``       phi(y) (omega.(x - y))^2
    ``grad``       grad phi(y)                            [e-component]
    ``wgrad_mom``  (omega.grad phi(y)) (omega.(y - x))
    ``rgrad``      (y - x).grad phi(y)
    ``hess_mom``   Hess phi(y) (y - x)                    [e-component]
    """
    n = rule.n
    r = rule.r[..., None]
    d = rule.d[:, None, None]
    mu = rule.mu
    q = np.maximum(r * r + d * d - 2.0 * r * d * mu, 0.0)
    need_deriv = any(k in ("grad", "wgrad_mom", "rgrad", "hess_mom") for k in kinds)
    need_second = "hess_mom" in kinds
    P, P1, P2 = profile(q, need_deriv, need_second)
    out = {}
    if omega is not None:
        a = np.sum(np.asarray(omega, float)[None, :] * rule.e, axis=1)[:, None, None] if np.ndim(omega) == 1 else np.sum(np.asarray(omega, float) * rule.e, axis=1)[:, None, None]
        a2 = a * a
        perp = (1.0 - mu * mu) * (1.0 - a2) / max(n - 1, 1)
        quad = a2 * mu * mu + perp  # average of (omega.theta)^2 over the orthogonal sphere
    for k in kinds:
        if k == "val":
            f = P
        elif k == "mom1":
            f = -r * mu * P
        elif k == "mom2":
            f = P * r * r * quad
        elif k == "grad":
            f = 2.0 * P1 * (r * mu - d)
        elif k == "wgrad_mom":
            f = 2.0 * P1 * (r * r * quad - d * r * a2 * mu)
        elif k == "rgrad":
            f = 2.0 * P1 * (r * r - r * d * mu)
        elif k == "hess_mom":
            f = 4.0 * P2 * (r * r - r * d * mu) * (r * mu - d) + 2.0 * P1 * r * mu
        else:
            raise ValueError(f"unknown moment kind {k!r}")
        out[k] = np.sum(f * rule.wa, axis=-1)
    return out
