"""Spatial maximizers of u(., t): search, tracking and the escape examples.

The search scans a coarse grid over the region that can carry non-zero values
(the union of CS(h) + tB and CS(f) + tB), refines the near-maximal nodes by
gradient ascent with Barzilai-Borwein steps and Armijo backtracking, and then
clusters the survivors.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from . import initdata, pde
from .initdata import Bump, BumpSum, InitDataError, ProblemSetup
from .quadrature import DEFAULT_SPEC, QuadSpec

__all__ = [
    "HotspotSet",
    "TrackRecord",
    "Schedule",
    "Example",
    "EscapeReport",
    "FloorReport",
    "find_hotspots",
    "track",
    "escape_experiment",
    "s_star",
    "concavity_check",
    "floor_check",
    "default_resolution",
]

log = logging.getLogger(__name__)


@dataclass
class HotspotSet:
    t: float
    points: np.ndarray  # (k, n)
    value: float
    cluster_tol: float
    search_region: dict = field(default_factory=dict)
    grad_norms: np.ndarray | None = None

    @property
    def count(self) -> int:
        return int(self.points.shape[0])

    def to_dict(self) -> dict:
        return {
            "t": float(self.t),
            "points": [[float(c) for c in p] for p in self.points],
            "value": float(self.value),
            "cluster_tol": float(self.cluster_tol),
            "search_region": self.search_region,
            "grad_norms": [float(g) for g in (self.grad_norms if self.grad_norms is not None else [])],
        }


@dataclass
class TrackRecord:
    t: float
    sup_dist_to_centroid: float
    inside_hull: bool
    hotspot_count: int
    max_value: float
    min_second_dir: float | None = None
    points: list = field(default_factory=list)

    def __post_init__(self):
        if self.sup_dist_to_centroid < 0:
            raise ValueError("sup_dist_to_centroid must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Schedule:
    times: tuple
    phi_exponent: float = 2.0 / 3.0
    psi_exponent: float = 1.0 / 3.0

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        if not ts:
            raise ValueError("schedule must contain at least one time")
        if any(t < 0 for t in ts) or list(ts) != sorted(ts):
            raise ValueError("schedule times must be non-negative and sorted")
        object.__setattr__(self, "times", ts)
        if not (0 < self.psi_exponent < 0.5 < self.phi_exponent < 1):
            raise ValueError("need 0 < psi_exponent < 1/2 < phi_exponent < 1")

    @classmethod
    def logspace(cls, t0: float, t1: float, count: int, **kw) -> "Schedule":
        return cls(tuple(np.geomspace(t0, t1, count)), **kw)

    def phi(self, t: float) -> float:
        return t**self.phi_exponent

    def psi(self, t: float) -> float:
        return t**self.psi_exponent


# ---------------------------------------------------------------------------
# value / gradient access at one time


def _u_funcs(setup: ProblemSetup, t: float, spec: QuadSpec):
    if t == 0:
        if setup.f.is_zero():
            raise InitDataError("u(., 0) = f vanishes identically; hot spots are undefined")
        return (lambda X: np.atleast_1d(initdata.eval(setup.f, X)), lambda X: initdata.grad(setup.f, X))
    return (
        lambda X: np.atleast_1d(pde.solve_u(setup, X, t, spec)),
        lambda X: np.atleast_2d(pde.grad_u(setup, X, t, spec)),
    )


def default_resolution(n: int) -> int:
    return {1: 801, 2: 61, 3: 25}[n]


def _search_grid(setup: ProblemSetup, t: float, resolution: int):
    hulls = [h for h in (setup.hull_h, setup.hull_f) if not h.empty]
    los, his = zip(*(h.bounding_box() for h in hulls))
    lo = np.min(los, axis=0) - t
    hi = np.max(his, axis=0) + t
    axes = [np.linspace(lo[k], hi[k], resolution) for k in range(setup.dim)]
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    keep = np.zeros(len(pts), dtype=bool)
    for h in hulls:
        keep |= np.atleast_1d(h.contains(pts, tol=t))
    spacing = float(np.max((hi - lo) / (resolution - 1)))
    region = {"lo": lo.tolist(), "hi": hi.tolist(), "resolution": resolution, "spacing": spacing}
    return pts[keep], spacing, region


def _group_nodes(pts, vals, spacing):
    """Connected components of near-maximal nodes (grid neighbours); best node of each."""
    order = np.argsort(-vals, kind="stable")
    pts, vals = pts[order], vals[order]
    label = -np.ones(len(pts), dtype=int)
    reps = []
    for i in range(len(pts)):
        if label[i] >= 0:
            continue
        label[i] = len(reps)
        reps.append(i)
        stack = [i]
        while stack:
            j = stack.pop()
            near = np.nonzero((label < 0) & (np.max(np.abs(pts - pts[j]), axis=1) <= 1.01 * spacing))[0]
            label[near] = label[i]
            stack.extend(near.tolist())
    return pts[reps]


def _ascend(x0, ufun, gfun, refine_tol, max_iter, step0):
    """Gradient ascent with Barzilai-Borwein steps and Armijo backtracking."""
    x = np.array(x0, dtype=float)
    u = float(ufun(x[None])[0])
    g = gfun(x[None])[0]
    alpha = step0 / max(np.linalg.norm(g), 1e-300)
    for _ in range(max_iter):
        gn = float(np.linalg.norm(g))
        if gn <= refine_tol:
            break
        accepted = False
        a = alpha
        for _ in range(40):
            xn = x + a * g
            un = float(ufun(xn[None])[0])
            if un >= u + 1e-4 * a * gn * gn:
                accepted = True
                break
            a *= 0.5
        if not accepted or a * gn < 1e-10:
            break
        gnew = gfun(xn[None])[0]
        s, y = xn - x, gnew - g
        sy = float(s @ y)
        alpha = float(s @ s) / -sy if sy < 0 else 2.0 * a
        x, u, g = xn, un, gnew
    return x, u, float(np.linalg.norm(g))


def find_hotspots(
    setup: ProblemSetup,
    t: float,
    coarse_resolution: int | None = None,
    refine_tol: float | None = None,
    cluster_tol: float | None = None,
    max_iter: int = 60,
    spec: QuadSpec = DEFAULT_SPEC,
) -> HotspotSet:
    """The set of maximizers of u(., t).

    ``refine_tol`` defaults to 1e-8 ||h||_inf (1 + t)^{-n/2-1}, the scale of
    the gradient near the maximum; ``cluster_tol`` defaults to 1e-3 d_h.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    n = setup.dim
    res = coarse_resolution or default_resolution(n)
    hinf = initdata.norms(setup.h)["linf"]
    if refine_tol is None:
        refine_tol = 1e-8 * hinf * (1.0 + t) ** (-0.5 * n - 1.0)
    if cluster_tol is None:
        cluster_tol = 1e-3 * setup.d_h
    ufun, gfun = _u_funcs(setup, t, spec)

    pts, spacing, region = _search_grid(setup, t, res)
    vals = ufun(pts)
    vmax, vmin = float(np.max(vals)), float(np.min(vals))
    near = vals >= vmax - 1e-3 * max(vmax - vmin, 1e-300)
    seeds = _group_nodes(pts[near], vals[near], spacing)
    log.debug("t=%g: %d grid nodes, %d seeds", t, len(pts), len(seeds))

    found = []
    for x0 in seeds:
        x, u, gn = _ascend(x0, ufun, gfun, refine_tol, max_iter, 0.25 * spacing)
        found.append((u, x, gn))
    found.sort(key=lambda r: -r[0])
    best = found[0][0]
    vtol = min(1e-8 * (1 + abs(best)), 1e-6 * abs(best)) if best != 0 else 1e-14
    kept = []
    for u, x, gn in found:
        if u < best - vtol:
            continue
        if all(np.linalg.norm(x - k[1]) >= cluster_tol for k in kept):
            kept.append((u, x, gn))
    return HotspotSet(
        t=float(t),
        points=np.array([k[1] for k in kept]),
        value=float(best),
        cluster_tol=float(cluster_tol),
        search_region=region,
        grad_norms=np.array([k[2] for k in kept]),
    )


def _probe_dirs(n: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0]])
    if n == 2:
        a = np.pi * np.arange(8) / 8
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    v = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [1, -1, 0], [1, 0, 1], [1, 0, -1], [0, 1, 1], [0, 1, -1]], float)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _hull_samples(setup: ProblemSetup, per_axis: int) -> np.ndarray:
    hull = setup.hull_h
    lo, hi = hull.bounding_box()
    axes = [np.linspace(lo[k], hi[k], per_axis) for k in range(setup.dim)]
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    return pts[np.atleast_1d(hull.contains(pts))]


def track(
    setup: ProblemSetup,
    schedule: Schedule,
    concavity: bool = False,
    progress: Callable | None = None,
    mapper: Callable = map,
    **kw,
) -> list[TrackRecord]:
    """find_hotspots at every scheduled time, measured against m_h and CS(h).

    ``mapper`` (an ordered ``map``, e.g. ``Executor.map``) runs the per-time
    searches; the records do not depend on it.
    """
    m = setup.m_h
    hull = setup.hull_h
    out = []
    found = mapper(lambda t: find_hotspots(setup, t, **kw), schedule.times)
    for t, hs in zip(schedule.times, found):
        d = np.linalg.norm(hs.points - m[None, :], axis=1)
        inside = bool(np.all(np.atleast_1d(hull.contains(hs.points, tol=1e-12))))
        sd = None
        if concavity and t > 0:
            sd = concavity_check(setup, t)
        rec = TrackRecord(
            t=float(t),
            sup_dist_to_centroid=float(np.max(d)),
            inside_hull=inside,
            hotspot_count=hs.count,
            max_value=hs.value,
            min_second_dir=sd,
            points=[[float(c) for c in p] for p in hs.points],
        )
        out.append(rec)
        if progress:
            progress(rec)
    return out


# ---------------------------------------------------------------------------
# second-order and floor checks


def concavity_check(setup: ProblemSetup, t: float, probe_points=None, probe_dirs=None, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """min over probes of (omega . grad)^2 u(x, t), x in CS(h)."""
    n = setup.dim
    if probe_points is None:
        probe_points = _hull_samples(setup, {1: 21, 2: 9, 3: 5}[n])
    X = np.atleast_2d(np.asarray(probe_points, float).reshape(-1, n))
    if not np.all(np.atleast_1d(setup.hull_h.contains(X, tol=1e-12))):
        raise ValueError("probe points must lie in CS(h)")
    dirs = _probe_dirs(n) if probe_dirs is None else np.atleast_2d(probe_dirs)
    best = math.inf
    for w in dirs:
        w = np.asarray(w, float) / np.linalg.norm(w)
        v = np.atleast_1d(pde.second_dir_u(setup, X, t, w, spec))
        best = min(best, float(np.min(v)))
    return best


@dataclass
class FloorReport:
    t: float
    min_value: float
    argmin: list
    ratio: float  # t^{n/2} min / ||h||_inf
    argmin_on_boundary: bool
    exterior_max: float  # max |u| outside CS(h) + phi(t) B (sampled)

    def to_dict(self) -> dict:
        return asdict(self)


def floor_check(setup: ProblemSetup, t: float, per_axis: int | None = None, phi_exponent: float = 2.0 / 3.0, spec: QuadSpec = DEFAULT_SPEC) -> FloorReport:
    """Minimum of u over a dense sample of CS(h), and the exterior comparison."""
    n = setup.dim
    per_axis = per_axis or {1: 201, 2: 41, 3: 15}[n]
    hull = setup.hull_h
    X = _hull_samples(setup, per_axis)
    # the hull boundary itself, sampled through the support function
    dirs = initdata.probe_directions(n)
    if n > 1:
        dirs = dirs[:: max(1, len(dirs) // 180)]
    bnd = _hull_boundary(hull, dirs)
    X = np.concatenate([X, bnd])
    u = np.atleast_1d(pde.solve_u(setup, X, t, spec))
    i = int(np.argmin(u))
    hinf = initdata.norms(setup.h)["linf"]
    on_bnd = i >= len(X) - len(bnd) or not hull.contains(X[i], tol=-1e-3 * setup.d_h)
    # exterior: shells at distance phi(t) .. t from the hull along probe directions
    phi = t**phi_exponent
    shells = np.linspace(phi, t, 12) if t > phi else np.array([phi])
    ext = np.concatenate([_hull_boundary(hull, dirs, grow=s) for s in shells])
    ue = np.atleast_1d(pde.solve_u(setup, ext, t, spec))
    return FloorReport(
        t=float(t),
        min_value=float(u[i]),
        argmin=[float(c) for c in X[i]],
        ratio=float(t ** (0.5 * n) * u[i] / hinf),
        argmin_on_boundary=bool(on_bnd),
        exterior_max=float(np.max(np.abs(ue))),
    )


def _hull_boundary(hull, dirs, grow: float = 0.0):
    """Points of the hull boundary (pushed out by ``grow``) in the given normal directions."""
    # the supporting point of a union of balls in direction w is c_i + r_i w for the maximiser i
    i = np.argmax(dirs @ hull.centers.T + hull.radii[None, :], axis=1)
    return hull.centers[i] + (hull.radii[i] + grow)[:, None] * dirs


# ---------------------------------------------------------------------------
# escape examples


def s_star(tol: float = 1e-12) -> float:
    """Critical point of cosh(s/2)/s, i.e. the root of (s/2) tanh(s/2) = 1 in [2, 3]."""
    f = lambda s: 0.5 * s * math.tanh(0.5 * s) - 1.0  # noqa: E731
    lo, hi = 2.0, 3.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class Example(enum.Enum):
    EX1D = "Ex1D"
    EX2D_CRITICAL = "Ex2D_critical"
    EX2D_SMALL_SUPPORT = "Ex2D_small_support"
    EX3D = "Ex3D"

    @classmethod
    def parse(cls, name: str) -> "Example":
        key = name.lower().replace("-", "_")
        for e in cls:
            if e.value.lower() == key or e.name.lower() == key:
                return e
        aliases = {"ex2d_small": cls.EX2D_SMALL_SUPPORT, "ex2d": cls.EX2D_SMALL_SUPPORT}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown example '{name}'")


@dataclass
class EscapeReport:
    example: str
    epsilon: float
    t: float
    witness_points: list
    witness_value: float
    in_hull_max: float
    in_hull_argmax: list
    escape_confirmed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _normalised_bump(n, radius, center=None):
    c = tuple([0.0] * n) if center is None else tuple(center)
    return BumpSum.from_bumps(n, [Bump(c, radius, 1.0)], normalize_l1=1.0)


def _max_over_ball(fun: Callable, n: int, center, radius: float, per_axis: int):
    """Max of ``fun`` over a closed ball: dense grid, then a bounded local polish."""
    c = np.asarray(center, float).reshape(n)
    axes = [np.linspace(-radius, radius, per_axis)] * n
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    pts = c + pts[np.linalg.norm(pts, axis=1) <= radius * (1 + 1e-12)]
    vals = np.atleast_1d(fun(pts))
    i = int(np.argmax(vals))
    x0, v0 = pts[i], float(vals[i])

    def neg(z):
        z = np.asarray(z, float)
        if np.linalg.norm(z - c) > radius:
            return -v0 + 1.0 + np.linalg.norm(z - c)  # outside: worse than anything found
        return -float(np.atleast_1d(fun(z[None]))[0])

    h = 2 * radius / (per_axis - 1)
    simplex = np.vstack([x0] + [x0 + h * e for e in np.eye(n)])
    res = optimize.minimize(neg, x0, method="Nelder-Mead", options={"initial_simplex": simplex, "xatol": 1e-10, "fatol": 1e-14, "maxiter": 400})
    if -res.fun > v0:
        return float(-res.fun), res.x
    return v0, x0


def escape_experiment(example, epsilon: float | None = None, t_probe: float | None = None, spec: QuadSpec = DEFAULT_SPEC) -> EscapeReport:
    """Build one of the four escape constructions and test its witness inequality.

    Ex1D         n = 1, g = 0, f = rho(y/eps)/eps (unit mass, support [-2eps, 2eps]);
                 witnesses x = +-t, default t = 4 eps.
    Ex2D_critical  n = 2, f = 0, g radial with support B_eps(0); the radial
                 profile is maximised on (sqrt(t^2 - s*^2) + eps, t + eps).
    Ex2D_small_support  n = 2, f = 0, g with support diameter d_g = 2 eps,
                 t in [2 d_g, s*]; witness at |x| = t - eps (farthest support
                 point at distance exactly t).
    Ex3D         n = 3, f = 0, g = rho(y/eps)/eps^3; witness |x| = t, default t = 4 eps.
    """
    ex = Example.parse(example) if isinstance(example, str) else Example(example)
    sst = s_star()
    if ex is Example.EX1D:
        eps = 0.02 if epsilon is None else float(epsilon)
        t = 4 * eps if t_probe is None else float(t_probe)
        if not (eps > 0 and t >= 4 * eps):
            raise InitDataError("Ex1D needs epsilon > 0 and t >= 4 epsilon")
        f = _normalised_bump(1, 2 * eps)
        setup = ProblemSetup(f, BumpSum.zero(1))
        U = lambda X: np.atleast_1d(pde.solve_u(setup, X, t, spec))  # noqa: E731
        wit = np.array([[t], [-t]])
        wv = U(wit)
        vmax, arg = _max_over_ball(U, 1, [0.0], 2 * eps, 801)
        return EscapeReport(ex.value, eps, t, wit.tolist(), float(np.min(wv)), vmax, np.atleast_1d(arg).tolist(), bool(np.min(wv) > vmax))

    if ex is Example.EX3D:
        eps = 0.02 if epsilon is None else float(epsilon)
        t = 4 * eps if t_probe is None else float(t_probe)
        if not (eps > 0 and t > 2 * eps):
            raise InitDataError("Ex3D needs t > 2 epsilon")
        g = _normalised_bump(3, 2 * eps)
        setup = ProblemSetup(BumpSum.zero(3), g)
        U = lambda X: np.atleast_1d(pde.solution_S(3, g, X, t, spec))  # noqa: E731
        wit = np.array([[t, 0.0, 0.0], [0.0, 0.0, -t]])
        wv = U(wit)
        vmax, arg = _max_over_ball(U, 3, [0.0] * 3, 2 * eps, 21)
        cap = pde.wave_part_W(3, g, wit[0], t, spec) * math.exp(-0.5 * t)
        extra = {"wave_term_at_witness": float(cap), "sphere_lower_bound": float(eps**2 * math.exp(-0.5 * t) / (8 * t) * initdata.norms(g)["linf"])}
        return EscapeReport(ex.value, eps, t, wit.tolist(), float(np.min(wv)), vmax, np.atleast_1d(arg).tolist(), bool(np.min(wv) > vmax), extra)

    if ex is Example.EX2D_SMALL_SUPPORT:
        eps = 0.25 if epsilon is None else float(epsilon)  # support radius; d_g = 2 eps
        d_g = 2 * eps
        t = 1.5 if t_probe is None else float(t_probe)
        if not 2 * d_g < sst:
            raise InitDataError("Ex2D_small_support needs 2 d_g < s_*")
        if not (2 * d_g <= t <= sst):
            raise InitDataError("Ex2D_small_support needs 2 d_g <= t <= s_*")
        g = _normalised_bump(2, eps)
        U = lambda X: np.atleast_1d(pde.solution_S(2, g, X, t, spec))  # noqa: E731
        a = np.pi * np.arange(4) / 2
        rad = t - eps
        wit = rad * np.stack([np.cos(a), np.sin(a)], axis=1)
        wv = U(wit)
        vmax, arg = _max_over_ball(U, 2, [0.0, 0.0], eps, 41)
        extra = {"d_g": d_g, "s_star": sst, "witness_radius": rad}
        return EscapeReport(ex.value, eps, t, wit.tolist(), float(np.min(wv)), vmax, np.atleast_1d(arg).tolist(), bool(np.min(wv) > vmax), extra)

    # Ex2D_critical
    eps = 0.1 if epsilon is None else float(epsilon)
    if not 2 * eps < sst:
        raise InitDataError("Ex2D_critical needs 2 epsilon < s_*")
    t_hi = (sst**2 + 4 * eps**2) / (4 * eps)
    t = 0.5 * (sst + min(t_hi, sst + 2.0)) if t_probe is None else float(t_probe)
    if not (sst <= t <= t_hi):
        raise InitDataError(f"Ex2D_critical needs s_* <= t <= {t_hi:.6g}")
    g = _normalised_bump(2, eps)
    prof = lambda rho: np.atleast_1d(pde.solution_S(2, g, np.stack([np.atleast_1d(rho), np.zeros(np.size(rho))], axis=1), t, spec))  # noqa: E731
    r0 = math.sqrt(t * t - sst * sst) + eps
    r1 = t + eps
    grid = np.linspace(r0, r1, 401)
    vals = prof(grid)
    k = int(np.argmax(vals))
    lo_b, hi_b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda r: -prof(r)[0], bounds=(lo_b, hi_b), method="bounded", options={"xatol": 1e-10})
    ring, ring_val = float(res.x), float(-res.fun)
    interior = ring_val > vals[0] and ring_val > vals[-1] and r0 < ring < r1
    # global radial argmax over [0, t + eps]
    gg = np.linspace(0.0, r1, 801)
    gv = prof(gg)
    vmax, arg = _max_over_ball(lambda X: np.atleast_1d(pde.solution_S(2, g, X, t, spec)), 2, [0.0, 0.0], eps, 41)
    extra = {
        "s_star": sst,
        "t_range": [sst, t_hi],
        "threshold_radius": r0,
        "ring_radius": ring,
        "ring_value": ring_val,
        "ring_is_interior_max": bool(interior),
        "global_radial_argmax": float(gg[int(np.argmax(gv))]),
        "global_radial_max": float(np.max(gv)),
    }
    wit = [[ring, 0.0]]
    return EscapeReport(ex.value, eps, t, wit, ring_val, vmax, np.atleast_1d(arg).tolist(), bool(interior and ring > r0), extra)
