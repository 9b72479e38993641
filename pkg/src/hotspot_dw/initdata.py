"""Compactly supported smooth initial data built from mollifier bumps.

A bump with centre ``c``, support radius ``R`` and amplitude ``a`` is

    a * rho~(2 (y - c) / R),   rho~(z) = exp(-1 / (4 - |z|^2))  for |z| < 2,

so its support is exactly the closed ball B_R(c).  As a function of the squared
distance q = |y - c|^2 the profile is ``a * exp(-R^2 / (4 (R^2 - q)))``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .quadrature import QuadSpec, integrate_interval, sphere_area

__all__ = [
    "Bump",
    "BumpSum",
    "ProblemSetup",
    "Hull",
    "Geometry",
    "InitDataError",
    "eval",
    "grad",
    "centroid",
    "support_hull",
    "norms",
    "geometry",
    "mollifier_moment",
    "probe_directions",
    "regression_setup",
]

E_QUARTER = math.exp(-0.25)


class InitDataError(ValueError):
    """Invalid initial data (bad field, negative h, zero mass...)."""


@lru_cache(maxsize=16)
def mollifier_moment(n: int) -> float:
    """int_{|z|<2} rho~(z) dz in R^n, by 1D radial quadrature."""
    spec = QuadSpec(target_abs_tol=1e-14, target_rel_tol=1e-13)

    def f(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            v = np.where(s < 2.0, np.exp(-1.0 / np.maximum(4.0 - s * s, 1e-300)), 0.0)
        return v * s ** (n - 1)

    return sphere_area(n - 1) * integrate_interval(f, 0.0, 2.0, spec)


@dataclass(frozen=True)
class Bump:
    center: tuple
    radius: float
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise InitDataError("bump radius must be positive")
        if not np.isfinite(self.amplitude):
            raise InitDataError("bump amplitude must be finite")

    @property
    def dim(self) -> int:
        return len(self.center)

    def mass(self) -> float:
        n = self.dim
        return self.amplitude * (0.5 * self.radius) ** n * mollifier_moment(n)

    def profile(self, q, need_deriv: bool = True, need_second: bool = False):
        """(P, dP/dq, d2P/dq2) as functions of the squared distance q to the centre."""
        R2 = self.radius * self.radius
        a = 0.25 * R2
        q = np.asarray(q, dtype=float)
        inside = q < R2
        gap = np.where(inside, R2 - q, 1.0)
        with np.errstate(under="ignore"):
            P = np.where(inside, self.amplitude * np.exp(-a / gap), 0.0)
        P1 = P2 = None
        live = P != 0
        g = np.where(live, gap, 1.0)  # P underflows long before 1/gap^4 overflows
        if need_deriv or need_second:
            P1 = np.where(live, -P * a / g**2, 0.0)
        if need_second:
            P2 = np.where(live, P * (a * a / g**4 - 2.0 * a / g**3), 0.0)
        return P, P1, P2

    def to_dict(self) -> dict:
        return {"center": list(self.center), "radius": self.radius, "amplitude": self.amplitude}


@dataclass(frozen=True)
class BumpSum:
    """Finite sum of bumps in R^dim; ``scale`` multiplies every amplitude."""

    dim: int
    bumps: tuple = ()
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(self.bumps))
        if not (1 <= self.dim <= 7):
            raise InitDataError("dim must lie in 1..7")
        for b in self.bumps:
            if b.dim != self.dim:
                raise InitDataError("bump centre dimension does not match dim")

    @classmethod
    def from_bumps(cls, dim: int, bumps: Sequence[Bump], normalize_l1: float | None = None) -> "BumpSum":
        s = cls(dim, tuple(bumps))
        if normalize_l1 is not None and s.bumps:
            l1 = norms(s)["l1"]
            if l1 <= 0:
                raise InitDataError("cannot normalise a datum with zero L1 norm")
            s = cls(dim, s.bumps, normalize_l1 / l1)
        return s

    @classmethod
    def zero(cls, dim: int) -> "BumpSum":
        return cls(dim, ())

    def scaled_bumps(self) -> list[Bump]:
        if self.scale == 1.0:
            return list(self.bumps)
        return [Bump(b.center, b.radius, b.amplitude * self.scale) for b in self.bumps]

    def is_zero(self) -> bool:
        return not self.bumps or all(b.amplitude == 0 for b in self.bumps) or self.scale == 0

    def balls(self) -> list[tuple[np.ndarray, float]]:
        return [(np.array(b.center), b.radius) for b in self.bumps if b.amplitude != 0]

    def __add__(self, other: "BumpSum") -> "BumpSum":
        if other.dim != self.dim:
            raise InitDataError("dimension mismatch")
        return BumpSum(self.dim, tuple(self.scaled_bumps()) + tuple(other.scaled_bumps()))

    def __call__(self, x):
        return eval(self, x)

    def to_list(self) -> list[dict]:
        return [b.to_dict() for b in self.scaled_bumps()]


def _points(datum: BumpSum, x):
    X = np.asarray(x, dtype=float)
    if datum.dim == 1 and (X.ndim == 0 or X.shape[-1] != 1):
        X = X[..., None]
    if X.shape[-1] != datum.dim:
        raise InitDataError("point dimension does not match datum")
    return X


def eval(datum: BumpSum, x):  # noqa: A001 - mirrors the operation name
    """Value of the bump sum at ``x`` (a point or an array of points (..., n))."""
    X = _points(datum, x)
    out = np.zeros(X.shape[:-1])
    for b in datum.scaled_bumps():
        q = np.sum((X - np.array(b.center)) ** 2, axis=-1)
        out = out + b.profile(q, False)[0]
    return float(out) if out.ndim == 0 else out


def grad(datum: BumpSum, x):
    """Analytic gradient, shape (..., n)."""
    X = _points(datum, x)
    out = np.zeros(X.shape)
    for b in datum.scaled_bumps():
        diff = X - np.array(b.center)
        q = np.sum(diff**2, axis=-1)
        _, P1, _ = b.profile(q, True)
        out = out + 2.0 * P1[..., None] * diff
    return out


def hessian(datum: BumpSum, x):
    """Analytic Hessian, shape (..., n, n)."""
    X = _points(datum, x)
    n = datum.dim
    out = np.zeros(X.shape + (n,))
    for b in datum.scaled_bumps():
        diff = X - np.array(b.center)
        q = np.sum(diff**2, axis=-1)
        _, P1, P2 = b.profile(q, True, True)
        out = out + 4.0 * P2[..., None, None] * diff[..., :, None] * diff[..., None, :]
        out = out + 2.0 * P1[..., None, None] * np.eye(n)
    return out


def _overlap_groups(bumps: Sequence[Bump]) -> list[list[int]]:
    """Connected components of the ball-intersection graph."""
    m = len(bumps)
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(m):
        for j in range(i + 1, m):
            ci, cj = np.array(bumps[i].center), np.array(bumps[j].center)
            if np.linalg.norm(ci - cj) < bumps[i].radius + bumps[j].radius:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _abs_integral_grid(bumps: Sequence[Bump], n: int, nodes_per_axis: int = 0) -> float:
    """int |sum of bumps| over the bounding box (overlap path).

    In 1D the interval is split at the sign changes so each piece is smooth.
    In higher dimensions tensor Gauss panels straddle the zero set, which
    limits the relative accuracy to roughly 1e-5.
    """
    sub = BumpSum(n, tuple(bumps))
    lo = np.min([np.array(b.center) - b.radius for b in bumps], axis=0)
    hi = np.max([np.array(b.center) + b.radius for b in bumps], axis=0)
    if n == 1:
        xs = np.linspace(lo[0], hi[0], 4001)
        vs = eval(sub, xs)
        cuts = [
            optimize.brentq(lambda z: float(eval(sub, z)), xs[i], xs[i + 1], xtol=1e-15)
            for i in np.nonzero(vs[:-1] * vs[1:] < 0)[0]
        ]
        edges = [lo[0], *cuts, hi[0]]
        spec = QuadSpec(target_abs_tol=1e-14, target_rel_tol=1e-12)
        return math.fsum(
            integrate_interval(lambda z: np.abs(eval(sub, z)), a, b, spec) for a, b in zip(edges[:-1], edges[1:])
        )
    panels = {1: 64, 2: 24, 3: 10}.get(n, 6)
    order = 12
    x, w = np.polynomial.legendre.leggauss(order)
    axes, wts = [], []
    for k in range(n):
        edges = np.linspace(lo[k], hi[k], panels + 1)
        h = 0.5 * np.diff(edges)
        axes.append((edges[:-1, None] + h[:, None] * (x + 1)).ravel())
        wts.append((h[:, None] * w).ravel())
    grids = np.meshgrid(*axes, indexing="ij")
    W = np.ones_like(grids[0])
    for k, g in enumerate(np.meshgrid(*wts, indexing="ij")):
        W = W * g
    pts = np.stack(grids, axis=-1)
    return float(np.sum(np.abs(eval(sub, pts)) * W))


def norms(datum: BumpSum) -> dict:
    """L1 and L-infinity norms."""
    bumps = datum.scaled_bumps()
    if not bumps:
        return {"l1": 0.0, "linf": 0.0}
    l1 = 0.0
    linf = 0.0
    for grp in _overlap_groups(bumps):
        members = [bumps[i] for i in grp]
        amps = [b.amplitude for b in members]
        if len(members) == 1 or min(amps) >= 0 or max(amps) <= 0:
            l1 += sum(abs(b.mass()) for b in members)
        else:
            l1 += _abs_integral_grid(members, datum.dim)
        if len(members) == 1:
            linf = max(linf, abs(members[0].amplitude) * E_QUARTER)
        else:
            sub = BumpSum(datum.dim, tuple(members))
            best = 0.0
            for b in members:  # multistart local search from each centre
                res = optimize.minimize(
                    lambda y: -abs(eval(sub, y)), np.array(b.center), method="Nelder-Mead",
                    options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000},
                )
                best = max(best, -res.fun, abs(eval(sub, np.array(b.center))))
            linf = max(linf, best)
    return {"l1": l1, "linf": linf}


def centroid(h: BumpSum) -> np.ndarray:
    bumps = h.scaled_bumps()
    masses = np.array([b.mass() for b in bumps])
    total = masses.sum() if len(masses) else 0.0
    if not total > 0:
        raise InitDataError("centroid needs positive total mass")
    centers = np.array([b.center for b in bumps])
    return masses @ centers / total


# ---------------------------------------------------------------------------
# convex hull of the support


@lru_cache(maxsize=8)
def probe_directions(n: int) -> np.ndarray:
    """Fixed unit directions: 720 on the circle, 1200 Fibonacci points on S^2."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        a = 2 * np.pi * np.arange(720) / 720
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    if n == 3:
        k = np.arange(1200) + 0.5
        z = 1 - 2 * k / 1200
        phi = np.pi * (1 + 5**0.5) * k
        s = np.sqrt(1 - z * z)
        return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    rng = np.random.default_rng(12345)
    v = rng.normal(size=(400 * n, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.concatenate([v, np.eye(n), -np.eye(n)])


@dataclass(frozen=True)
class Hull:
    """Convex hull of a union of balls, described by its support function."""

    dim: int
    centers: np.ndarray = field(repr=False)
    radii: np.ndarray = field(repr=False)

    def support(self, omega) -> np.ndarray:
        omega = np.atleast_2d(omega)
        if len(self.radii) == 0:
            return np.full(omega.shape[0], -np.inf)
        return np.max(omega @ self.centers.T + self.radii[None, :], axis=1)

    def contains(self, x, tol: float = 0.0):
        X = np.atleast_2d(np.asarray(x, dtype=float).reshape(-1, self.dim))
        if len(self.radii) == 0:
            return np.zeros(X.shape[0], dtype=bool) if np.ndim(x) > 1 else False
        dirs = probe_directions(self.dim)
        H = self.support(dirs)
        inside = np.all(X @ dirs.T <= H[None, :] + tol, axis=1)
        dist = np.linalg.norm(X[:, None, :] - self.centers[None, :, :], axis=2)
        inside |= np.any(dist <= self.radii[None, :] + tol, axis=1)
        if np.ndim(x) > 1 or (np.ndim(x) == 1 and self.dim == 1 and np.size(x) > 1):
            return inside
        return bool(inside[0])

    def bounding_box(self):
        lo = np.min(self.centers - self.radii[:, None], axis=0)
        hi = np.max(self.centers + self.radii[:, None], axis=0)
        return lo, hi

    @property
    def empty(self) -> bool:
        return len(self.radii) == 0


def support_hull(datum: BumpSum) -> Hull:
    balls = datum.balls()
    if not balls:
        return Hull(datum.dim, np.zeros((0, datum.dim)), np.zeros(0))
    return Hull(datum.dim, np.array([c for c, _ in balls]), np.array([r for _, r in balls]))


def _diameter(hull: Hull) -> float:
    if hull.empty:
        return 0.0
    c, r = hull.centers, hull.radii
    dist = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2)
    return float(np.max(dist + r[:, None] + r[None, :]))


def _one_sided_distance(K: Hull, L: Hull) -> float:
    """sup_{eta in L} dist(eta, K) via support functions."""
    if L.empty:
        return 0.0
    if K.empty:
        return math.inf
    dirs = probe_directions(K.dim)
    return float(max(0.0, np.max(L.support(dirs) - K.support(dirs))))


@dataclass(frozen=True)
class Geometry:
    d_h: float
    d_f: float
    delta_fh: float
    T0: float


@dataclass(frozen=True)
class ProblemSetup:
    f: BumpSum
    g: BumpSum
    check: bool = True

    def __post_init__(self):
        if self.f.dim != self.g.dim:
            raise InitDataError("f and g must have the same dimension")
        if self.check:
            _check_nonnegative(self.h)

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def h(self) -> BumpSum:
        return self.f + self.g

    @property
    def m_h(self) -> np.ndarray:
        return centroid(self.h)

    @property
    def hull_h(self) -> Hull:
        return support_hull(self.h)

    @property
    def hull_f(self) -> Hull:
        return support_hull(self.f)

    @property
    def d_h(self) -> float:
        return _diameter(self.hull_h)

    @property
    def d_f(self) -> float:
        return _diameter(self.hull_f)

    @property
    def delta_fh(self) -> float:
        return _one_sided_distance(self.hull_h, self.hull_f)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "f": self.f.to_list(), "g": self.g.to_list()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "ProblemSetup":
        allowed = {"dim", "f", "g", "normalize_l1"}
        for key in obj:
            if key not in allowed:
                raise InitDataError(f"unknown field '{key}' in initial data")
        if "dim" not in obj:
            raise InitDataError("missing field 'dim'")
        dim = obj["dim"]
        if not isinstance(dim, int) or not 1 <= dim <= 3:
            raise InitDataError("field 'dim' must be 1, 2 or 3")

        def parse(name):
            out = []
            for i, b in enumerate(obj.get(name, [])):
                extra = set(b) - {"center", "radius", "amplitude"}
                if extra:
                    raise InitDataError(f"unknown field '{name}[{i}].{sorted(extra)[0]}'")
                try:
                    c = b["center"]
                    c = [c] if np.isscalar(c) else c
                    if len(c) != dim:
                        raise InitDataError(f"field '{name}[{i}].center' must have {dim} entries")
                    out.append(Bump(tuple(c), float(b["radius"]), float(b.get("amplitude", 1.0))))
                except KeyError as exc:
                    raise InitDataError(f"missing field '{name}[{i}].{exc.args[0]}'") from None
                except InitDataError as exc:
                    if "field" in str(exc):
                        raise
                    raise InitDataError(f"field '{name}[{i}]': {exc}") from None
            return out

        f, g = parse("f"), parse("g")
        norm = obj.get("normalize_l1")
        if norm is not None and not (isinstance(norm, (int, float)) and norm > 0):
            raise InitDataError("field 'normalize_l1' must be a positive number")
        fs = BumpSum(dim, tuple(f))
        gs = BumpSum(dim, tuple(g))
        if norm is not None:
            # normalise h = f + g, scaling f and g by the same factor
            l1 = norms(fs + gs)["l1"]
            if l1 <= 0:
                raise InitDataError("field 'normalize_l1' cannot normalise zero data")
            fs = BumpSum(dim, fs.bumps, norm / l1)
            gs = BumpSum(dim, gs.bumps, norm / l1)
        return cls(fs, gs)


def _check_nonnegative(h: BumpSum):
    if h.is_zero():
        raise InitDataError("h = f + g must not vanish identically")
    bumps = h.scaled_bumps()
    if all(b.amplitude >= 0 for b in bumps):
        return
    # dense sample of every support ball
    rng = np.random.default_rng(0)
    n = h.dim
    for b in bumps:
        z = rng.normal(size=(4000, n))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        rad = b.radius * rng.random(4000) ** (1.0 / n)
        pts = np.array(b.center) + rad[:, None] * z
        if np.min(eval(h, pts)) < -1e-12 * max(abs(bb.amplitude) for bb in bumps):
            raise InitDataError("h = f + g must be non-negative")


def geometry(setup: ProblemSetup, phi: Callable[[float], float] | None = None) -> Geometry:
    """d_h, d_f, delta and the threshold time T0 for ``phi`` (default t^(2/3))."""
    if phi is None:
        phi = lambda t: t ** (2.0 / 3.0)  # noqa: E731
    d_h, d_f, delta = setup.d_h, setup.d_f, setup.delta_fh
    D = max(d_h, delta + d_f)

    def gap(t):
        return t - phi(t) - D

    hi = max(1.0, D)
    while gap(hi) < 0:
        hi *= 2.0
    # smallest T with gap(t) >= 0 for all t >= T; gap is eventually increasing,
    # so scan downwards for the last sign change before bisecting
    grid = np.linspace(0.0, hi, 4001)
    vals = np.array([gap(t) for t in grid])
    bad = np.nonzero(vals < 0)[0]
    if len(bad) == 0:
        return Geometry(d_h, d_f, delta, 0.0)
    lo = grid[bad[-1]]
    hi = grid[min(bad[-1] + 1, len(grid) - 1)]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) >= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-13 * max(1.0, hi):
            break
    return Geometry(d_h, d_f, delta, float(hi))


# the asymmetric two-bump datum used by the regression checks; 1D and 3D
# variants keep the first coordinate (and pad with zeros)
_REGRESSION = {
    "f": [((0.3, 0.2), 0.4, 0.5)],
    "g": [((-0.5, 0.0), 0.6, 1.0), ((0.6, 0.3), 0.5, 2.0)],
}


def regression_setup(dim: int = 2) -> ProblemSetup:
    """Standard asymmetric setup (f != 0, two unequal g bumps, unit L1 mass)."""
    if dim not in (1, 2, 3):
        raise InitDataError(f"dim: regression setup exists for 1..3, got {dim}")

    def fit(c):
        return list(c[:dim]) + [0.0] * max(0, dim - 2)

    def items(key):
        return [{"center": fit(c), "radius": r, "amplitude": a} for c, r, a in _REGRESSION[key]]

    return ProblemSetup.from_dict({"dim": dim, "f": items("f"), "g": items("g"), "normalize_l1": 1.0})
