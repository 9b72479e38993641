"""Command-line runner: ``hotspot-dw <subcommand> [options]``.

Every subcommand writes plain CSV/JSON (to ``--out DIR`` or stdout) so results
can be fed to any plotting tool.  Exit codes: 0 success, 1 configuration or
validation error, 2 a numeric check that did not meet its tolerance.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, acceptance, hotspots, initdata, pde, specfun, verify
from .initdata import InitDataError, ProblemSetup
from .quadrature import DEFAULT_SPEC, QuadSpec
from .specfun import KernelId, SpecfunDomainError

SCHEMA_VERSION = "1"
LOG_ENV = "HOTSPOT_DW_LOG"
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("hotspot_dw")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field."""


class NumericFailure(RuntimeError):
    """A check ran but did not meet its tolerance."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    version: str = SCHEMA_VERSION
    setup: dict | None = None  # initdata JSON; None means the regression setup
    schedule: dict = field(default_factory=lambda: {"logspace": [25.0, 200.0, 8]})
    quadrature: dict = field(default_factory=dict)
    out: str | None = None

    FIELDS = ("version", "setup", "schedule", "quadrature", "out")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: expected a JSON object")
        unknown = sorted(set(d) - set(cls.FIELDS))
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown config field")
        if str(d.get("version", "")) != SCHEMA_VERSION:
            raise ConfigError(f"version: expected {SCHEMA_VERSION!r}, got {d.get('version')!r}")
        cfg = cls(
            version=SCHEMA_VERSION,
            setup=d.get("setup"),
            schedule=dict(d.get("schedule", {"logspace": [25.0, 200.0, 8]})),
            quadrature=dict(d.get("quadrature", {})),
            out=d.get("out"),
        )
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}

    def validate(self) -> None:
        if self.setup is not None:
            try:
                ProblemSetup.from_dict(self.setup)
            except InitDataError as exc:
                raise ConfigError(f"setup.{exc}") from None
        self.schedule_obj()
        self.quad_spec()
        if self.out is not None and not isinstance(self.out, str):
            raise ConfigError("out: must be a directory path string")

    def problem(self, dim: int | None = None) -> ProblemSetup:
        if self.setup is None:
            try:
                return initdata.regression_setup(2 if dim is None else dim)
            except InitDataError as exc:
                raise ConfigError(str(exc)) from None
        s = ProblemSetup.from_dict(self.setup)
        if dim is not None and dim != s.dim:
            raise ConfigError(f"dim: --dim {dim} conflicts with setup.dim {s.dim}")
        return s

    def schedule_obj(self) -> hotspots.Schedule:
        sch = self.schedule
        keys = set(sch) - {"times", "logspace", "phi_exponent", "psi_exponent"}
        if keys:
            raise ConfigError(f"schedule.{sorted(keys)[0]}: unknown field")
        extra = {k: float(sch[k]) for k in ("phi_exponent", "psi_exponent") if k in sch}
        try:
            if "times" in sch and "logspace" in sch:
                raise ConfigError("schedule: give either times or logspace")
            if "times" in sch:
                return hotspots.Schedule(tuple(float(t) for t in sch["times"]), **extra)
            if "logspace" in sch:
                t0, t1, k = sch["logspace"]
                if not (0 < float(t0) < float(t1)) or int(k) < 1:
                    raise ConfigError("schedule.logspace: need 0 < t0 < t1 and count >= 1")
                return hotspots.Schedule.logspace(float(t0), float(t1), int(k), **extra)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"schedule: {exc}") from None
        raise ConfigError("schedule: needs times or logspace")

    def quad_spec(self) -> QuadSpec:
        names = {f.name for f in dataclasses.fields(QuadSpec)}
        for k in self.quadrature:
            if k not in names:
                raise ConfigError(f"quadrature.{k}: unknown field")
        try:
            return dataclasses.replace(DEFAULT_SPEC, **self.quadrature)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"quadrature: {exc}") from None


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# output helpers


def _clean(obj):
    """Recursively convert numpy scalars/arrays and float keys for JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return "" if v is None else str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


class Sink:
    """Writes named artifacts into ``--out`` or the primary one to stdout."""

    def __init__(self, out: str | None, stdout=None):
        self.dir = Path(out) if out else None
        self.stdout = stdout or sys.stdout
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, text: str, primary: bool = True) -> None:
        if self.dir:
            (self.dir / name).write_text(text)
        elif primary:
            self.stdout.write(text)


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _range(text: str, what: str) -> np.ndarray:
    parts = text.split(":")
    try:
        if len(parts) == 3:
            return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError:
        pass
    if len(parts) == 1:
        return np.array(_floats(text, what))
    raise ConfigError(f"{what}: expected start:stop:count or a comma list")


def _mapper(threads: int):
    if threads <= 1:
        return map, None
    pool = ThreadPoolExecutor(max_workers=threads)
    return pool.map, pool


# ---------------------------------------------------------------------------
# subcommands


def cmd_kernels(args, cfg, sink) -> int:
    s = _range(args.s, "--s")
    if np.any(s <= 0):
        raise ConfigError("--s: kernel tables need s > 0")
    orders = [int(v) for v in _floats(args.orders, "--orders")]
    rows = []
    fams = ["odd", "even"] if args.family == "both" else [args.family]
    for fam in fams:
        for order in orders:
            try:
                kid = KernelId.odd(order) if fam == "odd" else KernelId.even(order)
            except SpecfunDomainError as exc:
                raise ConfigError(f"--orders: {exc}") from None
            k, dk = np.full(s.shape, None), np.full(s.shape, None)
            ok = s <= specfun.OVERFLOW_ARG  # unscaled cells stay empty past overflow
            if ok.any():
                k[ok] = np.atleast_1d(specfun.kernel_k(kid, s[ok]))
                dk[ok] = np.atleast_1d(specfun.kernel_k_deriv(kid, s[ok]))
            ks = np.atleast_1d(specfun.kernel_k_scaled(kid, s, s))
            rows += [(sv, fam, order, kv, kv_s, dv) for sv, kv, kv_s, dv in zip(s, k, ks, dk)]
    sink.emit("kernels.csv", to_csv(["s", "family", "order", "value", "scaled_value", "deriv"], rows))
    brows = []
    for nu in orders:
        vals = np.full(s.shape, None)
        ok = s <= specfun.OVERFLOW_ARG
        if ok.any():
            vals[ok] = np.atleast_1d(specfun.bessel_i(nu, s[ok]))
        sc = np.atleast_1d(specfun.bessel_i_scaled(nu, s))
        brows += [(nu, sv, v, w) for sv, v, w in zip(s, vals, sc)]
    sink.emit("bessel.csv", to_csv(["nu", "s", "I", "I_scaled"], brows), primary=False)
    return 0


def cmd_solve(args, cfg, sink) -> int:
    setup = cfg.problem(args.dim)
    spec = cfg.quad_spec()
    n = setup.dim
    if args.t < 0:
        raise ConfigError("--t: must be non-negative")
    if args.lo is not None and args.hi is not None:
        lo, hi = np.array(_floats(args.lo, "--lo")), np.array(_floats(args.hi, "--hi"))
        if lo.size != n or hi.size != n:
            raise ConfigError(f"--lo/--hi: need {n} coordinates each")
    elif args.lo is None and args.hi is None:
        # CS(h) padded by phi(t) = t^(2/3): the region where the solution lives
        lo, hi = setup.hull_h.bounding_box()
        pad = max(args.t ** (2.0 / 3.0), 0.5)
        lo, hi = lo - pad, hi + pad
    else:
        raise ConfigError("--lo/--hi: give both or neither")
    res = args.resolution or {1: 201, 2: 41, 3: 15}[n]
    try:
        grid = pde.field(setup, args.part, args.t, (lo, hi), res, spec)
    except ValueError as exc:
        raise ConfigError(f"--part/--resolution: {exc}") from None
    sink.emit("field.csv", grid.to_csv())
    sink.emit("field.json", dumps(grid.header()), primary=False)
    return 0


def cmd_hotspots(args, cfg, sink) -> int:
    setup = cfg.problem(args.dim)
    sched = cfg.schedule_obj()
    if args.times:
        sched = hotspots.Schedule(tuple(_floats(args.times, "--times")), sched.phi_exponent, sched.psi_exponent)
    kw = {"spec": cfg.quad_spec()}
    if args.tol is not None:
        kw["refine_tol"] = args.tol
    mapper, pool = _mapper(args.threads)
    try:
        recs = hotspots.track(setup, sched, concavity=args.concavity, mapper=mapper, **kw)
    finally:
        if pool:
            pool.shutdown()
    header = ["t", "sup_dist_to_centroid", "inside_hull", "hotspot_count", "max_value", "min_second_dir"]
    rows = [(r.t, r.sup_dist_to_centroid, r.inside_hull, r.hotspot_count, r.max_value, r.min_second_dir) for r in recs]
    sink.emit("track.csv", to_csv(header, rows))
    n = setup.dim
    prow = [(r.t, k, *p) for r in recs for k, p in enumerate(r.points)]
    sink.emit("hotspots.csv", to_csv(["t", "index"] + ["x", "y", "z"][:n], prow), primary=False)
    sink.emit("hotspots.json", dumps({"setup": setup.to_dict(), "centroid": setup.m_h, "records": [r.to_dict() for r in recs]}), primary=False)
    return 0


def cmd_escape(args, cfg, sink) -> int:
    names = [e.value for e in hotspots.Example] if args.example == "all" else [args.example]
    reports = []
    for name in names:
        try:
            ex = hotspots.Example.parse(name)
            rep = hotspots.escape_experiment(ex, args.epsilon, args.t, cfg.quad_spec())
        except InitDataError as exc:
            raise ConfigError(f"--epsilon/--t: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"--example: {exc}") from None
        reports.append(rep.to_dict())
    payload = reports[0] if len(reports) == 1 else {"reports": reports}
    sink.emit("escape.json", dumps(payload))
    failed = [r["example"] for r in reports if not r["escape_confirmed"]]
    if failed:
        raise NumericFailure(f"escape: witness inequality not met for {', '.join(failed)}")
    return 0


def cmd_decay(args, cfg, sink) -> int:
    setup = cfg.problem(args.dim)
    times = _floats(args.times, "--times") if args.times else list(np.geomspace(10.0, 160.0, 8))
    quants = list(verify.Quantity) if args.quantity == "all" else [verify.Quantity(args.quantity)]
    band = 0.2 if args.tol is None else args.tol
    mapper, pool = _mapper(args.threads)
    fits = []
    try:
        for q in quants:
            if q is verify.Quantity.TILDE_J and setup.f.is_zero():
                continue
            try:
                fits.append(verify.decay_fit(setup, q, times, spec=cfg.quad_spec(), mapper=mapper))
            except ValueError as exc:
                raise ConfigError(f"--times: {exc}") from None
    finally:
        if pool:
            pool.shutdown()
    rows = [(f.quantity, f.dim, t, v, e) for f in fits for t, v, e in zip(f.times, f.values, f.exterior_envelope)]
    sink.emit("decay.csv", to_csv(["quantity", "dim", "t", "value", "exterior_envelope"], rows))
    sink.emit("decay_fits.json", dumps([f.to_dict() for f in fits]), primary=False)
    bad = [f.quantity for f in fits if abs(f.slope - f.target_slope) > band]
    if bad:
        raise NumericFailure(f"decay: slope outside +-{band} of target for {', '.join(bad)} (dim {setup.dim})")
    return 0


def cmd_oracle(args, cfg, sink) -> int:
    setup = cfg.problem(args.dim)
    n = setup.dim
    if n not in (1, 2):
        raise ConfigError("dim: the finite-difference oracle supports 1 and 2")
    t = args.t if args.t is not None else (2.0 if n == 1 else 1.5)
    dx = args.dx or (1 / 400 if n == 1 else 1 / 150)
    bar = args.tol if args.tol is not None else (1e-3 if n == 1 else 5e-3)
    lo, hi = setup.hull_h.bounding_box()
    rng = np.random.default_rng(args.seed)
    probes = rng.uniform(lo - 0.8 * t, hi + 0.8 * t, size=(args.probes, n))
    try:
        res = verify.compare_oracle(n, setup, t, probes, dx=dx, spec=cfg.quad_spec())
    except verify.FDError as exc:
        raise NumericFailure(f"oracle: {exc} (dim {n}, t {t}, dx {dx})") from None
    rows = [(*p, a, b, e) for p, a, b, e in zip(probes, res["fd"], res["exact"], res["errors"])]
    sink.emit("oracle.csv", to_csv(["x", "y", "z"][:n] + ["fd", "exact", "abs_error"], rows), primary=False)
    summary = {"dim": n, "t": t, "dx": dx, "probes": args.probes, "max_abs_error": res["max_abs_error"], "tolerance": bar}
    sink.emit("oracle.json", dumps(summary))
    if res["max_abs_error"] > bar:
        raise NumericFailure(f"oracle: max error {res['max_abs_error']:.3e} > {bar:g} (dim {n}, t {t}, dx {dx})")
    return 0


def cmd_selftest(args, cfg, sink) -> int:
    nums = [int(v) for v in _floats(args.only, "--only")] if args.only else None
    for k in nums or []:
        if k not in acceptance.CRITERIA:
            raise ConfigError(f"--only: no criterion {k}")
    results = acceptance.run(nums, echo=lambda line: print(line, file=sys.stderr if sink.dir is None else sys.stdout))
    sink.emit("selftest.json", dumps([{"number": r.number, "name": r.name, "passed": r.passed, "detail": r.detail} for r in results]))
    bad = [str(r.number) for r in results if not r.passed]
    if bad:
        raise NumericFailure(f"selftest: criteria {', '.join(bad)} failed")
    return 0


COMMANDS = {
    "kernels": cmd_kernels,
    "solve": cmd_solve,
    "hotspots": cmd_hotspots,
    "escape": cmd_escape,
    "decay": cmd_decay,
    "oracle": cmd_oracle,
    "selftest": cmd_selftest,
}


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 1), not argparse's exit 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config (JSON)")
    common.add_argument("--out", metavar="DIR", help="write artifacts into DIR instead of stdout")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1, metavar="N", help="worker threads (results do not depend on N)")
    common.add_argument("--tol", type=float, metavar="X", help="tolerance for hotspots (refine_tol), decay (slope band) and oracle (error bar)")
    common.add_argument("--dump-config", action="store_true", help="print the effective config and exit")

    p = _Parser(prog="hotspot-dw", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernels", parents=[common], help="tables of k_l, k_l' and I_nu")
    k.add_argument("--family", choices=["odd", "even", "both"], default="both")
    k.add_argument("--orders", default="1,2,3")
    k.add_argument("--s", default="0.1:60:120", help="start:stop:count or a comma list")

    s = sub.add_parser("solve", parents=[common], help="evaluate a solution part on a grid")
    s.add_argument("--part", default="full", help="full, J, W, tildeJ, hatW, tildeW, heat, difference")
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--dim", type=int)
    s.add_argument("--resolution", type=int)
    s.add_argument("--lo", help="comma-separated lower corner")
    s.add_argument("--hi", help="comma-separated upper corner")

    h = sub.add_parser("hotspots", parents=[common], help="track hot spots over the schedule (--tol: refine_tol)")
    h.add_argument("--dim", type=int)
    h.add_argument("--times", help="comma-separated times (overrides the config schedule)")
    h.add_argument("--concavity", action="store_true", help="also record the min second directional derivative")

    e = sub.add_parser("escape", parents=[common], help="run the escape constructions")
    e.add_argument("--example", default="all", help="ex1d, ex2d_critical, ex2d_small, ex3d or all")
    e.add_argument("--epsilon", type=float)
    e.add_argument("--t", type=float)

    d = sub.add_parser("decay", parents=[common], help="decay-rate fits (--tol: slope band, default 0.2)")
    d.add_argument("--dim", type=int)
    d.add_argument("--quantity", default="all", choices=["all"] + [q.value for q in verify.Quantity])
    d.add_argument("--times", help="comma-separated times (default 8 in [10, 160])")

    o = sub.add_parser("oracle", parents=[common], help="compare with the finite-difference solver (--tol: error bar)")
    o.add_argument("--dim", type=int, default=1)
    o.add_argument("--t", type=float)
    o.add_argument("--dx", type=float)
    o.add_argument("--probes", type=int, default=50)
    o.add_argument("--seed", type=int, default=0)

    st = sub.add_parser("selftest", parents=[common], help="run the acceptance criteria")
    st.add_argument("--only", help="comma-separated criterion numbers")
    return p


def _setup_logging() -> None:
    level = os.environ.get(LOG_ENV, "error").strip().lower()
    if level not in LOG_LEVELS:
        raise ConfigError(f"{LOG_ENV}: expected one of {', '.join(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.setLevel(LOG_LEVELS[level])


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _setup_logging()
        cfg = load_config(args.config)
        if args.out:
            cfg.out = args.out
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        if args.tol is not None and (args.command not in ("hotspots", "decay", "oracle") or not args.tol > 0):
            raise ConfigError(f"--tol: not used by {args.command}" if args.tol > 0 else "--tol: must be positive")
        if args.dump_config:
            sys.stdout.write(dumps(cfg.to_dict()))
            return 0
        return COMMANDS[args.command](args, cfg, Sink(cfg.out))
    except (ConfigError, InitDataError, SpecfunDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
