"""Command-line interface: plan, simulate, sweep, fit and critical damping.

Every command writes to stdout (or ``-o``) with fixed float formatting so
that identical invocations give byte-identical output.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from importlib import resources
from typing import Any, Callable, Sequence

import numpy as np

from . import analysis
from .errors import JerkSegError, NumericalError, ValidationError
from .model import (
    DEFAULT_DT,
    JerkProfile,
    KinematicLimits,
    SystemParams,
    derive_params,
    sample_trajectory,
)
from .planner import CLOSURE_TOL, DEFAULT_N_ITER, TERMINAL_TOL, plan_segment, verify_segment
from .verify import rk4_integrate

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PLANNING = 3
EXIT_NUMERICAL = 4

CSV_COLUMNS = ("t", "jerk", "z_ddot", "z_dot", "z", "x", "x_dot", "x_ddot")
PRESETS = ("table1", "lab")


def fmt(x: float) -> str:
    return "%.17g" % x


# -- config -----------------------------------------------------------------


@dataclass(frozen=True)
class PlannerSettings:
    n_iter: int = DEFAULT_N_ITER
    closure_tol: float = CLOSURE_TOL
    terminal_tol: float = TERMINAL_TOL
    precompute: bool = False
    single_precision: bool = False

    def __post_init__(self) -> None:
        if self.n_iter < 1:
            raise ValidationError(f"n_iter must be at least 1, got {self.n_iter!r}")
        for name in ("closure_tol", "terminal_tol"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValidationError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class PlanConfig:
    plant: SystemParams
    limits: KinematicLimits
    planner: PlannerSettings

    def as_mapping(self) -> dict[str, dict[str, Any]]:
        return {
            "plant": asdict(self.plant),
            "limits": asdict(self.limits),
            "planner": asdict(self.planner),
        }

    @classmethod
    def from_mapping(cls, data) -> "PlanConfig":
        """Build from nested ``section -> key -> value``; values may be strings."""
        try:
            plant = SystemParams(**_section(data, "plant", SystemParams, float))
            limits = KinematicLimits(**_section(data, "limits", KinematicLimits, float))
            raw = data["planner"] if "planner" in data else {}
            planner = PlannerSettings(
                **{
                    f.name: _convert(raw[f.name], f.type)
                    for f in fields(PlannerSettings)
                    if f.name in raw
                }
            )
        except KeyError as exc:
            raise ValidationError(f"missing config entry {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"bad config value: {exc}") from None
        return cls(plant, limits, planner)

    def to_ini(self) -> str:
        lines = []
        for name, values in self.as_mapping().items():
            lines.append(f"[{name}]")
            for key, value in values.items():
                lines.append(f"{key} = {_ini_value(value)}")
            lines.append("")
        return "\n".join(lines)


def _ini_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return fmt(value)
    return str(value)


def _convert(value, typ):
    typ = typ if isinstance(typ, str) else typ.__name__
    if typ == "bool":
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if typ == "int":
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"not an integer: {value!r}")
        return int(value)
    return float(value)


def _section(data, name, cls, conv) -> dict[str, float]:
    sec = data[name]
    names = [f.name for f in fields(cls)]
    unknown = set(sec) - set(names)
    if unknown:
        raise ValidationError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return {n: conv(sec[n]) for n in names}


def load_config(path: str | None = None, preset: str | None = None) -> PlanConfig:
    parser = configparser.ConfigParser()
    try:
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        else:
            name = preset or "table1"
            if name not in PRESETS:
                raise ValidationError(f"unknown preset {name!r}; choose from {PRESETS}")
            text = resources.files("jerkseg.presets").joinpath(f"{name}.cfg").read_text("utf-8")
            parser.read_string(text)
    except OSError as exc:
        raise ValidationError(f"cannot read config: {exc}") from None
    except configparser.Error as exc:
        raise ValidationError(f"malformed config: {exc}") from None
    return PlanConfig.from_mapping({s: dict(parser[s]) for s in parser.sections()})


# -- output -----------------------------------------------------------------


def dumps(obj, indent: int = 0) -> str:
    """JSON with every float written as ``%.17g``; keys keep insertion order."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan
        return fmt(x) if math.isfinite(x) else "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[" + ", ".join(dumps(v, indent + 1) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_csv(out, header: Sequence[str], rows) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])


# -- commands ---------------------------------------------------------------


def _jerk(args, cfg: PlanConfig) -> float:
    return args.j_max if args.j_max is not None else cfg.limits.j_lim


def _plan_kwargs(args, cfg: PlanConfig) -> dict[str, Any]:
    p = cfg.planner
    return dict(
        n_iter=args.iters if getattr(args, "iters", None) is not None else p.n_iter,
        single_precision=bool(getattr(args, "single_precision", False) or p.single_precision),
        precompute=p.precompute,
        closure_tol=p.closure_tol,
    )


def _effective(args, cfg: PlanConfig) -> PlanConfig:
    kw = _plan_kwargs(args, cfg)
    planner = PlannerSettings(
        n_iter=kw["n_iter"],
        closure_tol=cfg.planner.closure_tol,
        terminal_tol=cfg.planner.terminal_tol,
        precompute=cfg.planner.precompute,
        single_precision=kw["single_precision"],
    )
    return PlanConfig(cfg.plant, cfg.limits, planner)


def segment_document(seg, cfg: PlanConfig) -> dict[str, Any]:
    report = verify_segment(seg, cfg.plant, tol=cfg.planner.terminal_tol)
    prof = seg.profile()
    return {
        "a_max": seg.a_max,
        "j_max": seg.j_max,
        "t_f": seg.t_f,
        "phi_f": seg.phi_f,
        "n": seg.n,
        "n_el": seg.n_el,
        "C1": seg.structure.C1,
        "times": list(seg.times),
        "coefficients": list(seg.coeffs),
        "profile": {"times": list(prof.times), "amps": list(prof.amps)},
        "n_evaluations": seg.n_evaluations,
        "orientation": seg.orientation,
        "overshoot": asdict(seg.overshoot),
        "verification": {**asdict(report), "passed": report.passed},
        "config": cfg.as_mapping(),
    }


def cmd_plan(args, cfg: PlanConfig, out) -> int:
    eff = _effective(args, cfg)
    seg = plan_segment(cfg.plant, args.a_max, _jerk(args, cfg), **_plan_kwargs(args, eff))
    out.write(dumps(segment_document(seg, eff)) + "\n")
    return EXIT_OK


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None


def _profile_for(args, cfg: PlanConfig) -> JerkProfile:
    if args.segment is not None:
        try:
            doc = json.loads(_read_text(args.segment))
            prof = doc["profile"]
            return JerkProfile(tuple(prof["times"]), tuple(prof["amps"]))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValidationError(f"not a segment document: {exc}") from None
    if args.a_max is None:
        raise ValidationError("simulate needs --a-max or --segment")
    j = _jerk(args, cfg)
    if args.method == "ocp":
        return plan_segment(cfg.plant, args.a_max, j, **_plan_kwargs(args, cfg)).profile()
    if args.method == "zv":
        return analysis.zv_segment(cfg.plant, args.a_max, j)
    return analysis.scurve_segment(args.a_max, j)


def cmd_simulate(args, cfg: PlanConfig, out) -> int:
    prof = _profile_for(args, cfg)
    dp = derive_params(cfg.plant)
    t_end = args.t_end
    if t_end is None:
        # segment plus three base periods of tail
        t_end = prof.t_end + 3.0 * 2.0 * math.pi / dp.omega_d
    if args.oracle == "rk4":
        traj = rk4_integrate(dp, prof, args.dt, t_end)
    else:
        traj = sample_trajectory(prof, args.dt, t_end, dp)
    cols = [traj.t, traj.jerk, traj.column("z_ddot"), traj.column("z_dot"), traj.column("z"),
            traj.column("x"), traj.column("x_dot"), traj.x_ddot]
    rows = (tuple(float(c[i]) for c in cols) for i in range(len(traj)))
    write_csv(out, CSV_COLUMNS, rows)
    return EXIT_OK


def _pool_map(fn: Callable, items: list, jobs: int) -> list:
    """Ordered map; results come back in input order regardless of ``jobs``."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _sweep_one(job):
    plant, a, j, methods, kwargs = job
    return analysis.sweep(plant, [a], j, methods, **kwargs)


def _a_values(args) -> list[float]:
    if args.n <= 0:
        return []
    return [float(a) for a in analysis.accel_grid(args.a_min, args.a_max, args.n, args.log)]


def cmd_sweep(args, cfg: PlanConfig, out) -> int:
    methods = tuple(args.methods.split(",")) if args.methods else analysis.METHODS
    for m in methods:
        if m not in analysis.METHODS:
            raise ValidationError(f"unknown method {m!r}; choose from {analysis.METHODS}")
    j = _jerk(args, cfg)
    kwargs = _plan_kwargs(args, cfg)
    jobs = [(cfg.plant, a, j, methods, kwargs) for a in _a_values(args)]
    rows = [r for chunk in _pool_map(_sweep_one, jobs, args.jobs) for r in chunk]
    write_csv(
        out,
        ("a_max", "method", "t_f", "ok", "message"),
        ((r.a_max, r.method, r.t_f, int(r.ok), r.message) for r in rows),
    )
    return EXIT_OK


def _read_samples(path: str) -> tuple[np.ndarray, np.ndarray]:
    text = _read_text(path)
    t, x = [], []
    seen = False
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        first, seen = not seen, True
        parts = line.replace(",", " ").split()
        try:
            a, b = float(parts[0]), float(parts[1])
        except (ValueError, IndexError):
            if first:
                continue  # header row
            raise ValidationError(f"line {lineno}: expected two numbers") from None
        t.append(a)
        x.append(b)
    return np.array(t), np.array(x)


def cmd_fit(args, cfg: PlanConfig, out) -> int:
    t, x = _read_samples(args.input)
    dp = derive_params(cfg.plant)
    delta0 = args.delta0 if args.delta0 is not None else dp.delta
    omega0 = args.omega0 if args.omega0 is not None else dp.omega_d
    fit = analysis.fit_residual(t, x, args.t_start, delta0, omega0, offset=args.offset)
    out.write(dumps(asdict(fit)) + "\n")
    return EXIT_OK


def _critical_one(job):
    plant, a, j, kwargs = job
    try:
        return a, analysis.critical_damping(plant, a, j, **kwargs), 1, ""
    except JerkSegError as exc:
        return a, math.nan, 0, f"{type(exc).__name__}: {exc}"


def cmd_critical_damping(args, cfg: PlanConfig, out) -> int:
    j = _jerk(args, cfg)
    kwargs = _plan_kwargs(args, cfg)
    jobs = [(cfg.plant, a, j, kwargs) for a in _a_values(args)]
    rows = _pool_map(_critical_one, jobs, args.jobs)
    write_csv(out, ("a_max", "d_crit", "ok", "message"), rows)
    return EXIT_OK


def cmd_config(args, cfg: PlanConfig, out) -> int:
    out.write(_effective(args, cfg).to_ini())
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", help="INI file with [plant], [limits], [planner]")
    src.add_argument("--preset", choices=PRESETS, help="bundled parameter set (default table1)")
    common.add_argument("-o", "--output", default="-", help="output file (default stdout)")
    common.add_argument("--j-max", type=float, help="jerk limit; defaults to limits.j_lim")
    common.add_argument("--iters", type=int, help="line-search iterations")
    common.add_argument("--single-precision", action="store_true",
                        help="run the line search in float32")

    p = argparse.ArgumentParser(prog="jerkseg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan", parents=[common], help="plan one jerk segment (JSON)")
    sp.add_argument("--a-max", type=float, required=True)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("simulate", parents=[common], help="sample a trajectory (CSV)")
    sp.add_argument("--a-max", type=float)
    sp.add_argument("--segment", help="segment document from 'plan' ('-' for stdin)")
    sp.add_argument("--method", choices=analysis.METHODS, default="ocp")
    sp.add_argument("--dt", type=float, default=DEFAULT_DT)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--oracle", choices=("closed", "rk4"), default="closed")
    sp.set_defaults(func=cmd_simulate)

    for name, func, helptext in (
        ("sweep", cmd_sweep, "segment durations per method (CSV)"),
        ("critical-damping", cmd_critical_damping, "damping where sections merge (CSV)"),
    ):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--a-min", type=float, default=1.0)
        sp.add_argument("--a-max", type=float, default=40.0)
        sp.add_argument("--n", type=int, default=40)
        sp.add_argument("--log", action="store_true", help="geometric spacing")
        sp.add_argument("--jobs", type=int, default=1)
        if name == "sweep":
            sp.add_argument("--methods", help="comma list of ocp,zv,scurve")
        sp.set_defaults(func=func)

    sp = sub.add_parser("fit", parents=[common], help="fit a damped sinusoid (JSON)")
    sp.add_argument("input", nargs="?", default="-", help="two-column t,x file ('-' for stdin)")
    sp.add_argument("--t-start", type=float, required=True)
    sp.add_argument("--offset", type=float, default=0.0)
    sp.add_argument("--delta0", type=float)
    sp.add_argument("--omega0", type=float)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("config", parents=[common], help="print the effective config (INI)")
    sp.set_defaults(func=cmd_config)
    return p


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_PLANNING


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    buf = io.StringIO()
    try:
        cfg = load_config(args.config, args.preset)
        code = args.func(args, cfg, buf)
    except JerkSegError as exc:
        print(f"jerkseg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    if args.output == "-":
        sys.stdout.write(buf.getvalue())
        sys.stdout.flush()
    else:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(buf.getvalue())
    return code


if __name__ == "__main__":
    raise SystemExit(main())
