"""Command-line front end.

    loadertwin ik --theta4 0.1 --height 1500
    loadertwin simulate --config twin.toml --out-dir run/
    loadertwin calibrate --config twin.toml --measured run/trace.csv --out-dir fit/
    loadertwin report --config twin.toml --result fit/report.json --out-dir fit/

Exit status: 0 on success, 1 for bad input (usage, configuration, files),
2 for domain failures (unreachable targets, unstable simulations, failed
calibrations).  ``--format json`` switches stdout to a single JSON document.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
from typing import Dict, List, Optional

from . import io as tio
from . import plotting
from .calibration import FIELDS, calibrate
from .errors import ConfigError, DomainError, IoError, TwinError, ValidationError
from .mechanism import (CylinderExtensions, LinkageGeometry, TaskTarget, forward_kinematics,
                        inverse_kinematics)
from .terrain.contact import TerrainParams
from .terrain.dig import pose_trace
from .traces import ForceTrace

CONFIG_ENV = "LOADERTWIN_CONFIG"
PARAM_ALIASES = {"E": "young_modulus", "mu_t": "friction", "e": "restitution",
                 "d": "particle_size", "mu_r": "rolling_resistance"}
PARAM_LABELS = (
    ("young_modulus", "Young's modulus (Pa)"),
    ("friction", "Friction coefficient"),
    ("restitution", "Coefficient of restitution"),
    ("particle_size", "Soil particle size (m)"),
    ("rolling_resistance", "Rolling resistance coefficient"),
)

log = logging.getLogger("loadertwin")


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    # usage mistakes are bad input, exit 1; 2 is reserved for domain errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ----------------------------------------------------------------------------
# output helpers


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        sys.stdout.write(tio.dumps_json(payload))
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _out_path(args, name: str) -> str:
    return os.path.join(args.out_dir, name)


def _finite(v):
    return v if math.isfinite(v) else repr(float(v))


def _config(args, required: bool) -> tio.TwinConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        if required:
            raise UsageError(f"--config is required for {args.command} "
                             f"(or set {CONFIG_ENV})")
        cfg = tio.TwinConfig()
    else:
        cfg = tio.load_config(path)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _params(base: TerrainParams, overrides: Optional[List[str]]) -> TerrainParams:
    changes = {}
    names = {f.name for f in dataclasses.fields(TerrainParams)}
    for item in overrides or ():
        key, sep, value = item.partition("=")
        key = PARAM_ALIASES.get(key.strip(), key.strip())
        if not sep or key not in names:
            raise UsageError(f"--param expects NAME=VALUE with NAME one of "
                             f"{', '.join(sorted(names | set(PARAM_ALIASES)))}; got {item!r}")
        try:
            changes[key] = float(value)
        except ValueError:
            raise UsageError(f"--param {key}: {value!r} is not a number") from None
    return base.replace(**changes) if changes else base


def _trajectory(cfg: tio.TwinConfig, path: Optional[str]):
    return cfg.dig.trajectory() if path is None else tio.read_trajectory_csv(path)


def _joints_dict(sol) -> dict:
    d = {}
    for f in dataclasses.fields(sol):
        v = getattr(sol, f.name)
        if f.name == "extensions":
            d["s1"], d["s2"] = v.s1, v.s2
            d["s_lift"], d["s_tilt"] = v.s_lift, v.s_tilt
        elif isinstance(v, tuple):
            d[f.name] = list(v)
        else:
            d[f.name] = v
    return d


def _kv_text(d: dict) -> str:
    width = max(len(k) for k in d)
    return "".join(f"{k:<{width}}  {v}\n" for k, v in d.items())


# ----------------------------------------------------------------------------
# commands


def cmd_ik(args) -> int:
    cfg = _config(args, required=False)
    sol = inverse_kinematics(TaskTarget(args.theta4, args.height), cfg.geometry,
                             supplementary=args.supplementary, elbow=args.elbow)
    d = _joints_dict(sol)
    _emit(args, {"command": "ik", "solution": d}, _kv_text(d))
    return 0


def cmd_fk(args) -> int:
    cfg = _config(args, required=False)
    g: LinkageGeometry = cfg.geometry
    target, sol = forward_kinematics(CylinderExtensions(args.s1, args.s2, g.l17, g.l18), g)
    d = {"theta4": target.theta4, "y_p8": target.y_p8, **_joints_dict(sol)}
    _emit(args, {"command": "fk", "target": {"theta4": target.theta4, "y_p8": target.y_p8},
                 "solution": _joints_dict(sol)}, _kv_text(d))
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args, required=True)
    params = _params(cfg.terrain, args.param)
    traj = _trajectory(cfg, args.trajectory)
    trace = cfg.scenario(traj).run(params)
    path = args.output or _out_path(args, "trace.csv")
    tio.write_trace_csv(trace, path)
    summary = {"command": "simulate", "trace": path, "samples": len(trace.t),
               "peak_N": float(trace.f.max()), "mean_N": float(trace.f.mean()),
               "seed": cfg.seed}
    _emit(args, summary, _kv_text(summary))
    return 0


def cmd_gen_synthetic(args) -> int:
    cfg = _config(args, required=True)
    params = _params(cfg.terrain, args.param)
    traj = _trajectory(cfg, args.trajectory)
    force = cfg.scenario(traj, label="synthetic").run(params)
    pose = pose_trace(traj, label="synthetic")
    path = args.output or _out_path(args, "sensor_log.csv")
    tio.write_synthetic_log(path, pose, force, cfg.bucket_body)
    stem = os.path.splitext(path)[0]
    tio.write_trace_csv(force, stem + "_force.csv")
    tio.write_pose_csv(pose, stem + "_pose.csv")
    summary = {"command": "gen-synthetic", "log": path, "force_trace": stem + "_force.csv",
               "pose_trace": stem + "_pose.csv", "rows": len(force.t), "seed": cfg.seed}
    _emit(args, summary, _kv_text(summary))
    return 0


def _measured(cfg, path: str) -> ForceTrace:
    """A force trace CSV, or a sensor log when it carries no trace schema line."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if "kind=force_trace" in first:
        return tio.read_trace_csv(path)
    return tio.extract_traces(tio.read_sensor_log(path, cfg.mapping), cfg)[1]


def cmd_calibrate(args) -> int:
    cfg = _config(args, required=True)
    try:
        measured = _measured(cfg, args.measured)
    except OSError as exc:
        raise IoError(f"cannot read {args.measured}: {exc}") from exc
    traj = _trajectory(cfg, args.trajectory)
    problem = cfg.problem(measured, traj, budget=args.budget)
    result = calibrate(problem, jobs=args.jobs)
    report = _out_path(args, "report.json")
    tio.write_report(result, report, cfg)
    tio.write_iterations_csv(result, _out_path(args, "iterations.csv"))
    tio.write_trace_csv(measured, _out_path(args, "measured.csv"))
    scenario = problem.scenario
    tio.write_trace_csv(dataclasses.replace(scenario, label="initial").run(result.initial),
                        _out_path(args, "initial.csv"))
    tio.write_trace_csv(dataclasses.replace(scenario, label="fitted").run(result.fitted),
                        _out_path(args, "fitted.csv"))
    summary = {"command": "calibrate", "report": report, "evaluations": result.evaluations,
               "converged": result.converged, "objective": _finite(result.objective),
               "peak_error_pct": _finite(result.peak_error_pct),
               "avg_error_pct": _finite(result.avg_error_pct),
               "fitted": {k: getattr(result.fitted, k) for k in FIELDS}}
    _emit(args, summary, _kv_text({k: v for k, v in summary.items() if k != "fitted"})
          + _kv_text({k: getattr(result.fitted, k) for k in FIELDS}))
    return 0


def report_tables(result) -> str:
    """Parameter and error tables of a calibration result as aligned text."""
    rows = [("Parameter", "Pre-calibration", "Post-calibration")]
    for name, label in PARAM_LABELS:
        rows.append((label, f"{getattr(result.initial, name):.6g}",
                     f"{getattr(result.fitted, name):.6g}"))
    errs = [("Force error (%)", "Before calibration", "After calibration"),
            ("Peak", f"{result.initial_peak_error_pct:.2f}", f"{result.peak_error_pct:.2f}"),
            ("Average", f"{result.initial_avg_error_pct:.2f}", f"{result.avg_error_pct:.2f}")]
    out = []
    for title, table in (("Terrain parameters", rows), ("Force errors", errs)):
        w = [max(len(r[c]) for r in table) for c in range(3)]
        out.append(title)
        for k, r in enumerate(table):
            out.append(f"{r[0]:<{w[0]}}  {r[1]:>{w[1]}}  {r[2]:>{w[2]}}".rstrip())
            if k == 0:
                out.append("  ".join("-" * x for x in w))
        out.append("")
    out.append(f"Evaluations: {result.evaluations}  converged: {str(result.converged).lower()}")
    return "\n".join(out) + "\n"


def cmd_report(args) -> int:
    _config(args, required=True)
    result, raw = tio.read_report(args.result)
    text = report_tables(result)
    tio._write_text(_out_path(args, "tables.txt"), text)
    files = {"tables": _out_path(args, "tables.txt")}
    png = not args.no_png
    fig = plotting.emit_figure(args.out_dir, "history", plotting.history_series(result),
                               title="Calibration history", xlabel="evaluation",
                               ylabel="objective (%)", png=png)
    files.update({f"history_{k}": v for k, v in fig.items()})
    if args.trace:
        traces = [tio.read_trace_csv(p) for p in args.trace]
        fig = plotting.emit_figure(args.out_dir, "traces", plotting.trace_series(traces),
                                   title="Bucket force", xlabel="t (s)", ylabel="force (kN)",
                                   png=png)
        files.update({f"traces_{k}": v for k, v in fig.items()})
    payload = {"command": "report", "result": raw, "files": files}
    _emit(args, payload, text)
    return 0


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"TOML configuration (default: ${CONFIG_ENV})")
    common.add_argument("--seed", type=int, help="override the configured simulation seed")
    common.add_argument("--out-dir", default=".", help="directory for emitted files")
    common.add_argument("--format", choices=("text", "json"), default="text",
                        help="stdout format")
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress (twice for debug output)")

    parser = _Parser(prog="loadertwin", description="Wheel-loader digital twin tools.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ik", parents=[common], help="cylinder lengths for a bucket pose")
    p.add_argument("--theta4", type=float, required=True, help="bucket orientation (rad)")
    p.add_argument("--height", type=float, required=True, help="blade height y_p8 (mm)")
    p.add_argument("--supplementary", action="store_true", help="other arcsine branch")
    p.add_argument("--elbow", action="store_true", help="mirrored four-bar assembly")
    p.set_defaults(func=cmd_ik)

    p = sub.add_parser("fk", parents=[common], help="bucket pose for cylinder strokes")
    p.add_argument("--s1", type=float, required=True, help="lift cylinder stroke (mm)")
    p.add_argument("--s2", type=float, required=True, help="tilt cylinder stroke (mm)")
    p.set_defaults(func=cmd_fk)

    def sim_flags(p):
        p.add_argument("--trajectory", help="trajectory CSV (default: the configured dig)")
        p.add_argument("--param", action="append", metavar="NAME=VALUE",
                       help="terrain parameter override, repeatable")
        p.add_argument("--output", help="output file (default: in --out-dir)")

    p = sub.add_parser("simulate", parents=[common], help="dig-cycle force trace")
    sim_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen-synthetic", parents=[common], help="synthetic sensor log")
    sim_flags(p)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("calibrate", parents=[common], help="fit terrain parameters")
    p.add_argument("--measured", required=True, help="force trace CSV or sensor log")
    p.add_argument("--budget", type=int, help="objective evaluations (default: config)")
    p.add_argument("--trajectory", help="trajectory CSV (default: the configured dig)")
    p.add_argument("--jobs", type=int, default=1, help="parallel objective evaluations")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("report", parents=[common], help="tables and figures of a fit")
    p.add_argument("--result", required=True, help="report.json from calibrate")
    p.add_argument("--trace", action="append", help="force trace CSV to plot, repeatable")
    p.add_argument("--no-png", action="store_true", help="skip the matplotlib renderings")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DomainError as exc:
        stage = getattr(exc, "stage", None)
        print(f"loadertwin: {type(exc).__name__}: {exc}", file=sys.stderr)
        if stage:
            log.debug("failing stage: %s", stage)
        return 2
    except (ConfigError, IoError) as exc:
        print(f"loadertwin: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except TwinError as exc:  # pragma: no cover - every error derives from the two above
        print(f"loadertwin: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
