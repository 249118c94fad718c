"""Command-line front end.

Subcommands:
    simulate        closed-loop tracking run from a config file
    replay          open-loop replay of a stored (optionally filtered) field series
    study           convergence table over dt and basis-cutoff grids
    tracks preview  sample a track and check admissibility without propagating

Typed errors map one-to-one onto exit codes (see EXIT_CODES).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import output
from .engine import convergence_study, run_replay, run_tracking
from .errors import (
    BasisLeakage,
    ConfigError,
    ConsistencyError,
    GridMismatch,
    NonConvergent,
    NonFinite,
    NonUniformSampling,
    PointOutsideDisk,
    RotorTrackError,
    SingularityGuard,
    TooFewPoints,
    TrackDataError,
)
from .rotor import BasisSpec, RotorState
from .tracks import consistency_check, lowpass_filter

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SINGULARITY = 2
EXIT_LEAKAGE = 3
EXIT_CONFIG = 4
EXIT_GRID = 5
EXIT_NONCONVERGENT = 6
EXIT_NONFINITE = 7

EXIT_CODES = {
    SingularityGuard: EXIT_SINGULARITY,
    BasisLeakage: EXIT_LEAKAGE,
    ConfigError: EXIT_CONFIG,
    PointOutsideDisk: EXIT_CONFIG,
    TooFewPoints: EXIT_CONFIG,
    TrackDataError: EXIT_CONFIG,
    ConsistencyError: EXIT_CONFIG,
    GridMismatch: EXIT_GRID,
    NonUniformSampling: EXIT_GRID,
    NonConvergent: EXIT_NONCONVERGENT,
    NonFinite: EXIT_NONFINITE,
}


def _exit_code(exc: RotorTrackError) -> int:
    for klass, code in EXIT_CODES.items():
        if isinstance(exc, klass):
            return code
    return EXIT_ERROR


def _prepare(config_path, out_override):
    cfg = cfgmod.parse_config(config_path)
    units = cfgmod.unit_system(cfg)
    T = cfgmod.horizon_reduced(cfg, units)
    out_dir = Path(out_override) if out_override else Path(cfg.output["directory"])
    out_dir.mkdir(parents=True, exist_ok=True)
    cfgmod.write_resolved_config(cfg, out_dir / "resolved_config.json")
    return cfg, units, T, out_dir


def _write_run_artifacts(cfg, units, out_dir, record, prefix=""):
    formats = cfg.output["formats"]
    if "csv" in formats:
        output.write_record_csv(out_dir / f"{prefix}record.csv", record, units)
        output.write_fields_csv(out_dir / f"{prefix}fields.csv", record)
    if "svg" in formats:
        output.plot_traces(out_dir / f"{prefix}traces.svg", record)
        output.plot_plane(out_dir / f"{prefix}plane.svg", record)
        output.plot_populations(out_dir / f"{prefix}populations.svg", record)
    if "frames" in formats:
        output.write_frames(out_dir / "frames", record, cfg.output["max_frames"])


def cmd_simulate(args) -> int:
    cfg, units, T, out_dir = _prepare(args.config, args.out)
    report = cfgmod.convert_units(cfg)
    for line in report.lines():
        print(line)
    track = cfgmod.build_track(cfg, T)
    params = cfgmod.build_params(cfg, T)
    guard = cfgmod.build_guard(cfg)
    state0 = RotorState.ground(BasisSpec(cfg.rotor["M"]))
    try:
        record = run_tracking(state0, track, guard, params)
    except (SingularityGuard, BasisLeakage, NonConvergent) as exc:
        # keep the partial record for post-mortem inspection
        if exc.record is not None:
            _write_run_artifacts(cfg, units, out_dir, exc.record)
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    _write_run_artifacts(cfg, units, out_dir, record)
    print(f"run complete: max deviation {record.max_deviation:.3e}, "
          f"min determinant {record.min_determinant:.3e}, "
          f"artifacts in {out_dir}")
    return EXIT_OK


def cmd_replay(args) -> int:
    cfg, units, T, out_dir = _prepare(args.config, args.out)
    times, eps = output.read_fields_csv(args.fields)
    cutoff = args.cutoff
    if cutoff is not None:
        eps = lowpass_filter(times, eps, cutoff)
    track = cfgmod.build_track(cfg, T)
    params = cfgmod.build_params(cfg, T)
    state0 = RotorState.ground(BasisSpec(cfg.rotor["M"]))
    record = run_replay(state0, (times, eps), params, track=track)
    _write_run_artifacts(cfg, units, out_dir, record, prefix="replay_")
    report = output.deviation_report(record)
    report["cutoff"] = cutoff
    output.write_report_json(out_dir / "replay_report.json", report)
    print(f"replay complete: max deviation {report['max_deviation_running']:.3e}, "
          f"rms {report['rms_deviation']:.3e}")
    return EXIT_OK


def _parse_list(text, kind, name):
    try:
        items = [kind(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--{name}: expected comma-separated values, got {text!r}") from exc
    if not items:
        raise ConfigError(f"--{name}: list must not be empty")
    return items


def cmd_study(args) -> int:
    cfg, units, T, out_dir = _prepare(args.config, args.out)
    dt_list = _parse_list(args.dt, float, "dt")
    m_list = _parse_list(args.m, int, "m")
    track = cfgmod.build_track(cfg, T)
    params = cfgmod.build_params(cfg, T)
    guard = cfgmod.build_guard(cfg)
    cells = convergence_study(track, params, dt_list, m_list, guard=guard)
    output.write_study_csv(out_dir / "study.csv", cells)
    print(f"{'dt':>10} {'M':>4} {'max_dev':>12} {'runtime':>9}  status")
    for c in cells:
        print(f"{c.dt:>10g} {c.M:>4d} {c.max_deviation:>12.3e} {c.runtime_s:>8.2f}s  {c.status}")
    ok = [c for c in cells if c.status == "ok"]
    if ok:
        best = min(ok, key=lambda c: c.max_deviation)
        print(f"best cell: dt={best.dt:g}, M={best.M}, deviation {best.max_deviation:.3e}")
    return EXIT_OK


def cmd_tracks_preview(args) -> int:
    cfg, units, T, out_dir = _prepare(args.config, args.out)
    track = cfgmod.build_track(cfg, T)
    n = 2048
    t = np.linspace(0.0, T, n)
    x, y = track.values(t)
    d2x, d2y = track.second_derivative(t)
    r = np.sqrt(np.asarray(x) ** 2 + np.asarray(y) ** 2)
    output._write_csv(
        out_dir / "track_preview.csv",
        ["t", "x_d", "y_d", "d2x_d", "d2y_d", "radius"],
        ([t[i], x[i], y[i], d2x[i], d2y[i], r[i]] for i in range(n)),
    )
    state0 = RotorState.ground(BasisSpec(cfg.rotor["M"]))
    rep = consistency_check(state0, track)
    print(f"track '{track.kind}' over T={T:g}: max radius {r.max():.6f} "
          f"(admissible: {r.max() < 1.0})")
    print(f"ground-state consistency at t=0: "
          f"{'pass' if rep.passed else 'FAIL'} (worst residual {rep.worst:.3e})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotortrack",
        description="Orientation tracking control for a planar rigid rotor",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="closed-loop tracking run")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", default=None, help="override output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_rep = sub.add_parser("replay", help="open-loop replay of stored fields")
    p_rep.add_argument("--config", required=True)
    p_rep.add_argument("--fields", required=True, help="fields.csv from a prior run")
    p_rep.add_argument("--cutoff", type=float, default=None,
                       help="low-pass cutoff in cycles per reduced time unit")
    p_rep.add_argument("--out", default=None)
    p_rep.set_defaults(func=cmd_replay)

    p_study = sub.add_parser("study", help="dt/M convergence table")
    p_study.add_argument("--config", required=True)
    p_study.add_argument("--dt", required=True, help="comma-separated dt list")
    p_study.add_argument("--m", required=True, help="comma-separated M list")
    p_study.add_argument("--out", default=None)
    p_study.set_defaults(func=cmd_study)

    p_tracks = sub.add_parser("tracks", help="track utilities")
    tracks_sub = p_tracks.add_subparsers(dest="tracks_command", required=True)
    p_prev = tracks_sub.add_parser("preview", help="sample a track without propagating")
    p_prev.add_argument("--config", required=True)
    p_prev.add_argument("--out", default=None)
    p_prev.set_defaults(func=cmd_tracks_preview)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RotorTrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
