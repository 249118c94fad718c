"""Run configuration: JSON schema, validation, and object builders.

A run config is a JSON document with five sections (rotor, simulation,
track, guard, output). Validation applies defaults, rejects unknown keys,
and reports problems with the full path to the offending key. The fully
resolved config is echoed to the run directory so any run can be
reproduced bit-identically from its artifacts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .engine import SimParams
from .errors import ConfigError
from .fields import GuardConfig
from .tracks import (
    BlendedTrack,
    DataTrack,
    GaussianTrack,
    SpiralTrack,
    TrackSpec,
    read_points_csv,
)
from .units import UnitSystem

_TRACK_KINDS = ("gaussian", "spiral", "data")


def preset_path(name: str) -> Path:
    """Filesystem path of a shipped preset (gaussian.json, spiral.json, ...)."""
    from importlib.resources import files

    p = Path(str(files("rotortrack") / "presets" / name))
    if not p.exists():
        raise ConfigError(f"no shipped preset named {name!r}")
    return p


def _require(cond: bool, path: str, msg: str):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _as_section(raw: Any, path: str) -> dict:
    _require(isinstance(raw, dict), path, f"must be an object, got {type(raw).__name__}")
    return raw


def _reject_unknown(section: dict, allowed: set[str], path: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown key")


def _num(section: dict, key: str, path: str, default=None, required=False,
         positive=False, integer=False):
    if key not in section or section[key] is None:
        _require(not required, f"{path}.{key}", "missing required key")
        return default
    v = section[key]
    if integer:
        _require(isinstance(v, int) and not isinstance(v, bool),
                 f"{path}.{key}", f"must be an integer, got {v!r}")
    else:
        _require(isinstance(v, (int, float)) and not isinstance(v, bool),
                 f"{path}.{key}", f"must be a number, got {v!r}")
        _require(math.isfinite(v), f"{path}.{key}", f"must be finite, got {v!r}")
    if positive:
        _require(v > 0, f"{path}.{key}", f"must be positive, got {v!r}")
    return v


@dataclass(frozen=True)
class RunConfig:
    """Validated, fully-defaulted run configuration."""

    rotor: dict
    simulation: dict
    track: dict
    guard: dict
    output: dict
    source_path: Optional[Path] = None

    def resolved(self) -> dict:
        return {
            "rotor": dict(self.rotor),
            "simulation": dict(self.simulation),
            "track": dict(self.track),
            "guard": dict(self.guard),
            "output": dict(self.output),
        }


def parse_config(path) -> RunConfig:
    """Load and validate a JSON run configuration file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
    cfg = validate_config(raw)
    return RunConfig(**{**cfg.__dict__, "source_path": p})


def validate_config(raw: Any) -> RunConfig:
    _require(isinstance(raw, dict), "config", "top level must be a JSON object")
    _reject_unknown(raw, {"rotor", "simulation", "track", "guard", "output"}, "config")
    for need in ("rotor", "simulation", "track"):
        _require(need in raw, f"config.{need}", "missing required section")

    rotor = _as_section(raw["rotor"], "rotor")
    _reject_unknown(rotor, {"B_invcm", "mu_debye", "M"}, "rotor")
    r = {
        "B_invcm": _num(rotor, "B_invcm", "rotor", required=True, positive=True),
        "mu_debye": _num(rotor, "mu_debye", "rotor", required=True, positive=True),
        "M": _num(rotor, "M", "rotor", default=16, positive=True, integer=True),
    }
    _require(r["M"] >= 1, "rotor.M", f"must be >= 1, got {r['M']}")

    sim = _as_section(raw["simulation"], "simulation")
    _reject_unknown(sim, {"T_reduced", "T_ps", "dt", "midpoint_iters", "leakage_tol",
                          "record_stride", "consistency"}, "simulation")
    t_red = _num(sim, "T_reduced", "simulation", positive=True)
    t_ps = _num(sim, "T_ps", "simulation", positive=True)
    _require((t_red is None) != (t_ps is None), "simulation",
             "exactly one of T_reduced or T_ps must be set")
    s = {
        "T_reduced": t_red,
        "T_ps": t_ps,
        "dt": _num(sim, "dt", "simulation", required=True, positive=True),
        "midpoint_iters": _num(sim, "midpoint_iters", "simulation", default=1,
                               integer=True),
        "leakage_tol": _num(sim, "leakage_tol", "simulation", default=1e-6,
                            positive=True),
        "record_stride": _num(sim, "record_stride", "simulation", default=None,
                              positive=True, integer=True),
        "consistency": sim.get("consistency", "error"),
    }
    _require(0 <= s["midpoint_iters"] <= 8, "simulation.midpoint_iters",
             f"must lie in [0, 8], got {s['midpoint_iters']}")
    _require(s["consistency"] in ("error", "warn", "skip"), "simulation.consistency",
             f"must be one of error|warn|skip, got {s['consistency']!r}")

    track = _as_section(raw["track"], "track")
    kind = track.get("kind")
    _require(kind in _TRACK_KINDS, "track.kind",
             f"must be one of {'|'.join(_TRACK_KINDS)}, got {kind!r}")
    t = _validate_track(track)

    guard = _as_section(raw.get("guard", {}), "guard")
    _reject_unknown(guard, {"d_min", "margin_min"}, "guard")
    g = {
        "d_min": _num(guard, "d_min", "guard", default=1e-8, positive=True),
        "margin_min": _num(guard, "margin_min", "guard", default=1e-6, positive=True),
    }

    output = _as_section(raw.get("output", {}), "output")
    _reject_unknown(output, {"directory", "formats", "max_frames"}, "output")
    formats = output.get("formats", ["csv", "svg"])
    _require(isinstance(formats, list) and all(isinstance(f, str) for f in formats),
             "output.formats", f"must be a list of strings, got {formats!r}")
    for f in formats:
        _require(f in ("csv", "svg", "frames"), "output.formats",
                 f"unknown format {f!r} (choose from csv, svg, frames)")
    o = {
        "directory": output.get("directory", "run"),
        "formats": formats,
        "max_frames": _num(output, "max_frames", "output", default=500,
                           positive=True, integer=True),
    }
    _require(isinstance(o["directory"], str), "output.directory",
             f"must be a string, got {o['directory']!r}")

    return RunConfig(rotor=r, simulation=s, track=t, guard=g, output=o)


def _validate_track(track: dict) -> dict:
    kind = track["kind"]
    if kind == "gaussian":
        _reject_unknown(track, {"kind", "alpha", "blend_window"}, "track")
        alpha = _num(track, "alpha", "track", required=True, positive=True)
        _require(alpha < 1.0, "track.alpha",
                 f"must satisfy alpha < 1 so the track stays strictly inside "
                 f"the unit disk, got {alpha}")
        out = {"kind": kind, "alpha": alpha}
    elif kind == "spiral":
        _reject_unknown(track, {"kind", "beta", "omega", "c1", "c2", "c3",
                                "blend_window"}, "track")
        out = {
            "kind": kind,
            "beta": _num(track, "beta", "track", default=None, positive=True),
            "omega": _num(track, "omega", "track", default=0.5),
            "c1": _num(track, "c1", "track", default=None, positive=True),
            "c2": _num(track, "c2", "track", default=None, positive=True),
            "c3": _num(track, "c3", "track", default=0.2, positive=True),
        }
    else:  # data
        _reject_unknown(track, {"kind", "path", "resample_n", "smooth_window",
                                "rescale", "arc_length", "blend_window"}, "track")
        _require(isinstance(track.get("path"), str) and track["path"],
                 "track.path", "missing CSV path for the data track")
        arc = track.get("arc_length", False)
        _require(isinstance(arc, bool), "track.arc_length",
                 f"must be true or false, got {arc!r}")
        out = {
            "kind": kind,
            "path": track["path"],
            "resample_n": _num(track, "resample_n", "track", default=None,
                               positive=True, integer=True),
            "smooth_window": _num(track, "smooth_window", "track", default=None,
                                  positive=True, integer=True),
            "rescale": _num(track, "rescale", "track", default=None, positive=True),
            "arc_length": arc,
        }
        if out["rescale"] is not None:
            _require(out["rescale"] < 1.0, "track.rescale",
                     f"must be < 1 (unit-disk admissibility), got {out['rescale']}")
    blend = _num(track, "blend_window", "track", default=None, positive=True)
    out["blend_window"] = blend
    return out


@dataclass(frozen=True)
class UnitReport:
    """Resolved reduced-unit parameters with their laboratory equivalents."""

    time_unit_ps: float
    field_unit_V_per_m: float
    T_reduced: float
    T_ps: float
    dt_reduced: float
    dt_ps: float

    def lines(self) -> list[str]:
        return [
            f"time unit (hbar/B): {self.time_unit_ps:.6g} ps",
            f"field unit (B/mu):  {self.field_unit_V_per_m:.6g} V/m",
            f"horizon:            T = {self.T_reduced:g} reduced = {self.T_ps:.6g} ps",
            f"step:               dt = {self.dt_reduced:g} reduced = {self.dt_ps:.6g} ps",
        ]


def unit_system(cfg: RunConfig) -> UnitSystem:
    return UnitSystem(B_invcm=cfg.rotor["B_invcm"], mu_debye=cfg.rotor["mu_debye"])


def horizon_reduced(cfg: RunConfig, units: Optional[UnitSystem] = None) -> float:
    units = units or unit_system(cfg)
    if cfg.simulation["T_reduced"] is not None:
        return float(cfg.simulation["T_reduced"])
    return units.ps_to_reduced(cfg.simulation["T_ps"])


def convert_units(cfg: RunConfig) -> UnitReport:
    """Resolve all times to reduced units and report laboratory values."""
    units = unit_system(cfg)
    T = horizon_reduced(cfg, units)
    dt = cfg.simulation["dt"]
    return UnitReport(
        time_unit_ps=units.time_unit_ps,
        field_unit_V_per_m=units.field_unit_V_per_m,
        T_reduced=T,
        T_ps=units.reduced_to_ps(T),
        dt_reduced=dt,
        dt_ps=units.reduced_to_ps(dt),
    )


def build_track(cfg: RunConfig, T: Optional[float] = None) -> TrackSpec:
    """Construct the TrackSpec described by the config's track section."""
    T = horizon_reduced(cfg) if T is None else T
    tc = cfg.track
    kind = tc["kind"]
    if kind == "gaussian":
        track: TrackSpec = GaussianTrack(tc["alpha"], T)
    elif kind == "spiral":
        track = SpiralTrack(beta=tc["beta"], omega=tc["omega"], c1=tc["c1"],
                            c2=tc["c2"], c3=tc["c3"], T=T)
    else:
        csv_path = Path(tc["path"])
        if not csv_path.is_absolute() and cfg.source_path is not None:
            csv_path = cfg.source_path.parent / csv_path
        points, knot_times = read_points_csv(csv_path)
        track = DataTrack(points, T, resample_n=tc["resample_n"],
                          smooth_window=tc["smooth_window"], knot_times=knot_times,
                          arc_length=tc["arc_length"], rescale=tc["rescale"])
    if tc.get("blend_window"):
        track = BlendedTrack(track, tc["blend_window"])
    return track


def build_params(cfg: RunConfig, T: Optional[float] = None) -> SimParams:
    T = horizon_reduced(cfg) if T is None else T
    s = cfg.simulation
    return SimParams(
        dt=s["dt"], T=T, midpoint_iters=s["midpoint_iters"],
        leakage_tol=s["leakage_tol"], record_stride=s["record_stride"],
        consistency=s["consistency"],
    )


def build_guard(cfg: RunConfig) -> GuardConfig:
    return GuardConfig(d_min=cfg.guard["d_min"], margin_min=cfg.guard["margin_min"])


def write_resolved_config(cfg: RunConfig, path):
    Path(path).write_text(json.dumps(cfg.resolved(), indent=2) + "\n")
