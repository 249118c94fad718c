import json

import numpy as np
import pytest

from rotortrack import ConfigError, UnitSystem
from rotortrack.cli import main
from rotortrack.config import (
    build_guard,
    build_params,
    build_track,
    convert_units,
    parse_config,
    preset_path,
    validate_config,
)

OCS = {"B_invcm": 0.203, "mu_debye": 0.709}


def tiny_config(tmp_path, **overrides):
    """A fast-running config for CLI round trips."""
    cfg = {
        "rotor": {**OCS, "M": 8},
        "simulation": {"T_reduced": 5.0, "dt": 1e-3, "midpoint_iters": 1},
        "track": {"kind": "gaussian", "alpha": 0.2},
        "output": {"directory": str(tmp_path / "out"), "formats": ["csv"]},
    }
    for key, val in overrides.items():
        cfg[key] = val
    p = tmp_path / "config.json"
    p.write_text(json.dumps(cfg))
    return p


class TestUnitSystem:
    def test_time_unit_for_ocs(self):
        u = UnitSystem(**OCS)
        assert u.time_unit_ps == pytest.approx(26.15, abs=0.01)

    def test_roundtrip(self):
        u = UnitSystem(**OCS)
        for t in (0.1, 1.0, 522.0, 1e6):
            assert u.ps_to_reduced(u.reduced_to_ps(t)) == pytest.approx(t, rel=1e-12)

    def test_field_unit_scale(self):
        u = UnitSystem(**OCS)
        assert u.field_unit_V_per_m == pytest.approx(1.705e6, rel=1e-3)

    def test_validation(self):
        with pytest.raises(ValueError):
            UnitSystem(B_invcm=-1.0, mu_debye=0.7)


class TestParseConfig:
    def test_gaussian_preset(self):
        cfg = parse_config(preset_path("gaussian.json"))
        assert cfg.track["alpha"] == 0.9
        assert cfg.simulation["T_reduced"] == 50.0
        assert cfg.rotor["M"] == 16

    def test_alpha_at_least_one_rejected(self, tmp_path):
        p = tiny_config(tmp_path, track={"kind": "gaussian", "alpha": 1.1})
        with pytest.raises(ConfigError, match="alpha < 1"):
            parse_config(p)

    def test_missing_rotor_section(self, tmp_path):
        raw = json.loads(tiny_config(tmp_path).read_text())
        del raw["rotor"]
        with pytest.raises(ConfigError, match="config.rotor"):
            validate_config(raw)

    def test_unknown_key_rejected(self, tmp_path):
        raw = json.loads(tiny_config(tmp_path).read_text())
        raw["simulation"]["dtt"] = 1e-3
        with pytest.raises(ConfigError, match="simulation.dtt"):
            validate_config(raw)

    def test_both_horizons_rejected(self, tmp_path):
        raw = json.loads(tiny_config(tmp_path).read_text())
        raw["simulation"]["T_ps"] = 100.0
        with pytest.raises(ConfigError, match="exactly one of"):
            validate_config(raw)

    def test_horizon_in_ps(self, tmp_path):
        raw = json.loads(tiny_config(tmp_path).read_text())
        del raw["simulation"]["T_reduced"]
        raw["simulation"]["T_ps"] = 2.0 * UnitSystem(**OCS).time_unit_ps
        cfg = validate_config(raw)
        report = convert_units(cfg)
        assert report.T_reduced == pytest.approx(2.0, rel=1e-12)

    def test_bad_track_kind(self, tmp_path):
        raw = json.loads(tiny_config(tmp_path).read_text())
        raw["track"] = {"kind": "zigzag"}
        with pytest.raises(ConfigError, match="track.kind"):
            validate_config(raw)

    def test_defaults_applied(self, tmp_path):
        cfg = parse_config(tiny_config(tmp_path))
        assert cfg.guard["d_min"] == 1e-8
        assert cfg.guard["margin_min"] == 1e-6
        assert cfg.simulation["leakage_tol"] == 1e-6

    def test_bad_type_diagnostics(self, tmp_path):
        raw = json.loads(tiny_config(tmp_path).read_text())
        raw["rotor"]["M"] = 8.5
        with pytest.raises(ConfigError, match="rotor.M"):
            validate_config(raw)


class TestConvertUnits:
    def test_gaussian_horizon_anchor(self):
        # 0.4 * T for the shipped 50-unit horizon sits near 523 ps
        cfg = parse_config(preset_path("gaussian.json"))
        report = convert_units(cfg)
        assert 0.4 * report.T_ps == pytest.approx(523.0, abs=1.0)
        assert abs(0.4 * report.T_ps - 522.0) / 522.0 < 0.005

    def test_spiral_horizon_in_ns(self):
        cfg = parse_config(preset_path("spiral.json"))
        report = convert_units(cfg)
        assert report.T_ps == pytest.approx(3.92e3, rel=2e-3)


class TestBuilders:
    def test_build_objects_from_preset(self):
        cfg = parse_config(preset_path("gaussian.json"))
        track = build_track(cfg)
        params = build_params(cfg)
        guard = build_guard(cfg)
        assert track.kind == "gaussian"
        assert params.T == 50.0
        assert guard.d_min == 1e-8

    def test_circle_preset_track(self):
        cfg = parse_config(preset_path("circle.json"))
        track = build_track(cfg)
        assert track.kind == "blended"
        # spline may overshoot the knot radius by a hair between knots
        assert track.max_radius() == pytest.approx(0.5, abs=1e-5)

    def test_data_path_relative_to_config(self, tmp_path):
        csv = tmp_path / "pts.csv"
        csv.write_text("x,y\n0,0\n0.1,0\n0.2,0\n0.3,0\n")
        p = tiny_config(tmp_path, track={"kind": "data", "path": "pts.csv"})
        track = build_track(parse_config(p))
        assert track.kind == "data"

    def test_spiral_preset_defaults(self):
        cfg = parse_config(preset_path("spiral.json"))
        track = build_track(cfg)
        assert track.kind == "spiral"
        assert track.beta == pytest.approx(0.95 / 150.0)
        assert track.c1 == pytest.approx(150.0 / 4.0)
        assert track.omega == 0.5

    @pytest.mark.parametrize("name", ["gaussian.json", "spiral.json", "circle.json"])
    def test_shipped_presets_admissible(self, name):
        track = build_track(parse_config(preset_path(name)))
        t = np.linspace(0.0, track.T, 10_000)
        x, y = track.values(t)
        assert np.max(np.asarray(x) ** 2 + np.asarray(y) ** 2) < 1.0 - 1e-3


class TestCliSimulate:
    def test_tiny_run_artifacts(self, tmp_path):
        p = tiny_config(tmp_path)
        assert main(["simulate", "--config", str(p)]) == 0
        out = tmp_path / "out"
        assert (out / "resolved_config.json").exists()
        assert (out / "record.csv").exists()
        assert (out / "fields.csv").exists()
        header = (out / "record.csv").read_text().splitlines()[0].split(",")
        assert header[:11] == ["t", "t_ps", "eps_x", "eps_y", "ox", "oy",
                               "ox_d", "oy_d", "D", "margin", "norm"]
        assert header[11] == "pop_m-8"
        assert header[-1] == "pop_m8"
        data = np.loadtxt(out / "record.csv", delimiter=",", skiprows=1)
        assert np.isfinite(data).all()
        assert np.all(np.diff(data[:, 0]) > 0)

    def test_resolved_config_reruns_identically(self, tmp_path):
        p = tiny_config(tmp_path)
        assert main(["simulate", "--config", str(p)]) == 0
        resolved = tmp_path / "out" / "resolved_config.json"
        rerun_cfg = json.loads(resolved.read_text())
        rerun_cfg["output"]["directory"] = str(tmp_path / "out2")
        p2 = tmp_path / "config2.json"
        p2.write_text(json.dumps(rerun_cfg))
        assert main(["simulate", "--config", str(p2)]) == 0
        a = (tmp_path / "out" / "fields.csv").read_text()
        b = (tmp_path / "out2" / "fields.csv").read_text()
        assert a == b

    def test_guard_trip_exit_code_and_partial_artifacts(self, tmp_path):
        p = tiny_config(tmp_path, guard={"margin_min": 0.999})
        assert main(["simulate", "--config", str(p)]) == 2
        # partial record still written for post-mortem work
        assert (tmp_path / "out" / "record.csv").exists()

    def test_leakage_exit_code(self, tmp_path):
        p = tiny_config(
            tmp_path,
            rotor={**OCS, "M": 2},
            track={"kind": "gaussian", "alpha": 0.9},
            simulation={"T_reduced": 20.0, "dt": 1e-3, "midpoint_iters": 1},
        )
        assert main(["simulate", "--config", str(p)]) == 3

    def test_config_error_exit_code(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"rotor": OCS}))
        assert main(["simulate", "--config", str(p)]) == 4

    def test_radius_one_data_rejected(self, tmp_path):
        csv = tmp_path / "circle.csv"
        th = np.linspace(0, 2 * np.pi, 16)
        lines = ["x,y"] + [f"{np.cos(t)},{np.sin(t)}" for t in th]
        csv.write_text("\n".join(lines) + "\n")
        p = tiny_config(tmp_path, track={"kind": "data", "path": str(csv)})
        assert main(["simulate", "--config", str(p)]) == 4

    def test_out_override(self, tmp_path):
        p = tiny_config(tmp_path)
        dest = tmp_path / "elsewhere"
        assert main(["simulate", "--config", str(p), "--out", str(dest)]) == 0
        assert (dest / "record.csv").exists()

    def test_svg_outputs(self, tmp_path):
        p = tiny_config(tmp_path)
        raw = json.loads(p.read_text())
        raw["output"]["formats"] = ["csv", "svg", "frames"]
        p.write_text(json.dumps(raw))
        assert main(["simulate", "--config", str(p)]) == 0
        out = tmp_path / "out"
        for name in ("traces.svg", "plane.svg", "populations.svg"):
            assert (out / name).stat().st_size > 0
        frames = sorted((out / "frames").glob("frame_*.csv"))
        assert frames
        assert frames[0].read_text().splitlines()[0] == "t,ox,oy"


class TestCliReplay:
    def test_replay_own_fields(self, tmp_path):
        p = tiny_config(tmp_path)
        assert main(["simulate", "--config", str(p)]) == 0
        fields = tmp_path / "out" / "fields.csv"
        assert main(["replay", "--config", str(p), "--fields", str(fields),
                     "--out", str(tmp_path / "rep")]) == 0
        report = json.loads((tmp_path / "rep" / "replay_report.json").read_text())
        assert report["cutoff"] is None
        # open-loop replay reproduces the closed-loop run's achieved path
        orig = np.loadtxt(tmp_path / "out" / "record.csv", delimiter=",", skiprows=1)
        rep = np.loadtxt(tmp_path / "rep" / "replay_record.csv", delimiter=",",
                         skiprows=1)
        assert np.abs(rep[:, 4:6] - orig[:, 4:6]).max() < 1e-9

    def test_replay_with_cutoff(self, tmp_path):
        p = tiny_config(tmp_path)
        assert main(["simulate", "--config", str(p)]) == 0
        fields = tmp_path / "out" / "fields.csv"
        assert main(["replay", "--config", str(p), "--fields", str(fields),
                     "--cutoff", "4.0", "--out", str(tmp_path / "rep")]) == 0
        report = json.loads((tmp_path / "rep" / "replay_report.json").read_text())
        assert report["cutoff"] == 4.0

    def test_truncated_fields_exit_code(self, tmp_path):
        p = tiny_config(tmp_path)
        assert main(["simulate", "--config", str(p)]) == 0
        fields = tmp_path / "out" / "fields.csv"
        lines = fields.read_text().splitlines()
        trunc = tmp_path / "trunc.csv"
        trunc.write_text("\n".join(lines[:-50]) + "\n")
        assert main(["replay", "--config", str(p), "--fields", str(trunc),
                     "--out", str(tmp_path / "rep")]) == 5

    def test_missing_fields_file(self, tmp_path):
        p = tiny_config(tmp_path)
        assert main(["replay", "--config", str(p), "--fields",
                     str(tmp_path / "nope.csv")]) == 5

    def test_byte_truncated_fields_file(self, tmp_path):
        # a partially written final row must fail typed, not crash
        p = tiny_config(tmp_path)
        ragged = tmp_path / "ragged.csv"
        ragged.write_text("t,eps_x,eps_y\n0,1.0,2.0\n0.001,1.0\n")
        assert main(["replay", "--config", str(p), "--fields", str(ragged)]) == 4


class TestCliStudy:
    def test_study_table(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ROTORTRACK_THREADS", "2")
        p = tiny_config(tmp_path)
        assert main(["study", "--config", str(p), "--dt", "2e-3,1e-3",
                     "--m", "8", "--out", str(tmp_path / "study")]) == 0
        rows = (tmp_path / "study" / "study.csv").read_text().splitlines()
        assert rows[0] == "dt,M,max_deviation,runtime_s,status"
        assert len(rows) == 3
        devs = [float(r.split(",")[2]) for r in rows[1:]]
        assert devs[1] <= devs[0] * 1.05

    def test_empty_dt_list(self, tmp_path):
        p = tiny_config(tmp_path)
        assert main(["study", "--config", str(p), "--dt", "", "--m", "8"]) == 4

    def test_leaky_cell_marked(self, tmp_path):
        p = tiny_config(
            tmp_path,
            simulation={"T_reduced": 20.0, "dt": 2e-3, "midpoint_iters": 1},
            track={"kind": "gaussian", "alpha": 0.9},
        )
        assert main(["study", "--config", str(p), "--dt", "2e-3", "--m", "2,16",
                     "--out", str(tmp_path / "study")]) == 0
        rows = (tmp_path / "study" / "study.csv").read_text().splitlines()[1:]
        statuses = {r.split(",")[1]: r.split(",")[4] for r in rows}
        assert statuses["2"] == "BasisLeakage"
        assert statuses["16"] == "ok"


class TestCliTracksPreview:
    def test_preview(self, tmp_path, capsys):
        p = tiny_config(tmp_path)
        assert main(["tracks", "preview", "--config", str(p),
                     "--out", str(tmp_path / "prev")]) == 0
        out = capsys.readouterr().out
        assert "admissible: True" in out
        data = np.loadtxt(tmp_path / "prev" / "track_preview.csv",
                          delimiter=",", skiprows=1)
        assert data.shape[1] == 6
        assert np.isfinite(data).all()

    def test_preview_catches_bad_track(self, tmp_path):
        csv = tmp_path / "far.csv"
        csv.write_text("x,y\n0,0\n0.5,0\n1.5,0\n2.0,0\n")
        p = tiny_config(tmp_path, track={"kind": "data", "path": str(csv)})
        assert main(["tracks", "preview", "--config", str(p)]) == 4
