"""CSV and SVG artifact writers.

All CSV uses '.' decimals, ',' delimiters, a header row and LF line
endings, with full-precision floats so records round-trip exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .engine import SimulationRecord, StudyCell
from .errors import GridMismatch, TrackDataError
from .units import UnitSystem


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path, header: list[str], rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_table(path, header: list[str], block: np.ndarray):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, block, fmt="%.17g", delimiter=",", newline="\n")


def write_record_csv(path, record: SimulationRecord, units: UnitSystem):
    """Strided time series: fields, orientations, guards, norm, populations."""
    m_cols = [f"pop_m{m:d}" for m in record.m_values]
    header = ["t", "t_ps", "eps_x", "eps_y", "ox", "oy", "ox_d", "oy_d",
              "D", "margin", "norm"] + m_cols
    des = record.designated
    if des is None:
        des = record.achieved  # replay without a reference track
    block = np.column_stack([
        record.t, record.t * units.time_unit_ps, record.eps, record.achieved,
        des, record.determinant, record.margin, record.norm, record.populations,
    ])
    _write_table(path, header, block)


def write_fields_csv(path, record: SimulationRecord):
    """Applied field waveform at full step resolution."""
    _write_table(path, ["t", "eps_x", "eps_y"],
                 np.column_stack([record.fields_t, record.fields]))


def read_fields_csv(path):
    """Read a fields.csv back as (times, eps[n, 2])."""
    p = Path(path)
    if not p.exists():
        raise GridMismatch(f"fields file not found: {p}")
    with open(p, newline="") as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["t", "eps_x", "eps_y"]:
            raise TrackDataError(f"{p}: expected header t,eps_x,eps_y, got {header!r}")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise TrackDataError(f"{p}: malformed field samples ({exc})") from exc
    if data.size == 0:
        raise GridMismatch(f"{p}: no field samples")
    return data[:, 0], data[:, 1:3]


def write_study_csv(path, cells: list[StudyCell]):
    with open(path, "w", newline="\n") as fh:
        fh.write("dt,M,max_deviation,runtime_s,status\n")
        for c in cells:
            fh.write(f"{_fmt(c.dt)},{c.M},{_fmt(c.max_deviation)},"
                     f"{_fmt(c.runtime_s)},{c.status}\n")


def write_frames(directory, record: SimulationRecord, max_frames: int = 500):
    """Per-frame orientation dumps for external movie rendering."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    n = record.n_rows
    stride = max(1, -(-n // max_frames))
    count = 0
    for k in range(0, n, stride):
        with open(d / f"frame_{count:06d}.csv", "w", newline="\n") as fh:
            fh.write("t,ox,oy\n")
            fh.write(f"{_fmt(record.t[k])},{_fmt(record.achieved[k, 0])},"
                     f"{_fmt(record.achieved[k, 1])}\n")
        count += 1
    return count


def write_report_json(path, report: dict):
    Path(path).write_text(json.dumps(report, indent=2) + "\n")


def deviation_report(record: SimulationRecord) -> dict:
    """Max and RMS deviation of the achieved orientation from the track."""
    if record.designated is None:
        raise ValueError("record carries no designated track to compare against")
    diff = record.achieved - record.designated
    return {
        "max_deviation": float(np.abs(diff).max()),
        "max_deviation_running": float(record.max_deviation),
        "rms_deviation": float(np.sqrt(np.mean(diff**2))),
        "max_deviation_x": float(np.abs(diff[:, 0]).max()),
        "max_deviation_y": float(np.abs(diff[:, 1]).max()),
        "n_samples": int(record.n_rows),
    }


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_traces(path, record: SimulationRecord):
    """Orientation and field time traces."""
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax1.plot(record.t, record.achieved[:, 0], "b-", label=r"$\langle\cos\varphi\rangle$")
    ax1.plot(record.t, record.achieved[:, 1], "r-", label=r"$\langle\sin\varphi\rangle$")
    if record.designated is not None:
        ax1.plot(record.t, record.designated[:, 0], "k:", lw=1, label="designated")
        ax1.plot(record.t, record.designated[:, 1], "k:", lw=1)
    ax1.set_ylabel("orientation")
    ax1.legend(loc="best", fontsize=8)
    ax2.plot(record.t, record.eps[:, 0], "b-", label=r"$\varepsilon_x$")
    ax2.plot(record.t, record.eps[:, 1], "r-", label=r"$\varepsilon_y$")
    ax2.set_xlabel("t (reduced)")
    ax2.set_ylabel("field (B/mu)")
    ax2.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_plane(path, record: SimulationRecord):
    """Orientation path in the plane with the unit circle."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    th = np.linspace(0, 2 * np.pi, 256)
    ax.plot(np.cos(th), np.sin(th), "k--", lw=1, label="unit circle")
    ax.plot(record.achieved[:, 0], record.achieved[:, 1], "b-", lw=1, label="achieved")
    if record.designated is not None:
        ax.plot(record.designated[:, 0], record.designated[:, 1], "k:", lw=1,
                label="designated")
    ax.set_xlabel(r"$\langle\cos\varphi\rangle$")
    ax.set_ylabel(r"$\langle\sin\varphi\rangle$")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_populations(path, record: SimulationRecord, max_columns: int = 2048):
    """Heat map of the rotational state populations over time.

    The mesh is rasterized inside the SVG and the time axis is thinned to
    `max_columns`, keeping the file size sane for long records.
    """
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 4.5))
    m = record.m_values
    stride = max(1, -(-record.n_rows // max_columns))
    mesh = ax.pcolormesh(
        record.t[::stride], m, record.populations[::stride].T, cmap="viridis",
        shading="nearest", vmin=0.0, vmax=1.0, rasterized=True,
    )
    fig.colorbar(mesh, ax=ax, label=r"$|c_m|^2$")
    ax.set_xlabel("t (reduced)")
    ax.set_ylabel("m")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
