"""Self-consistent propagation loop and open-loop replay.

One tracking step: evaluate the orientation moments of the current state,
invert the 2x2 system for the fields, then advance the state by the exact
unitary exp(-i H dt) of the field-frozen Hamiltonian, obtained from a
Hermitian eigendecomposition (the Hamiltonian is tridiagonal in the
m-basis, so the banded solver is used). Repeating to the horizon gives
the tracking run; feeding a stored field series instead gives a replay.

Field evaluation within a step is sample-and-hold. With midpoint_iters=0
the fields are evaluated at the step start (first-order accurate in dt).
With midpoint_iters>0 they are evaluated at the half step via fixed-point
iteration, using a normalized first-order half-step predictor for the
midpoint state; a single pass already makes the scheme second order.

Norm is never renormalized: the exact unitary keeps drift near machine
epsilon, and the recorded norm column doubles as an integrator check.
"""

from __future__ import annotations

import os
import time as _time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import get_lapack_funcs

from .errors import (
    BasisLeakage,
    ConsistencyError,
    GridMismatch,
    NonConvergent,
    NonFinite,
    SingularityGuard,
)
from .fields import FieldSample, GuardConfig
from .rotor import BasisSpec, RotorState, operator_table
from .tracks import TrackSpec, consistency_check

RECORD_ROW_CAP = 20000
MIDPOINT_TOL = 1e-12
MIDPOINT_MAX_ITERS = 8


@dataclass(frozen=True)
class SimParams:
    """Stepper configuration.

    Attributes:
        dt: reduced time step.
        T: horizon; must be an integer number of steps.
        midpoint_iters: self-consistency passes per step, 0 for frozen
            start-of-step fields. Capped at 8; iteration stops early once
            the field update falls below 1e-12 relative.
        leakage_tol: maximum tolerated population in the |m| = M edge states.
        record_stride: record every n-th step; None picks the smallest
            stride keeping the record at or under 20000 rows.
        consistency: "error", "warn" or "skip" handling of a designated
            track that disagrees with the initial state at t=0.
        consistency_tol: residual threshold for that check.
    """

    dt: float
    T: float
    midpoint_iters: int = 0
    leakage_tol: float = 1e-6
    record_stride: Optional[int] = None
    consistency: str = "error"
    consistency_tol: float = 1e-8

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.T >= self.dt:
            raise ValueError(f"T={self.T} must be at least one step dt={self.dt}")
        if not 0 <= self.midpoint_iters <= MIDPOINT_MAX_ITERS:
            raise ValueError(
                f"midpoint_iters must lie in [0, {MIDPOINT_MAX_ITERS}], got {self.midpoint_iters}"
            )
        if not self.leakage_tol > 0:
            raise ValueError(f"leakage_tol must be positive, got {self.leakage_tol}")
        if self.record_stride is not None and self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")
        if self.consistency not in ("error", "warn", "skip"):
            raise ValueError(f"consistency must be error|warn|skip, got {self.consistency!r}")

    @property
    def n_steps(self) -> int:
        n = int(round(self.T / self.dt))
        if abs(n * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError(f"T={self.T} is not an integer number of steps dt={self.dt}")
        return n

    def stride(self) -> int:
        if self.record_stride is not None:
            return self.record_stride
        return max(1, -(-self.n_steps // RECORD_ROW_CAP))


@dataclass
class SimulationRecord:
    """Time series output of a run.

    Rows are strided; row k holds the state-derived quantities at time
    t[k] and the field applied over the step starting there (the final
    row repeats the last applied field so no column ever holds NaN).
    `fields_t` / `fields` keep the applied field at full dt resolution.
    Deviation and guard extrema are tracked across every step, not just
    recorded rows.
    """

    t: np.ndarray
    eps: np.ndarray
    achieved: np.ndarray
    designated: Optional[np.ndarray]
    determinant: np.ndarray
    margin: np.ndarray
    norm: np.ndarray
    populations: np.ndarray
    m_values: np.ndarray
    dt: float
    fields_t: np.ndarray
    fields: np.ndarray
    max_deviation: float
    min_determinant: float
    min_margin: float
    meta: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return len(self.t)


class _Recorder:
    def __init__(self, n_steps, stride, dim, dt, m_values, with_designated):
        n_rows = len(range(0, n_steps, stride)) + 1
        self.stride = stride
        self.dt = dt
        self.m_values = m_values
        self.t = np.empty(n_rows)
        self.eps = np.empty((n_rows, 2))
        self.achieved = np.empty((n_rows, 2))
        self.designated = np.empty((n_rows, 2)) if with_designated else None
        self.determinant = np.empty(n_rows)
        self.margin = np.empty(n_rows)
        self.norm = np.empty(n_rows)
        self.populations = np.empty((n_rows, dim))
        self.fields_t = np.empty(n_steps)
        self.fields = np.empty((n_steps, 2))
        self.k = 0
        self.n_fields = 0
        self.max_dev = 0.0
        self.min_D = np.inf
        self.min_margin = np.inf

    def fields_row(self, i, t, ex, ey):
        self.fields_t[i] = t
        self.fields[i] = (ex, ey)
        self.n_fields = i + 1

    def row(self, t, ex, ey, cx, sy, des, D, margin, psi):
        k = self.k
        self.t[k] = t
        self.eps[k] = (ex, ey)
        self.achieved[k] = (cx, sy)
        if self.designated is not None:
            self.designated[k] = des
        self.determinant[k] = D
        self.margin[k] = margin
        self.norm[k] = np.vdot(psi, psi).real ** 0.5
        self.populations[k] = np.abs(psi) ** 2
        self.k += 1

    def finish(self, meta) -> SimulationRecord:
        k = self.k
        n_fields = self.n_fields
        return SimulationRecord(
            t=self.t[:k].copy(),
            eps=self.eps[:k].copy(),
            achieved=self.achieved[:k].copy(),
            designated=None if self.designated is None else self.designated[:k].copy(),
            determinant=self.determinant[:k].copy(),
            margin=self.margin[:k].copy(),
            norm=self.norm[:k].copy(),
            populations=self.populations[:k].copy(),
            m_values=np.asarray(self.m_values),
            dt=self.dt,
            fields_t=self.fields_t[:n_fields].copy(),
            fields=self.fields[:n_fields].copy(),
            max_deviation=self.max_dev,
            min_determinant=float(self.min_D),
            min_margin=float(self.min_margin),
            meta=meta,
        )


def _moments(stack, psi):
    # cc, ss, sc, cx, sy, <A_x>, <A_y> as plain floats (scalar math on
    # Python floats is measurably faster in the step loop)
    return ((stack @ psi) @ psi.conj()).real.tolist()


def _banded_eig(band):
    """Eigendecomposition of the Hermitian tridiagonal H stored as an
    upper band; H = diag(m^2) - ex*C - ey*S has the constant upper band
    -(ex + i*ey)/2."""
    hbevd, = get_lapack_funcs(("hbevd",), (band,))
    return hbevd, band


def _propagate_banded(hbevd, band, kin, ex, ey, dt, psi):
    band[1, :] = kin
    band[0, 1:] = -0.5 * (ex + 1j * ey)
    w, V, info = hbevd(band, compute_v=1, lower=0, overwrite_ab=1)
    if info:
        raise np.linalg.LinAlgError(f"banded eigensolver failed (info={info})")
    # (psi* @ V)* == V^dagger @ psi without conjugating the matrix
    return V @ (np.exp((-1j * dt) * w) * (psi.conj() @ V).conj())


def step(state: RotorState, fields: FieldSample, dt: float) -> RotorState:
    """Advance one step under frozen fields by the exact unitary exp(-iH dt).

    dt may be negative (backward evolution), which finite-difference
    consistency checks rely on.
    """
    if not np.isfinite(dt):
        raise NonFinite(f"dt must be finite, got {dt}")
    if not (np.isfinite(fields.eps_x) and np.isfinite(fields.eps_y)):
        raise NonFinite(f"non-finite fields: {fields}")
    if not np.isfinite(state.coeffs).all():
        raise NonFinite("state coefficients contain NaN or Inf")
    table = operator_table(state.basis.M)
    band = np.zeros((2, state.basis.dim), dtype=complex)
    hbevd, band = _banded_eig(band)
    psi = _propagate_banded(hbevd, band, table.kinetic_diag, fields.eps_x,
                            fields.eps_y, dt, state.coeffs)
    return RotorState(state.basis, psi)


def _check_consistency(state0, track, params):
    if params.consistency == "skip":
        return
    report = consistency_check(state0, track, tol=params.consistency_tol)
    if report.passed:
        return
    msg = (
        f"initial state disagrees with the designated track at t=0 "
        f"(worst residual {report.worst:.3e} > {report.tol:.1e}); "
        f"consider blend_in() or a matching initial state"
    )
    if params.consistency == "warn":
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    else:
        raise ConsistencyError(msg, report=report)


def run_tracking(
    state0: RotorState,
    track: TrackSpec,
    guard: GuardConfig = GuardConfig(),
    params: Optional[SimParams] = None,
) -> SimulationRecord:
    """Steer the orientation along `track` by re-solving the fields each step.

    Args:
        state0: initial normalized state (not mutated).
        track: designated trajectory; its duration must be >= params.T.
        guard: determinant / margin floors for the per-step solve.
        params: stepper configuration; defaults to dt=1e-3 over the track
            duration with start-of-step fields.

    Returns:
        SimulationRecord. On a singularity-guard trip or basis leakage the
        raised error carries the partial record for post-mortem analysis.
    """
    if params is None:
        params = SimParams(dt=1e-3, T=track.T)
    if track.T < params.T - 1e-12:
        raise ValueError(f"track duration {track.T} is shorter than horizon {params.T}")
    _check_consistency(state0, track, params)

    table = operator_table(state0.basis.M)
    dim = state0.basis.dim
    stack = table.moment_stack
    kin = table.kinetic_diag
    psi = state0.coeffs.astype(complex).copy()
    dt = params.dt
    n_steps = params.n_steps
    stride = params.stride()
    iters = params.midpoint_iters
    d_min = guard.d_min
    margin_min = guard.margin_min
    leakage_tol = params.leakage_tol
    half = 0.5 * dt
    band = np.zeros((2, dim), dtype=complex)
    hbevd, band = _banded_eig(band)
    hp = np.empty(dim, dtype=complex)
    scratch = np.empty(dim, dtype=complex)

    tgrid = np.arange(n_steps + 1) * dt
    vx, vy = track.values(tgrid)
    des_x = np.asarray(vx, dtype=float).tolist()
    des_y = np.asarray(vy, dtype=float).tolist()
    teval = tgrid[:-1] + (half if iters else 0.0)
    a2x, a2y = track.second_derivative(teval)
    acc_x = np.asarray(a2x, dtype=float).tolist()
    acc_y = np.asarray(a2y, dtype=float).tolist()

    rec = _Recorder(n_steps, stride, dim, dt, state0.basis.m_values, True)
    meta = {"kind": "tracking", "track": track.kind, "M": state0.basis.M,
            "dt": dt, "T": params.T, "midpoint_iters": iters}

    def guard_trip(reason, D, margin, t):
        return SingularityGuard(reason, D, margin, t=t, record=rec.finish(meta))

    # the body below is deliberately flat: per-step call overhead dominates
    # at these matrix sizes, so the moment evaluation, the 2x2 solve and the
    # banded propagation are inlined with preallocated buffers
    mbuf = np.empty(7 * dim, dtype=complex)
    vbuf = np.empty(7, dtype=complex)
    stack2d = np.ascontiguousarray(stack.reshape(7 * dim, dim))
    kin_c = kin.astype(complex)
    phase = -1j * dt
    fields_t = rec.fields_t
    fields_v = rec.fields
    next_rec = 0
    for i in range(n_steps):
        t = i * dt
        psi_c = psi.conj()
        np.dot(stack2d, psi, out=mbuf)
        np.dot(mbuf.reshape(7, dim), psi_c, out=vbuf)
        cc, ss, sc, cx, sy, ax, ay = vbuf.real.tolist()
        D = cc * ss - sc * sc
        margin = 1.0 - (cx * cx + sy * sy)
        if D < rec.min_D:
            rec.min_D = D
        if margin < rec.min_margin:
            rec.min_margin = margin
        dev = abs(cx - des_x[i])
        devy = abs(sy - des_y[i])
        if devy > dev:
            dev = devy
        if dev > rec.max_dev:
            rec.max_dev = dev
        if D < d_min:
            raise guard_trip("determinant", D, margin, t)
        if margin < margin_min:
            raise guard_trip("margin", D, margin, t)
        edge = abs(psi[0]) ** 2 + abs(psi[-1]) ** 2
        if edge > leakage_tol:
            raise BasisLeakage(edge, leakage_tol, t=t, record=rec.finish(meta))

        a = acc_x[i]
        b = acc_y[i]
        r1 = a + ax
        r2 = b + ay
        inv = 0.5 / D
        ex = (cc * r1 + sc * r2) * inv
        ey = (sc * r1 + ss * r2) * inv
        prev_delta = None
        converged = iters == 0
        for k in range(iters):
            # first-order half-step predictor for the midpoint state
            upper = -0.5 * (ex + 1j * ey)
            np.multiply(kin, psi, out=scratch)
            scratch[:-1] += upper * psi[1:]
            scratch[1:] += upper.conjugate() * psi[:-1]
            np.multiply(scratch, -1j * half, out=scratch)
            np.add(psi, scratch, out=hp)
            hp /= np.vdot(hp, hp).real ** 0.5
            np.dot(stack2d, hp, out=mbuf)
            np.dot(mbuf.reshape(7, dim), hp.conj(), out=vbuf)
            cc2, ss2, sc2, cx2, sy2, ax2, ay2 = vbuf.real.tolist()
            D2 = cc2 * ss2 - sc2 * sc2
            margin2 = 1.0 - (cx2 * cx2 + sy2 * sy2)
            if D2 < d_min:
                raise guard_trip("determinant", D2, margin2, t + half)
            if margin2 < margin_min:
                raise guard_trip("margin", D2, margin2, t + half)
            r1 = a + ax2
            r2 = b + ay2
            inv = 0.5 / D2
            ex2 = (cc2 * r1 + sc2 * r2) * inv
            ey2 = (sc2 * r1 + ss2 * r2) * inv
            delta = abs(ex2 - ex) + abs(ey2 - ey)
            if delta != delta or delta == float("inf"):  # NaN or Inf
                raise NonConvergent(
                    f"midpoint iteration diverged at t={t:.6g}",
                    t=t, record=rec.finish(meta),
                )
            ex, ey = ex2, ey2
            if delta <= MIDPOINT_TOL * (1.0 + abs(ex) + abs(ey)):
                converged = True
                break
            if prev_delta is not None and delta > 4.0 * prev_delta:
                raise NonConvergent(
                    f"midpoint iteration diverging at t={t:.6g} "
                    f"(update {delta:.3e} after {prev_delta:.3e}); reduce dt",
                    t=t, record=rec.finish(meta),
                )
            prev_delta = delta
        # midpoint_iters below the cap is a fixed-pass corrector; asking for
        # the full budget means iterate to the fixed point or fail
        if iters == MIDPOINT_MAX_ITERS and not converged:
            raise NonConvergent(
                f"midpoint iteration did not reach tol {MIDPOINT_TOL:g} within "
                f"{MIDPOINT_MAX_ITERS} passes at t={t:.6g}; reduce dt",
                t=t, record=rec.finish(meta),
            )

        fields_t[i] = t
        fields_v[i] = (ex, ey)
        rec.n_fields = i + 1
        if i == next_rec:
            rec.row(t, ex, ey, cx, sy, (des_x[i], des_y[i]), D, margin, psi)
            next_rec += stride
        band[1, :] = kin_c
        band[0, 1:] = -0.5 * (ex + 1j * ey)
        w, V, info = hbevd(band, compute_v=1, lower=0, overwrite_ab=1)
        if info:
            raise np.linalg.LinAlgError(f"banded eigensolver failed (info={info})")
        psi = V @ (np.exp(phase * w) * (psi_c @ V).conj())

    # closing sample at t = T; fields column repeats the last applied value
    cc, ss, sc, cx, sy, ax, ay = _moments(stack, psi)
    D = cc * ss - sc * sc
    margin = 1.0 - (cx * cx + sy * sy)
    rec.min_D = min(rec.min_D, D)
    rec.min_margin = min(rec.min_margin, margin)
    rec.max_dev = max(rec.max_dev, abs(cx - des_x[-1]), abs(sy - des_y[-1]))
    ex, ey = rec.fields[-1]
    rec.row(n_steps * dt, ex, ey, cx, sy, (des_x[-1], des_y[-1]), D, margin, psi)
    return rec.finish(meta)


def _coerce_field_series(field_series):
    if isinstance(field_series, tuple) and len(field_series) == 2:
        t, eps = field_series
        return np.asarray(t, dtype=float), np.asarray(eps, dtype=float)
    samples = list(field_series)
    t = np.array([s.t for s in samples])
    eps = np.array([[s.eps_x, s.eps_y] for s in samples])
    return t, eps


def run_replay(
    state0: RotorState,
    field_series,
    params: SimParams,
    track: Optional[TrackSpec] = None,
    interp: str = "hold",
) -> SimulationRecord:
    """Propagate open-loop under a stored field waveform.

    Args:
        state0: initial state.
        field_series: either (times, eps[n, 2]) arrays or a sequence of
            FieldSample; must cover [0, T) on a uniform grid.
        params: stepper configuration (midpoint settings are ignored).
        track: optional designated trajectory for deviation bookkeeping.
        interp: "hold" requires one sample per step at the run grid and
            applies it over that step; "linear" interpolates the series
            at each step midpoint.

    Raises:
        GridMismatch: series grid does not match/cover the run grid.
    """
    times, eps = _coerce_field_series(field_series)
    if times.ndim != 1 or eps.shape != (len(times), 2):
        raise GridMismatch(f"field series shapes {times.shape} / {eps.shape} are invalid")
    if len(times) < 2:
        raise GridMismatch("field series needs at least two samples")
    if not (np.isfinite(times).all() and np.isfinite(eps).all()):
        raise NonFinite("field series contains NaN or Inf")
    spacing = np.diff(times)
    if spacing.min() <= 0 or np.abs(spacing - spacing.mean()).max() > 1e-9 * spacing.mean():
        raise GridMismatch("field series grid is not uniform")
    if interp not in ("hold", "linear"):
        raise ValueError(f"interp must be hold|linear, got {interp!r}")

    dt = params.dt
    n_steps = params.n_steps
    if interp == "hold":
        if len(times) != n_steps or abs(spacing.mean() - dt) > 1e-9 * dt or abs(times[0]) > 1e-9 * dt:
            raise GridMismatch(
                f"hold replay needs exactly one sample per step: expected {n_steps} "
                f"samples spaced {dt:g} from t=0, got {len(times)} spaced {spacing.mean():g} "
                f"from t={times[0]:g}"
            )
        eps_steps = eps
    else:
        t_mid = (np.arange(n_steps) + 0.5) * dt
        # allow the series to stop within one of its own spacings of the
        # final midpoint; np.interp holds the edge value there
        if times[0] > 1e-12 or times[-1] < t_mid[-1] - spacing.mean():
            raise GridMismatch(
                f"linear replay needs the series to cover [0, {t_mid[-1]:g}], "
                f"got [{times[0]:g}, {times[-1]:g}]"
            )
        eps_steps = np.column_stack([
            np.interp(t_mid, times, eps[:, 0]),
            np.interp(t_mid, times, eps[:, 1]),
        ])

    table = operator_table(state0.basis.M)
    dim = state0.basis.dim
    stack = table.moment_stack
    kin = table.kinetic_diag
    psi = state0.coeffs.astype(complex).copy()
    stride = params.stride()
    band = np.zeros((2, dim), dtype=complex)
    hbevd, band = _banded_eig(band)

    with_track = track is not None
    if with_track:
        tgrid = np.arange(n_steps + 1) * dt
        des_x, des_y = track.values(tgrid)
        des_x = np.asarray(des_x, dtype=float)
        des_y = np.asarray(des_y, dtype=float)

    rec = _Recorder(n_steps, stride, dim, dt, state0.basis.m_values, with_track)
    meta = {"kind": "replay", "M": state0.basis.M, "dt": dt, "T": params.T,
            "interp": interp}

    for i in range(n_steps):
        t = i * dt
        cc, ss, sc, cx, sy, ax, ay = _moments(stack, psi)
        D = cc * ss - sc * sc
        margin = 1.0 - (cx * cx + sy * sy)
        rec.min_D = min(rec.min_D, D)
        rec.min_margin = min(rec.min_margin, margin)
        des = None
        if with_track:
            des = (des_x[i], des_y[i])
            rec.max_dev = max(rec.max_dev, abs(cx - des[0]), abs(sy - des[1]))
        ex, ey = eps_steps[i]
        rec.fields_row(i, t, ex, ey)
        if i % stride == 0:
            rec.row(t, ex, ey, cx, sy, des, D, margin, psi)
        psi = _propagate_banded(hbevd, band, kin, ex, ey, dt, psi)

    cc, ss, sc, cx, sy, ax, ay = _moments(stack, psi)
    D = cc * ss - sc * sc
    margin = 1.0 - (cx * cx + sy * sy)
    rec.min_D = min(rec.min_D, D)
    rec.min_margin = min(rec.min_margin, margin)
    des = None
    if with_track:
        des = (des_x[-1], des_y[-1])
        rec.max_dev = max(rec.max_dev, abs(cx - des[0]), abs(sy - des[1]))
    ex, ey = eps_steps[-1]
    rec.row(n_steps * dt, ex, ey, cx, sy, des, D, margin, psi)
    return rec.finish(meta)


@dataclass(frozen=True)
class StudyCell:
    """One (dt, M) cell of a convergence study."""

    dt: float
    M: int
    max_deviation: float
    runtime_s: float
    status: str
    message: str = ""


def _study_workers(n_cells: int, max_workers: Optional[int]) -> int:
    if max_workers is None:
        env = os.environ.get("ROTORTRACK_THREADS")
        if env:
            try:
                max_workers = int(env)
            except ValueError:
                raise ValueError(f"ROTORTRACK_THREADS must be an integer, got {env!r}")
        else:
            max_workers = os.cpu_count() or 1
    return max(1, min(max_workers, n_cells))


def convergence_study(
    track: TrackSpec,
    params: SimParams,
    dt_list: Sequence[float],
    M_list: Sequence[int],
    guard: GuardConfig = GuardConfig(),
    max_workers: Optional[int] = None,
) -> list[StudyCell]:
    """Max tracking deviation over a (dt, M) grid, from the ground state.

    Cells run concurrently (thread count capped by ROTORTRACK_THREADS or
    `max_workers`); a cell that raises a typed engine error is recorded
    as a failed cell rather than aborting the study.
    """
    if not dt_list or not M_list:
        raise ValueError("dt_list and M_list must be non-empty")

    def one(cell):
        dt, M = cell
        p = replace(params, dt=dt)
        state0 = RotorState.ground(BasisSpec(int(M)))
        start = _time.perf_counter()
        try:
            record = run_tracking(state0, track, guard, p)
            return StudyCell(dt, M, record.max_deviation,
                             _time.perf_counter() - start, "ok")
        except (SingularityGuard, BasisLeakage, NonConvergent, ConsistencyError) as exc:
            return StudyCell(dt, M, float("nan"), _time.perf_counter() - start,
                             type(exc).__name__, str(exc))

    cells = [(float(dt), int(M)) for dt in dt_list for M in M_list]
    workers = _study_workers(len(cells), max_workers)
    if workers == 1:
        return [one(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, cells))
