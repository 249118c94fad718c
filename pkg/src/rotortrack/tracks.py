"""Designated orientation trajectories and supporting signal tools.

A track prescribes the targets (<cos phi>, <sin phi>)(t) over [0, T]
together with first- and second-derivative access. Shipped kinds:

* GaussianTrack: two offset Gaussian pulses, one per axis.
* SpiralTrack: an outward spiral with a sigmoid soft start.
* DataTrack: cubic-spline interpolation through user point sets (CSV).

All tracks must stay strictly inside the unit disk; constructors enforce
this. Custom subclasses only need `values`; derivative defaults fall back
to five-point finite differences.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    NonUniformSampling,
    PointOutsideDisk,
    TooFewPoints,
    TrackDataError,
)
from .rotor import RotorState, operator_table

_ADMISSIBILITY_SAMPLES = 4096


@dataclass(frozen=True)
class TrackSample:
    """Track values and second derivatives at one instant."""

    t: float
    x_d: float
    y_d: float
    d2x_d: float
    d2y_d: float


class TrackSpec:
    """Base class: a designated trajectory on [0, T].

    Subclasses override `values` (vectorized in t) and, where analytic
    forms exist, `first_derivative` / `second_derivative`. The base
    implementations use five-point finite differences with step T*1e-5,
    switching to one-sided stencils near the endpoints.
    """

    kind = "custom"

    def __init__(self, T: float):
        if not T > 0:
            raise ValueError(f"track duration must be positive, got {T}")
        self.T = float(T)

    def values(self, t):
        raise NotImplementedError

    def first_derivative(self, t):
        return self._fd(t, order=1)

    def second_derivative(self, t):
        return self._fd(t, order=2)

    def sample(self, t: float) -> TrackSample:
        x, y = self.values(t)
        d2x, d2y = self.second_derivative(t)
        return TrackSample(float(t), float(x), float(y), float(d2x), float(d2y))

    def _fd(self, t, order):
        h = self.T * 1e-5
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out_x = np.empty_like(t)
        out_y = np.empty_like(t)
        # central / left-sided / right-sided 5-point stencils
        if order == 1:
            c_mid = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
            c_left = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
            scale = h
        else:
            c_mid = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
            c_left = np.array([35.0, -104.0, 114.0, -56.0, 11.0]) / 12.0
            scale = h * h
        offs_mid = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * h
        offs_left = np.array([0.0, 1.0, 2.0, 3.0, 4.0]) * h
        for i, ti in enumerate(t):
            if ti < 2 * h:
                offs, coef, sign = offs_left, c_left, 1.0
            elif ti > self.T - 2 * h:
                offs, coef, sign = -offs_left, c_left, -1.0 if order == 1 else 1.0
            else:
                offs, coef, sign = offs_mid, c_mid, 1.0
            xs, ys = self.values(ti + offs)
            out_x[i] = sign * float(np.dot(coef, xs)) / scale
            out_y[i] = sign * float(np.dot(coef, ys)) / scale
        if scalar:
            return float(out_x[0]), float(out_y[0])
        return out_x, out_y

    def max_radius(self, n: int = _ADMISSIBILITY_SAMPLES) -> float:
        """Largest sampled track radius; must stay below 1."""
        t = np.linspace(0.0, self.T, n)
        x, y = self.values(t)
        return float(np.sqrt(np.max(np.asarray(x) ** 2 + np.asarray(y) ** 2)))

    def _check_admissible(self):
        t = np.linspace(0.0, self.T, _ADMISSIBILITY_SAMPLES)
        x, y = self.values(t)
        r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
        worst = int(np.argmax(r2))
        if r2[worst] >= 1.0:
            raise PointOutsideDisk(
                f"track leaves the unit disk: radius {math.sqrt(r2[worst]):.6f} "
                f"at t={t[worst]:.6g}"
            )


class GaussianTrack(TrackSpec):
    """Gaussian pulses of height alpha, centered at 0.4T (x) and 0.8T (y)."""

    kind = "gaussian"

    def __init__(self, alpha: float, T: float):
        super().__init__(T)
        if not 0.0 < alpha < 1.0:
            raise ValueError(
                f"alpha must satisfy 0 < alpha < 1 to keep the track inside "
                f"the unit disk, got {alpha}"
            )
        self.alpha = float(alpha)
        self.width = self.T / 15.0
        self.center_x = 0.4 * self.T
        self.center_y = 0.8 * self.T

    def values(self, t):
        t = np.asarray(t, dtype=float)
        ux = (t - self.center_x) / self.width
        uy = (t - self.center_y) / self.width
        return self.alpha * np.exp(-ux * ux), self.alpha * np.exp(-uy * uy)

    def first_derivative(self, t):
        t = np.asarray(t, dtype=float)
        ux = (t - self.center_x) / self.width
        uy = (t - self.center_y) / self.width
        fx = self.alpha * np.exp(-ux * ux) * (-2.0 * ux) / self.width
        fy = self.alpha * np.exp(-uy * uy) * (-2.0 * uy) / self.width
        return fx, fy

    def second_derivative(self, t):
        t = np.asarray(t, dtype=float)
        ux = (t - self.center_x) / self.width
        uy = (t - self.center_y) / self.width
        w2 = self.width * self.width
        fx = self.alpha * np.exp(-ux * ux) * (4.0 * ux * ux - 2.0) / w2
        fy = self.alpha * np.exp(-uy * uy) * (4.0 * uy * uy - 2.0) / w2
        return fx, fy


def default_spiral_c2(T: float, c1: float, c3: float, onset_fraction: float = 0.1,
                      onset_value: float = 0.995) -> float:
    """Sigmoid rate making f(onset_fraction*T) reach onset_value.

    The sigmoid f(t) = (1 + c1 exp(-c2 t))^(-1/c3) exists to give the
    spiral a smooth start; this picks c2 so the soft start is over within
    the first tenth of the run.
    """
    target = onset_value ** (-c3) - 1.0
    return math.log(c1 / target) / (onset_fraction * T)


class SpiralTrack(TrackSpec):
    """Outward spiral x = beta*t*sin(omega*t)*f(t), y = beta*t*cos(omega*t)*f(t).

    f is a sigmoid soft start; the radius beta*t*f(t) grows monotonically
    to beta*T < 1. All derivatives are analytic.
    """

    kind = "spiral"

    def __init__(self, beta=None, omega: float = 0.5, c1=None, c2=None,
                 c3: float = 0.2, T: float = 150.0):
        super().__init__(T)
        self.beta = 0.95 / self.T if beta is None else float(beta)
        self.omega = float(omega)
        self.c1 = self.T / 4.0 if c1 is None else float(c1)
        self.c3 = float(c3)
        if not self.c1 > 0 or not self.c3 > 0:
            raise ValueError(f"c1 and c3 must be positive, got c1={self.c1}, c3={self.c3}")
        if not self.beta * self.T < 1.0:
            raise ValueError(
                f"beta*T = {self.beta * self.T:.6f} must be < 1 so the final "
                f"radius stays inside the unit disk"
            )
        self.c2 = default_spiral_c2(self.T, self.c1, self.c3) if c2 is None else float(c2)

    def _sigmoid(self, t):
        u = 1.0 + self.c1 * np.exp(-self.c2 * np.asarray(t, dtype=float))
        f = u ** (-1.0 / self.c3)
        up = -self.c2 * (u - 1.0)
        upp = self.c2 * self.c2 * (u - 1.0)
        p = -1.0 / self.c3
        fp = p * u ** (p - 1.0) * up
        fpp = p * ((p - 1.0) * u ** (p - 2.0) * up * up + u ** (p - 1.0) * upp)
        return f, fp, fpp

    def values(self, t):
        t = np.asarray(t, dtype=float)
        f, _, _ = self._sigmoid(t)
        bt = self.beta * t
        return bt * np.sin(self.omega * t) * f, bt * np.cos(self.omega * t) * f

    def first_derivative(self, t):
        t = np.asarray(t, dtype=float)
        f, fp, _ = self._sigmoid(t)
        s, c = np.sin(self.omega * t), np.cos(self.omega * t)
        g = self.beta * t * s
        gp = self.beta * s + self.beta * t * self.omega * c
        h = self.beta * t * c
        hp = self.beta * c - self.beta * t * self.omega * s
        return gp * f + g * fp, hp * f + h * fp

    def second_derivative(self, t):
        t = np.asarray(t, dtype=float)
        f, fp, fpp = self._sigmoid(t)
        w = self.omega
        s, c = np.sin(w * t), np.cos(w * t)
        g = self.beta * t * s
        gp = self.beta * s + self.beta * t * w * c
        gpp = 2.0 * self.beta * w * c - self.beta * t * w * w * s
        h = self.beta * t * c
        hp = self.beta * c - self.beta * t * w * s
        hpp = -2.0 * self.beta * w * s - self.beta * t * w * w * c
        return gpp * f + 2.0 * gp * fp + g * fpp, hpp * f + 2.0 * hp * fp + h * fpp


class DataTrack(TrackSpec):
    """Cubic spline through an ordered point set, parameterized over [0, T].

    Knot times are uniform in point index by default; `arc_length=True`
    spaces them by cumulative chord length instead, which avoids locally
    fast segments when input points are unevenly spaced. Optional
    smoothing is a centered moving average over the points, and
    `resample_n` re-knots the spline at that many uniform parameters.
    """

    kind = "data"

    def __init__(self, points, T: float, resample_n=None, smooth_window=None,
                 knot_times=None, arc_length: bool = False, rescale=None):
        super().__init__(T)
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise TrackDataError(f"points must be an (n, 2) array, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise TrackDataError("points contain NaN or Inf")
        if len(pts) < 4:
            raise TooFewPoints(f"need at least 4 points for a cubic spline, got {len(pts)}")
        if rescale is not None:
            rmax = np.sqrt((pts**2).sum(axis=1)).max()
            if rmax == 0:
                raise TrackDataError("cannot rescale points that are all at the origin")
            pts = pts * (float(rescale) / rmax)
        radii = np.sqrt((pts**2).sum(axis=1))
        bad = np.nonzero(radii >= 1.0)[0]
        if bad.size:
            i = int(bad[0])
            raise PointOutsideDisk(
                f"point {i} at radius {radii[i]:.6f} is not strictly inside the unit disk",
                index=i,
            )
        if smooth_window:
            pts = _moving_average(pts, int(smooth_window))
        self.points = pts

        if knot_times is not None:
            kt = np.asarray(knot_times, dtype=float)
            if kt.shape != (len(pts),):
                raise TrackDataError("explicit knot times must match the number of points")
            if not np.all(np.diff(kt) > 0):
                raise TrackDataError("explicit knot times must be strictly increasing")
            knots = (kt - kt[0]) * (self.T / (kt[-1] - kt[0]))
        elif arc_length:
            seg = np.sqrt((np.diff(pts, axis=0) ** 2).sum(axis=1))
            cum = np.concatenate([[0.0], np.cumsum(seg)])
            if cum[-1] == 0:
                knots = np.linspace(0.0, self.T, len(pts))
            else:
                knots = cum * (self.T / cum[-1])
                # duplicate points collapse knots; nudge to keep strict order
                knots = _strictify(knots, self.T)
        else:
            knots = np.linspace(0.0, self.T, len(pts))

        self._spline_x = CubicSpline(knots, pts[:, 0])
        self._spline_y = CubicSpline(knots, pts[:, 1])
        if resample_n:
            n = int(resample_n)
            if n < 4:
                raise TooFewPoints(f"resample_n must be at least 4, got {n}")
            tk = np.linspace(0.0, self.T, n)
            self._spline_x = CubicSpline(tk, self._spline_x(tk))
            self._spline_y = CubicSpline(tk, self._spline_y(tk))
        self.knots = knots
        self._check_admissible()

    def values(self, t):
        return self._spline_x(t), self._spline_y(t)

    def first_derivative(self, t):
        return self._spline_x(t, 1), self._spline_y(t, 1)

    def second_derivative(self, t):
        return self._spline_x(t, 2), self._spline_y(t, 2)


class BlendedTrack(TrackSpec):
    """Opt-in start ramp: scales an inner track by a cosine ramp 0 -> 1.

    The ramp and its first derivative vanish at t=0, so any inner track
    becomes consistent with a centered initial state (orientation and
    orientation velocity both zero).
    """

    kind = "blended"

    def __init__(self, inner: TrackSpec, window: float):
        super().__init__(inner.T)
        if not 0.0 < window <= inner.T:
            raise ValueError(f"blend window must lie in (0, T], got {window}")
        self.inner = inner
        self.window = float(window)

    def _ramp(self, t):
        t = np.asarray(t, dtype=float)
        u = np.clip(t / self.window, 0.0, 1.0)
        r = 0.5 * (1.0 - np.cos(np.pi * u))
        rp = np.where(t < self.window, 0.5 * np.pi / self.window * np.sin(np.pi * u), 0.0)
        rpp = np.where(
            t < self.window, 0.5 * (np.pi / self.window) ** 2 * np.cos(np.pi * u), 0.0
        )
        return r, rp, rpp

    def values(self, t):
        r, _, _ = self._ramp(t)
        x, y = self.inner.values(t)
        return r * x, r * y

    def first_derivative(self, t):
        r, rp, _ = self._ramp(t)
        x, y = self.inner.values(t)
        xp, yp = self.inner.first_derivative(t)
        return rp * x + r * xp, rp * y + r * yp

    def second_derivative(self, t):
        r, rp, rpp = self._ramp(t)
        x, y = self.inner.values(t)
        xp, yp = self.inner.first_derivative(t)
        xpp, ypp = self.inner.second_derivative(t)
        return (
            rpp * x + 2.0 * rp * xp + r * xpp,
            rpp * y + 2.0 * rp * yp + r * ypp,
        )


def gaussian_track(alpha: float, T: float) -> GaussianTrack:
    return GaussianTrack(alpha, T)


def spiral_track(beta=None, omega: float = 0.5, c1=None, c2=None, c3: float = 0.2,
                 T: float = 150.0) -> SpiralTrack:
    return SpiralTrack(beta=beta, omega=omega, c1=c1, c2=c2, c3=c3, T=T)


def data_track(points, T: float, resample_n=None, smooth_window=None,
               **kwargs) -> DataTrack:
    return DataTrack(points, T, resample_n=resample_n, smooth_window=smooth_window,
                     **kwargs)


def blend_in(track: TrackSpec, window: float) -> BlendedTrack:
    return BlendedTrack(track, window)


def second_derivative(track: TrackSpec, t: float) -> tuple[float, float]:
    """Designated second derivatives at t (analytic where available)."""
    d2x, d2y = track.second_derivative(t)
    return float(d2x), float(d2y)


def _moving_average(pts: np.ndarray, window: int) -> np.ndarray:
    if window < 1:
        raise TrackDataError(f"smooth window must be >= 1, got {window}")
    if window == 1:
        return pts
    if window % 2 == 0:
        window += 1  # keep the average centered
    half = window // 2
    padded = np.pad(pts, ((half, half), (0, 0)), mode="edge")
    kernel = np.ones(window) / window
    out = np.empty_like(pts)
    for k in range(2):
        out[:, k] = np.convolve(padded[:, k], kernel, mode="valid")
    return out


def _strictify(knots: np.ndarray, T: float) -> np.ndarray:
    eps = T * 1e-12
    out = knots.copy()
    for i in range(1, len(out)):
        if out[i] <= out[i - 1]:
            out[i] = out[i - 1] + eps
    return out * (T / out[-1])


@dataclass(frozen=True)
class ConsistencyReport:
    """Residuals between a state's orientation data and a track at t=0."""

    passed: bool
    value_x: float
    value_y: float
    slope_x: float
    slope_y: float
    tol: float

    @property
    def worst(self) -> float:
        return max(self.value_x, self.value_y, self.slope_x, self.slope_y)


def consistency_check(state0: RotorState, track: TrackSpec, tol: float = 1e-8) -> ConsistencyReport:
    """Compare <cos>, <sin> and their time derivatives with the track at t=0.

    The orientation velocities are field-independent (the dipole coupling
    operators commute with cos and sin), so they are evaluated from the
    free-rotor generators alone.
    """
    table = operator_table(state0.basis.M)
    psi = state0.coeffs
    cx = float(np.vdot(psi, table.moment_stack[3] @ psi).real)
    sy = float(np.vdot(psi, table.moment_stack[4] @ psi).real)
    vx = float(np.vdot(psi, table.deriv_x @ psi).real)
    vy = float(np.vdot(psi, table.deriv_y @ psi).real)
    x0, y0 = track.values(0.0)
    dx0, dy0 = track.first_derivative(0.0)
    res = ConsistencyReport(
        passed=False,
        value_x=abs(cx - float(x0)),
        value_y=abs(sy - float(y0)),
        slope_x=abs(vx - float(dx0)),
        slope_y=abs(vy - float(dy0)),
        tol=tol,
    )
    return ConsistencyReport(
        passed=res.worst < tol,
        value_x=res.value_x, value_y=res.value_y,
        slope_x=res.slope_x, slope_y=res.slope_y, tol=tol,
    )


def lowpass_filter(t: np.ndarray, values: np.ndarray, cutoff: float) -> np.ndarray:
    """Zero all spectral components above `cutoff` (ordinary frequency,
    cycles per reduced time unit).

    The transform-zero-inverse construction preserves DC exactly, keeps
    the output length equal to the input length, and is idempotent.

    Raises NonUniformSampling unless t is a uniform grid.
    """
    t = np.asarray(t, dtype=float)
    vals = np.asarray(values, dtype=float)
    if not cutoff > 0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    if t.ndim != 1 or len(t) < 2:
        raise NonUniformSampling("need at least two uniformly spaced samples")
    steps = np.diff(t)
    dt = steps.mean()
    if dt <= 0 or np.abs(steps - dt).max() > 1e-9 * max(abs(dt), 1e-300):
        raise NonUniformSampling("time grid is not uniform")
    if len(vals) != len(t):
        raise ValueError("values and t must have equal length")
    spectrum = np.fft.rfft(vals, axis=0)
    freqs = np.fft.rfftfreq(len(t), dt)
    spectrum[freqs > cutoff] = 0.0
    return np.fft.irfft(spectrum, n=len(t), axis=0)


def read_points_csv(path):
    """Read a track point set from CSV with header `x,y` or `x,y,t`.

    Returns (points array (n, 2), explicit times or None).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TrackDataError(f"{path}: empty file") from None
        cols = [c.strip().lower() for c in header]
        if cols[:2] != ["x", "y"] or len(cols) > 3 or (len(cols) == 3 and cols[2] != "t"):
            raise TrackDataError(
                f"{path}: expected header 'x,y' or 'x,y,t', got {header!r}"
            )
        has_t = len(cols) == 3
        xs, ys, ts = [], [], []
        for ln, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                xs.append(float(row[0]))
                ys.append(float(row[1]))
                if has_t:
                    ts.append(float(row[2]))
            except (ValueError, IndexError) as exc:
                raise TrackDataError(f"{path}:{ln}: bad row {row!r}") from exc
    pts = np.column_stack([xs, ys]) if xs else np.empty((0, 2))
    return pts, (np.asarray(ts) if has_t else None)
