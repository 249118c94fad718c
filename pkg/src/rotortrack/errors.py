"""Typed error taxonomy.

Every failure mode that callers are expected to handle gets its own class
so that the CLI can map them one-to-one onto exit codes and tests can
assert on the exact condition. Errors raised mid-run carry the time of
the trip and, where useful, the partial simulation record accumulated up
to that point.
"""

from __future__ import annotations


class RotorTrackError(Exception):
    """Base class for all library errors."""


class BasisMismatch(RotorTrackError):
    """A state and an operator were built on different bases."""


class NonFinite(RotorTrackError):
    """An input or intermediate quantity contained NaN or Inf."""


class SingularityGuard(RotorTrackError):
    """The two-field solve was blocked by the singularity guard.

    Attributes:
        reason: "determinant" or "margin", whichever floor was crossed.
        determinant: value of the 2x2 system determinant at the trip.
        margin: unit-circle margin 1 - (<cos>^2 + <sin>^2) at the trip.
        t: simulation time of the trip (None outside a run).
        record: partial SimulationRecord up to the trip (None outside a run).
    """

    def __init__(self, reason, determinant, margin, t=None, record=None):
        self.reason = reason
        self.determinant = determinant
        self.margin = margin
        self.t = t
        self.record = record
        where = f" at t={t:.6g}" if t is not None else ""
        super().__init__(
            f"singularity guard tripped ({reason}){where}: "
            f"determinant={determinant:.3e}, margin={margin:.3e}"
        )


class Singularity(RotorTrackError):
    """The single-field tracking denominator passed through zero."""


class CommutingObservable(RotorTrackError):
    """[mu, O] vanishes identically; the first-order inversion is undefined."""


class BasisLeakage(RotorTrackError):
    """Population reached the edge of the truncated basis.

    Attributes mirror SingularityGuard: t and the partial record are
    attached when raised from inside a run.
    """

    def __init__(self, leakage, tol, t=None, record=None):
        self.leakage = leakage
        self.tol = tol
        self.t = t
        self.record = record
        where = f" at t={t:.6g}" if t is not None else ""
        super().__init__(
            f"edge-state population {leakage:.3e} exceeded {tol:.3e}{where}; "
            f"increase the basis cutoff M"
        )


class NonConvergent(RotorTrackError):
    """The midpoint self-consistency iteration failed to converge."""

    def __init__(self, message, t=None, record=None):
        self.t = t
        self.record = record
        super().__init__(message)


class GridMismatch(RotorTrackError):
    """A replayed field series does not cover the requested time grid."""


class NonUniformSampling(RotorTrackError):
    """A spectral operation was given a non-uniform time grid."""


class PointOutsideDisk(RotorTrackError):
    """A designated track point (or spline excursion) leaves the unit disk."""

    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class TooFewPoints(RotorTrackError):
    """A data track needs at least four points."""


class TrackDataError(RotorTrackError):
    """Malformed data-track input (bad CSV, non-increasing times, NaNs)."""


class ConsistencyError(RotorTrackError):
    """Initial state and designated track disagree at t=0."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class ConfigError(RotorTrackError):
    """Invalid run configuration; message carries the path to the bad key."""
