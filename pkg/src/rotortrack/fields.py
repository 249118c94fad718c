"""Inversion of the orientation dynamics for the two control fields.

For a rotor driven by H = diag(m^2) - eps_x C - eps_y S (reduced units),
the second time derivatives of <cos phi> and <sin phi> are algebraic in
the two field amplitudes. Substituting the designated second derivatives
(d2x_d, d2y_d) gives the 2x2 linear system

    2 * [[ss, -sc], [-sc, cc]] @ (eps_x, eps_y)^T
        = (d2x_d + <A_x>, d2y_d + <A_y>)^T

with cc = <cos^2>, ss = <sin^2>, sc = <sin cos> and A_x, A_y the
field-free acceleration operators of rotor.accel_ops. The system matrix
has determinant D = cc*ss - sc^2 >= 0 (Cauchy-Schwarz between cos|psi>
and sin|psi>), so inversion via the adjugate

    (eps_x, eps_y)^T = (1/(2D)) [[cc, sc], [sc, ss]] @ rhs

is singularity-free as long as D stays strictly positive, which is
guaranteed while <cos>^2 + <sin>^2 stays inside the open unit disk. A
guard enforces configurable floors on D and on the unit-circle margin
and converts every would-be-unbounded configuration into a typed error,
so non-finite field values are never emitted.

A generic first-order tracking engine for arbitrary (H0, mu, O) systems
whose observable appears at first commutator order is also provided.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    CommutingObservable,
    NonFinite,
    Singularity,
    SingularityGuard,
)
from .rotor import AngularOperator, RotorState, operator_table


@dataclass(frozen=True)
class OrientationMoments:
    """The five orientation moments entering the two-field solve."""

    cc: float  # <cos^2 phi>
    ss: float  # <sin^2 phi>
    sc: float  # <sin phi cos phi>
    cx: float  # <cos phi>
    sy: float  # <sin phi>


@dataclass(frozen=True)
class FieldSample:
    """A pair of field amplitudes (reduced units B/mu) at time t."""

    eps_x: float
    eps_y: float
    t: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.eps_x) and np.isfinite(self.eps_y)):
            raise NonFinite(f"field sample contains non-finite values: {self}")


@dataclass(frozen=True)
class GuardConfig:
    """Floors below which the solve refuses to divide."""

    d_min: float = 1e-8
    margin_min: float = 1e-6

    def __post_init__(self):
        if not self.d_min > 0:
            raise ValueError(f"d_min must be positive, got {self.d_min}")
        if not self.margin_min > 0:
            raise ValueError(f"margin_min must be positive, got {self.margin_min}")


def orientation_moments(state: RotorState) -> OrientationMoments:
    """Compute all five moments from the cached operator products."""
    table = operator_table(state.basis.M)
    psi = state.coeffs
    vals = ((table.moment_stack @ psi) @ psi.conj()).real
    return OrientationMoments(
        cc=float(vals[0]), ss=float(vals[1]), sc=float(vals[2]),
        cx=float(vals[3]), sy=float(vals[4]),
    )


def determinant(moments: OrientationMoments) -> float:
    """D = cc*ss - sc^2, the raw (unclamped) system determinant."""
    return moments.cc * moments.ss - moments.sc**2


def boundary_margin(moments: OrientationMoments) -> float:
    """1 - (<cos>^2 + <sin>^2): distance of the orientation from the unit circle."""
    return 1.0 - (moments.cx**2 + moments.sy**2)


def solve_from_moments(
    moments: OrientationMoments,
    accel_x: float,
    accel_y: float,
    d2x_d: float,
    d2y_d: float,
    guard: GuardConfig = GuardConfig(),
    t: Optional[float] = None,
) -> tuple[float, float]:
    """Guarded 2x2 solve given precomputed moments and accelerations.

    Raises SingularityGuard when the determinant or the unit-circle
    margin falls below its floor, NonFinite on NaN input.
    """
    vals = (moments.cc, moments.ss, moments.sc, accel_x, accel_y, d2x_d, d2y_d)
    if not all(np.isfinite(v) for v in vals):
        raise NonFinite(f"non-finite inputs to the field solve: {vals}")
    D = determinant(moments)
    margin = boundary_margin(moments)
    if D < guard.d_min:
        raise SingularityGuard("determinant", D, margin, t=t)
    if margin < guard.margin_min:
        raise SingularityGuard("margin", D, margin, t=t)
    r1 = d2x_d + accel_x
    r2 = d2y_d + accel_y
    inv = 0.5 / D
    return (
        (moments.cc * r1 + moments.sc * r2) * inv,
        (moments.sc * r1 + moments.ss * r2) * inv,
    )


def solve_fields(
    state: RotorState,
    d2x_d: float,
    d2y_d: float,
    guard: GuardConfig = GuardConfig(),
    t: float = 0.0,
) -> FieldSample:
    """Fields that realize the designated orientation accelerations at `state`.

    Args:
        state: current normalized rotor state.
        d2x_d: designated second derivative of <cos phi> at this instant.
        d2y_d: designated second derivative of <sin phi>.
        guard: determinant / margin floors.
        t: time context, recorded in the returned sample and in guard errors.

    Returns:
        FieldSample with the unique (eps_x, eps_y) solving the 2x2 system.
    """
    table = operator_table(state.basis.M)
    psi = state.coeffs
    vals = ((table.moment_stack @ psi) @ psi.conj()).real
    moments = OrientationMoments(*map(float, vals[:5]))
    ex, ey = solve_from_moments(
        moments, float(vals[5]), float(vals[6]), d2x_d, d2y_d, guard, t=t
    )
    return FieldSample(ex, ey, t)


def _as_matrix(op) -> np.ndarray:
    if isinstance(op, AngularOperator):
        return op.matrix
    return np.asarray(op, dtype=complex)


def _as_vector(state) -> np.ndarray:
    if isinstance(state, RotorState):
        return state.coeffs
    return np.asarray(state, dtype=complex)


def generic_field_k0(H0, mu, O, state, dOdt_d: float, tol: Optional[float] = None) -> float:
    """First-order inverse tracking field for a generic bilinear system.

    Inverts d<O>/dt = (i/hbar) <[H0 - mu*eps, O]> for eps (hbar = 1):

        eps = (i * dOdt_d + <[H0, O]>) / <[mu, O]>

    Args:
        H0, mu, O: Hermitian matrices (or AngularOperators) of equal dimension.
        state: normalized state vector.
        dOdt_d: designated d<O>/dt.
        tol: zero threshold; defaults to 1e-10 * dim.

    Raises:
        CommutingObservable: [mu, O] vanishes identically, so no first-order
            field dependence exists and a higher-derivative treatment would
            be required (out of scope here).
        Singularity: the operator commutator is nonzero but its expectation
            passes through zero at this state.
    """
    h0 = _as_matrix(H0)
    m = _as_matrix(mu)
    o = _as_matrix(O)
    psi = _as_vector(state)
    dim = o.shape[0]
    if tol is None:
        tol = 1e-10 * dim

    comm_mu = m @ o - o @ m
    if np.abs(comm_mu).max() < tol:
        raise CommutingObservable(
            "[mu, O] vanishes identically; first-order inversion undefined"
        )
    denom = np.vdot(psi, comm_mu @ psi)
    if abs(denom) < tol:
        raise Singularity(
            f"<[mu, O]> = {denom:.3e} is below tolerance {tol:.1e} at this state"
        )
    numer = 1j * dOdt_d + np.vdot(psi, (h0 @ o - o @ h0) @ psi)
    eps = numer / denom
    if abs(eps.imag) > 1e-10 * max(1.0, abs(eps.real)):
        raise ValueError(
            f"tracking field came out complex ({eps!r}); check Hermiticity of inputs"
        )
    return float(eps.real)
