"""Angular-momentum basis and operator matrices for a planar rigid rotor.

The rotor lives on the angle phi with free Hamiltonian -B d^2/dphi^2 and
is described in the truncated eigenbasis |m>, m = -M..M, of the angular
momentum, with wave functions exp(i*m*phi)/sqrt(2*pi). In this basis

    <m|cos(phi)|m'> = (delta_{m,m'+1} + delta_{m,m'-1}) / 2
    <m|sin(phi)|m'> = -i (delta_{m,m'+1} - delta_{m,m'-1}) / 2

and the derivative operators are diagonal maps, d/dphi -> i*diag(m) and
d^2/dphi^2 -> -diag(m^2). Reduced units hbar = B = 1 apply throughout;
the kinetic operator is simply diag(m^2).

All operators are dense (2M+1)x(2M+1) complex matrices, built once per
basis and cached immutably, so they are safe to share between concurrent
simulations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BasisMismatch


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BasisSpec:
    """Truncated angular-momentum basis with cutoff M (dimension 2M+1)."""

    M: int

    def __post_init__(self):
        if not isinstance(self.M, (int, np.integer)) or self.M < 1:
            raise ValueError(
                f"basis cutoff M must be an integer >= 1, got {self.M!r}; "
                f"M=0 cannot represent the cos/sin couplings"
            )

    @property
    def dim(self) -> int:
        return 2 * self.M + 1

    @property
    def m_values(self) -> np.ndarray:
        return _freeze(np.arange(-self.M, self.M + 1))


def build_basis(M: int) -> BasisSpec:
    """Construct the basis |m>, m = -M..M."""
    return BasisSpec(int(M))


@dataclass(frozen=True)
class AngularOperator:
    """A dense operator in the m-basis, tagged Hermitian where applicable."""

    basis: BasisSpec
    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        if self.matrix.shape != (self.basis.dim, self.basis.dim):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match basis dim {self.basis.dim}"
            )
        _freeze(self.matrix)


@dataclass
class RotorState:
    """Normalized coefficient vector over the m-basis."""

    basis: BasisSpec
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (self.basis.dim,):
            raise ValueError(
                f"coefficient vector has shape {self.coeffs.shape}, expected ({self.basis.dim},)"
            )
        n = np.linalg.norm(self.coeffs)
        if abs(n - 1.0) > 1e-10:
            raise ValueError(f"state norm {n!r} deviates from 1 by more than 1e-10")

    @classmethod
    def ground(cls, basis: BasisSpec) -> "RotorState":
        """The m=0 rotational ground state."""
        c = np.zeros(basis.dim, dtype=complex)
        c[basis.M] = 1.0
        return cls(basis, c)

    @classmethod
    def unit(cls, basis: BasisSpec, m: int) -> "RotorState":
        """The basis state |m>."""
        if abs(m) > basis.M:
            raise ValueError(f"|m|={abs(m)} exceeds cutoff M={basis.M}")
        c = np.zeros(basis.dim, dtype=complex)
        c[m + basis.M] = 1.0
        return cls(basis, c)

    @classmethod
    def from_coeffs(cls, basis: BasisSpec, coeffs, normalize: bool = True) -> "RotorState":
        c = np.asarray(coeffs, dtype=complex)
        if normalize:
            n = np.linalg.norm(c)
            if n == 0:
                raise ValueError("cannot normalize the zero vector")
            c = c / n
        return cls(basis, c)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.coeffs) ** 2


def cos_op(basis: BasisSpec) -> AngularOperator:
    """cos(phi): 1/2 on both first off-diagonals."""
    d = basis.dim
    mat = np.zeros((d, d), dtype=complex)
    idx = np.arange(d - 1)
    mat[idx + 1, idx] = 0.5
    mat[idx, idx + 1] = 0.5
    return AngularOperator(basis, mat, hermitian=True)


def sin_op(basis: BasisSpec) -> AngularOperator:
    """sin(phi): -i/2 on the lower and +i/2 on the upper off-diagonal."""
    d = basis.dim
    mat = np.zeros((d, d), dtype=complex)
    idx = np.arange(d - 1)
    mat[idx + 1, idx] = -0.5j
    mat[idx, idx + 1] = 0.5j
    return AngularOperator(basis, mat, hermitian=True)


def kinetic_op(basis: BasisSpec) -> AngularOperator:
    """Free rotor Hamiltonian diag(m^2) in reduced units."""
    mat = np.diag(basis.m_values.astype(float) ** 2).astype(complex)
    return AngularOperator(basis, mat, hermitian=True)


def accel_ops(basis: BasisSpec) -> tuple[AngularOperator, AngularOperator]:
    """Field-free orientation-acceleration operators.

    These are the double commutators [H0, [H0, cos]] and [H0, [H0, sin]]
    divided by B^2, realized directly in the m-basis:

        A_x = C + 4i S diag(m) + 4 C diag(m^2)
        A_y = S - 4i C diag(m) + 4 S diag(m^2)

    Both come out Hermitian even though the individual summands are not.
    """
    m = basis.m_values.astype(float)
    C = cos_op(basis).matrix
    S = sin_op(basis).matrix
    ax = C + 4j * (S * m[np.newaxis, :]) + 4.0 * (C * (m**2)[np.newaxis, :])
    ay = S - 4j * (C * m[np.newaxis, :]) + 4.0 * (S * (m**2)[np.newaxis, :])
    return (
        AngularOperator(basis, ax, hermitian=True),
        AngularOperator(basis, ay, hermitian=True),
    )


def expectation(state: RotorState, op: AngularOperator):
    """<psi|A|psi>; real (imaginary part below 1e-12) for Hermitian A."""
    if op.basis != state.basis:
        raise BasisMismatch(
            f"operator basis M={op.basis.M} does not match state basis M={state.basis.M}"
        )
    val = np.vdot(state.coeffs, op.matrix @ state.coeffs)
    if op.hermitian:
        if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
            raise ValueError(
                f"expectation of Hermitian-flagged operator came out complex: {val!r}"
            )
        return float(val.real)
    return complex(val)


@dataclass(frozen=True)
class OperatorTable:
    """All per-basis matrices needed by the field solver and the propagator.

    moment_stack packs, in order, the operators for
    cos^2, sin^2, sym(sin*cos), cos, sin, A_x, A_y
    so that the five orientation moments and the two field-free
    accelerations come out of a single stacked matrix-vector product.
    """

    basis: BasisSpec
    cos: np.ndarray
    sin: np.ndarray
    kinetic_diag: np.ndarray
    accel_x: np.ndarray
    accel_y: np.ndarray
    moment_stack: np.ndarray
    deriv_x: np.ndarray
    deriv_y: np.ndarray


@lru_cache(maxsize=32)
def operator_table(M: int) -> OperatorTable:
    """Build (or fetch the cached) operator set for cutoff M."""
    basis = build_basis(M)
    C = cos_op(basis).matrix
    S = sin_op(basis).matrix
    kin = basis.m_values.astype(float) ** 2
    ax = accel_ops(basis)[0].matrix
    ay = accel_ops(basis)[1].matrix
    # Hermitian symmetrization of sin*cos; the plain product differs from it
    # only in the extreme corner rows introduced by truncation.
    sc = 0.5 * (S @ C + C @ S)
    stack = np.stack([C @ C, S @ S, sc, C, S, ax, ay])
    h0 = np.diag(kin).astype(complex)
    vx = 1j * (h0 @ C - C @ h0)  # d<cos>/dt generator, field-independent
    vy = 1j * (h0 @ S - S @ h0)
    return OperatorTable(
        basis=basis,
        cos=_freeze(C),
        sin=_freeze(S),
        kinetic_diag=_freeze(kin),
        accel_x=_freeze(ax),
        accel_y=_freeze(ay),
        moment_stack=_freeze(stack),
        deriv_x=_freeze(vx),
        deriv_y=_freeze(vy),
    )
