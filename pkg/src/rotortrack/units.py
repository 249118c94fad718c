"""Conversion between reduced simulation units and laboratory units.

Internally everything uses hbar = B = mu = 1: energies in units of the
rotational constant B, times in hbar/B, field amplitudes in B/mu. The
conversion to picoseconds follows from B expressed as a wavenumber,

    t_unit[ps] = 1 / (2*pi * c[cm/ps] * B[cm^-1]),

and the field unit B/mu is reported in V/m.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import constants


@dataclass(frozen=True)
class UnitSystem:
    """Rotor constants defining the reduced-unit scales.

    Attributes:
        B_invcm: rotational constant in cm^-1.
        mu_debye: dipole magnitude in Debye.
    """

    B_invcm: float
    mu_debye: float

    def __post_init__(self):
        if not self.B_invcm > 0:
            raise ValueError(f"B_invcm must be positive, got {self.B_invcm}")
        if not self.mu_debye > 0:
            raise ValueError(f"mu_debye must be positive, got {self.mu_debye}")

    @property
    def time_unit_ps(self) -> float:
        """One reduced time unit (hbar/B) in picoseconds."""
        import math

        return 1.0 / (2.0 * math.pi * constants.SPEED_OF_LIGHT_CM_PER_PS * self.B_invcm)

    @property
    def energy_unit_J(self) -> float:
        """The rotational constant B in joules."""
        return constants.PLANCK_J_S * constants.SPEED_OF_LIGHT_CM_PER_S * self.B_invcm

    @property
    def field_unit_V_per_m(self) -> float:
        """One reduced field unit (B/mu) in V/m."""
        return self.energy_unit_J / (self.mu_debye * constants.DEBYE_C_M)

    def ps_to_reduced(self, t_ps: float) -> float:
        return t_ps / self.time_unit_ps

    def reduced_to_ps(self, t_reduced: float) -> float:
        return t_reduced * self.time_unit_ps
