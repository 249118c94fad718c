"""Physical constants used at the unit-conversion boundary.

All values are CODATA 2018 (the speed of light and Planck constant are
exact by SI definition). Everything internal to the simulation runs in
reduced units; these constants appear only when converting to and from
laboratory units (picoseconds, V/m).
"""

import math

SPEED_OF_LIGHT_CM_PER_S = 2.99792458e10
"""Speed of light in cm/s (exact)."""

SPEED_OF_LIGHT_CM_PER_PS = SPEED_OF_LIGHT_CM_PER_S * 1e-12
"""Speed of light in cm/ps."""

PLANCK_J_S = 6.62607015e-34
"""Planck constant in J*s (exact)."""

HBAR_J_S = PLANCK_J_S / (2.0 * math.pi)
"""Reduced Planck constant in J*s."""

DEBYE_C_M = 1.0e-21 / 2.99792458e8
"""One Debye in C*m (== 1e-21/c, approximately 3.3356e-30)."""
