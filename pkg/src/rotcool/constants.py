"""Physical constants (CODATA via scipy) and unit conversions used across the package.

Conventions
-----------
- Rotational constants, level energies and trap frequencies are ordinary
  frequencies in MHz.
- Couplings are ordinary frequencies in kHz.
- Dipole moments are in Debye.
- Propagation runs in microseconds with angular frequencies in rad/us, so an
  ordinary frequency ``f`` in MHz enters a Hamiltonian as ``2*pi*f``.
"""

import numpy as np
from scipy import constants as _c

HBAR = _c.hbar
H_PLANCK = _c.h
E_CHARGE = _c.e
EPS0 = _c.epsilon_0
AMU = _c.atomic_mass
DEBYE = 1e-21 / _c.c  # C m

COULOMB_K = E_CHARGE**2 / (4 * np.pi * EPS0)  # J m, for unit charges

TWO_PI = 2 * np.pi


def mhz_to_rad_per_us(f_mhz):
    return TWO_PI * np.asarray(f_mhz, dtype=float)


def khz_to_rad_per_us(f_khz):
    return TWO_PI * 1e-3 * np.asarray(f_khz, dtype=float)
