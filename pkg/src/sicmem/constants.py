"""Physical constants and default material parameters.

Units used throughout the package: lengths in nm, times in s, angular
frequencies in rad/s, magnetic fields in T.
"""

import numpy as np
from scipy import constants as _c

HBAR = _c.hbar
MU0_OVER_4PI = _c.mu_0 / (4 * np.pi)
TWO_PI = 2 * np.pi

# gyromagnetic ratios, rad s^-1 T^-1 (signed)
GAMMA_E = TWO_PI * 28.025e9
GAMMA_SI29 = TWO_PI * -8.465e6
GAMMA_C13 = TWO_PI * 10.7084e6

# 4H-SiC hexagonal cell, nm
A_LATTICE = 0.3079
C_LATTICE = 1.0082

GAUSS = 1e-4

# A_par cutoff separating weakly from strongly coupled nuclei
STRONG_COUPLING_CUTOFF = TWO_PI * 60e3

# natural and purified isotope fractions
NATURAL_SI29 = 0.047
NATURAL_C13 = 0.011
PURIFIED_SI29 = 0.0015
PURIFIED_C13 = 0.0002


def khz(f):
    """Linear frequency in kHz to rad/s."""
    return TWO_PI * 1e3 * f


def mhz(f):
    """Linear frequency in MHz to rad/s."""
    return TWO_PI * 1e6 * f
