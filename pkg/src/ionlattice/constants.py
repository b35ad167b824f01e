"""Physical constants (CODATA via scipy) and documented Ca-40 defaults.

Every transition constant here is a configuration default, not a hard-coded
truth: configs may override any of them.
"""

import math

import scipy.constants as _sc

KB = _sc.k
HBAR = _sc.hbar
ECHARGE = _sc.e
EPS0 = _sc.epsilon_0
C_LIGHT = _sc.c
AMU = _sc.physical_constants["atomic mass constant"][0]

# e^2 / (4 pi eps0), the Coulomb coupling in SI (J m)
COULOMB = ECHARGE**2 / (4.0 * math.pi * EPS0)

# --- Ca-40 defaults -------------------------------------------------------
# Mass in atomic mass units (AME2020).
CA40_MASS_AMU = 39.962590866
CA40_MASS = CA40_MASS_AMU * AMU

# Total decay rate of the P1/2 level (lifetime ~7.1 ns).
CA40_GAMMA_P = 1.41e8  # rad/s
# Branching of P1/2 decay into the S1/2 ground state (397 nm photon).
CA40_BRANCHING_397 = 0.94
# Probability of leaving the lattice-coupled Zeeman state per excitation
# (decay to S1/2 or to the other D3/2 Zeeman sublevels).
CA40_BRANCHING_LEAVE = 0.97
# Fine-structure splitting between P1/2 and P3/2.
CA40_FINE_STRUCTURE = 2.0 * math.pi * 6.7e12  # rad/s

CA40_LATTICE_WAVELENGTH = 866e-9  # D3/2 -> P1/2
CA40_DETECTION_WAVELENGTH = 397e-9  # P1/2 -> S1/2
