"""Physical constants for the NV-center scenarios.

NV energies are carried in angular-frequency units (rad/us); time in us.
A quantity quoted as "x MHz" enters the Hamiltonian as 2*pi*x rad/us.
"""

import numpy as np

TWO_PI = 2.0 * np.pi

# CODATA 2018 (SI)
PLANCK_J_S = 6.62607015e-34        # exact
BOHR_MAGNETON_J_T = 9.2740100783e-24
VACUUM_PERMEABILITY = 1.25663706212e-6  # N/A^2

# mu_B / h, per gauss (1 T = 1e4 G)
BOHR_MAGNETON_MHZ_PER_G = BOHR_MAGNETON_J_T / PLANCK_J_S / 1e10

# mu_0 mu_B^2 / (4 pi h) in MHz nm^3; multiply by the two g factors involved.
DIPOLE_MHZ_NM3 = (
    VACUUM_PERMEABILITY / (4.0 * np.pi) * BOHR_MAGNETON_J_T**2 / PLANCK_J_S * 1e27
)

# Angular-unit versions used directly in Hamiltonians (rad/us per G, rad/us nm^3).
BOHR_MAGNETON_RAD_US_PER_G = TWO_PI * BOHR_MAGNETON_MHZ_PER_G
DIPOLE_RAD_US_NM3 = TWO_PI * DIPOLE_MHZ_NM3

# Zero-field splitting of the NV ground-state triplet, 2.87 GHz.
NV_SPLITTING_RAD_US = TWO_PI * 2870.0
