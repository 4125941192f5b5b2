"""Physical constants (CODATA 2018), SI units.

Centralized so every derived number in the package traces to one table.
"""

import math

MU0 = 1.25663706212e-6      # vacuum permeability, N/A^2
HBAR = 1.054571817e-34      # reduced Planck constant, J*s
KB = 1.380649e-23           # Boltzmann constant, J/K

TWO_PI = 2.0 * math.pi

# mu0/(4 pi), the dipolar prefactor
MU0_OVER_4PI = MU0 / (4.0 * math.pi)
