"""Numeric constants shared across modules.

Everything here is kept in closed form (square roots and pi, not rounded
decimals); several downstream bounds are sensitive to signs and the last few
digits. The public, documented bundle lives in energy.Constants.
"""

import math

# Minimal second moment of a unit-area hexagon, 5*sqrt(3)/54 = 0.160375...
C6 = 5.0 * math.sqrt(3.0) / 54.0

# d/dn of the regular n-gon moment constant at n = 6; negative.
KAPPA = 2.0 * math.pi / 243.0 - 5.0 * math.sqrt(3.0) / 324.0

# Quadratic-lower-bound weights and the mass threshold it needs.
XI = 1.0e-3
ZETA = 1.0e-3
M1 = 1.5e-4

# Minimizer structure constants: per-cell mass floor, hole radius, cell
# diameter bound D0^2 = 4 [c6 m0^(-1/2) + R0^2].
M0 = 2.4095e-4
R0 = 3.2143
D0 = 2.0 * math.sqrt(C6 / math.sqrt(M0) + R0 * R0)

# Unit-density triangular lattice: neighbor spacing and the unit-area
# hexagon's circumradius/apothem/diameter.
LATTICE_SPACING = math.sqrt(2.0) * 3.0 ** -0.25
HEX_CIRCUMRADIUS = math.sqrt(2.0) * 3.0 ** -0.75
HEX_APOTHEM = 3.0 ** -0.25 / math.sqrt(2.0)
HEX_DIAMETER = 2.0 * HEX_CIRCUMRADIUS
