"""Physical constants and fixed parameters of the ytterbium-171 platform."""

import scipy.constants as _const

HBAR = _const.hbar
KB = _const.k
ATOMIC_MASS = _const.u
GRAVITY = _const.g

# Mass of a neutral 171Yb atom.
YB171_MASS = 170.936 * ATOMIC_MASS

# Clock transition (1S0 <-> 3P0) drive wavelength.
CLOCK_WAVELENGTH = 578e-9

# Magic-wavelength tweezer light used for trapping.
TWEEZER_WAVELENGTH = 759e-9
