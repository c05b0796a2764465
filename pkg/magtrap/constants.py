"""Physical constants and numerical tolerances."""

import math

MU_0 = 4e-7 * math.pi
"""Vacuum permeability [N/A²]."""

GRID_EPS = 1e-9
"""Minimum distance between a grid point and the trap point [m]."""

FIELD_EPS = 1e-12
"""Flux density below which the robot orientation is undefined [T]."""

FORCE_EPS = 1e-18
"""Force below which a direction is undefined [N]."""

SINGULAR_EPS = 1e-15
"""Distance treated as coincident with a dipole centre [m]."""

DIPOLE_VALIDITY_FACTOR = 1.5
"""Multiple of the magnet space diagonal beyond which the dipole model holds."""
