"""Physical constants and signal-path helpers shared by the link model and
the ionosphere correction."""

import math

import numpy as np

C = 299_792_458.0
# dispersive coefficient: group delay = IONO_K * STEC / (c f^2), STEC in el/m^2
IONO_K = 40.308
TECU = 1e16
EARTH_RADIUS = 6_371_000.0
SHELL_HEIGHT = 450_000.0

GPS_L1 = 1575.42e6
GPS_L2 = 1227.60e6


def slant_factor(elevation_deg, shell_height=SHELL_HEIGHT):
    """Thin-shell (single layer) mapping from vertical to slant TEC.

    Equals 1 at zenith.  ``shell_height=inf`` gives the flat-layer 1/sin(el).
    """
    el = np.radians(np.asarray(elevation_deg, dtype=float))
    if np.any((el <= 0) | (el > math.pi / 2 + 1e-12)):
        raise ValueError("elevation must lie in (0, 90] degrees")
    if math.isinf(shell_height):
        return 1.0 / np.sin(el)
    sin_z = EARTH_RADIUS / (EARTH_RADIUS + shell_height) * np.cos(el)
    return 1.0 / np.sqrt(1.0 - sin_z * sin_z)


def iono_delay(stec_tecu, freq):
    """Magnitude (s) of the first-order dispersive delay for STEC in TECU.

    Carrier phase is advanced by this amount, group delay is retarded.
    """
    return IONO_K * np.asarray(stec_tecu, dtype=float) * TECU / (C * freq * freq)


def narrowlane_wavelength(f1=GPS_L1, f2=GPS_L2):
    """Narrowlane wavelength c/(f1+f2) expressed in light-time (s)."""
    return 1.0 / (f1 + f2)
