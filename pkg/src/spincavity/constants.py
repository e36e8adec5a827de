"""Physical constants (SI) and unit helpers shared across the package.

All internal frequencies and rates are angular (rad/s). User-facing
interfaces (CLI, file formats) speak Hz/gauss/dBm and convert here.
"""

import math

TWO_PI = 2.0 * math.pi

HBAR = 1.054571817e-34      # J s
MU_0 = 1.25663706212e-6     # N/A^2
K_B = 1.380649e-23          # J/K

# electron gyromagnetic ratio, rad/s per tesla (2*pi x 28.024 GHz/T)
GAMMA_E = TWO_PI * 28.024e9

# <100>-oriented bias field projects equally onto all four tetrahedral
# defect axes with cos(theta) = 1/sqrt(3)
PROJECTION_100 = 1.0 / math.sqrt(3.0)

Z0_OHM = 50.0               # transmission-line impedance for V<->P conversion


def hz_to_angular(f_hz):
    return TWO_PI * f_hz


def angular_to_hz(omega):
    return omega / TWO_PI


def dbm_to_watt(p_dbm):
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watt_to_dbm(p_watt):
    if p_watt <= 0:
        raise ValueError("power must be positive for dBm conversion")
    return 10.0 * math.log10(p_watt / 1e-3)


def gauss_to_tesla(b_gauss):
    return 1e-4 * b_gauss


def tesla_to_gauss(b_tesla):
    return 1e4 * b_tesla
