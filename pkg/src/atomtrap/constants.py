"""Physical constants for the Rb-87 D-line system."""

from dataclasses import dataclass

import numpy as np
from scipy.constants import c as _c
from scipy.constants import hbar as _hbar
from scipy.constants import k as _kB
from scipy.constants import physical_constants as _pc

TWOPI = 2.0 * np.pi

_u = _pc["atomic mass constant"][0]  # kg


@dataclass(frozen=True)
class PhysicalConstants:
    """Constants of the atom and the radiation field, SI units.

    Frequencies are angular (rad/s) throughout the package; MHz appear
    only at the config/CLI boundary.
    """

    kB: float = _kB                      # J/K
    m: float = 86.909180527 * _u         # Rb-87 mass, kg
    c: float = _c                        # m/s
    hbar: float = _hbar                  # J s
    gamma: float = TWOPI * 6.0e6         # 5P3/2 decay rate, rad/s
    lambda0: float = 780.241209686e-9    # D2 fluorescence wavelength, m
    excited_lifetime: float = 27e-9      # s
    lambda_d1: float = 794.978851156e-9  # D1 line, m
    lambda_d2: float = 780.241209686e-9  # D2 line, m
    # 5P3/2 hyperfine splitting F'=2 -> F'=3, rad/s
    hf_splitting_excited: float = TWOPI * 266.650e6
    # isotropic-light saturation intensity of the D2 F=2 -> F'=3 line, mW/cm^2
    i_sat: float = 3.577


RB87 = PhysicalConstants()

# Basis ordering for the four-level system and its density matrices:
# (excited F'=2, ground F=1, ground F=2, excited F'=3).
EXC_F2 = 0
GND_F1 = 1
GND_F2 = 2
EXC_F3 = 3
