"""Physical constants (CODATA 2018) and ion species."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import constants as _sc

ELEMENTARY_CHARGE = _sc.e
ATOMIC_MASS = _sc.physical_constants["atomic mass constant"][0]
ELECTRON_MASS = _sc.m_e
BOLTZMANN = _sc.k
HBAR = _sc.hbar

#: Drive frequency of the trap RF, 2*pi*17.85 MHz.
OMEGA_RF = 2.0 * math.pi * 17.85e6
#: Peak-to-peak RF amplitude on the blades.
U_PP = 150.0
#: Axial secular frequency used for the static trap, 2*pi*147 kHz.
OMEGA_Z = 2.0 * math.pi * 147e3


@dataclass(frozen=True)
class IonSpecies:
    """A singly or multiply charged ion.

    Parameters
    ----------
    mass : float
        Mass in kg.
    charge : float
        Charge in C. May be negative but not zero.
    label : str
    """

    mass: float
    charge: float
    label: str = "ion"

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValueError(f"ion mass must be positive, got {self.mass!r}")
        if self.charge == 0 or not math.isfinite(self.charge):
            raise ValueError("ion charge must be finite and non-zero")

    @property
    def q_over_m(self) -> float:
        return self.charge / self.mass


CA40 = IonSpecies(
    mass=39.9626 * ATOMIC_MASS - ELECTRON_MASS,
    charge=ELEMENTARY_CHARGE,
    label="40Ca+",
)
