"""Recapture test on the terminal ion state and residual motional energy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import CA40, HBAR, OMEGA_Z, IonSpecies
from .dynamics import PULSE_OFF, IonState
from .fields import total_potential

RECAPTURED = "recaptured"
LOST = "lost"


@dataclass(frozen=True)
class RecaptureCriterion:
    """Closed bounds on distance from the trap centre and on speed.

    ``mode="energy"`` replaces the instantaneous box test with "residual
    energy below the depth of the restored well" (needs ``stack`` and
    ``voltages`` passed to :func:`classify`).
    """

    max_distance: float = 100e-6
    max_speed: float = 50.0
    mode: str = "instantaneous"

    def __post_init__(self):
        if not (self.max_distance > 0 and self.max_speed > 0):
            raise ValueError("criterion bounds must be > 0")
        if self.mode not in ("instantaneous", "energy"):
            raise ValueError(f"unknown criterion mode {self.mode!r}")


@dataclass(frozen=True)
class Outcome:
    verdict: str
    z_final: float
    v_final: float
    energy: float
    quanta: float
    reason: str
    flags: tuple = field(default=())

    @property
    def recaptured(self):
        return self.verdict == RECAPTURED


def residual_energy(state: IonState, ion: IonSpecies = CA40, omega_z: float = OMEGA_Z):
    """Harmonic-well energy ``(J, quanta)`` of the state about the trap centre."""
    if not omega_z > 0:
        raise ValueError("omega_z must be > 0")
    energy = 0.5 * ion.mass * (state.v**2 + omega_z**2 * state.z**2)
    return energy, energy / (HBAR * omega_z)


def trap_depth(stack, voltages, z_lo=None, z_hi=10e-3, n=20001):
    """``(depth_V, z_min)`` of the well around the trap centre for static voltages."""
    z_lo = stack.min_z if z_lo is None else z_lo
    z = np.linspace(z_lo, z_hi, n)
    phi = total_potential(stack, voltages, z)
    near = np.abs(z - stack.trap_center_z) < 1e-3
    i_min = np.flatnonzero(near)[np.argmin(phi[near])]
    left, right = phi[: i_min + 1].max(), phi[i_min:].max()
    return float(min(left, right) - phi[i_min]), float(z[i_min])


def classify(
    state: IonState,
    criterion: RecaptureCriterion = RecaptureCriterion(),
    reason: str = PULSE_OFF,
    ion: IonSpecies = CA40,
    omega_z: float = OMEGA_Z,
    stack=None,
    voltages=None,
    flags=(),
) -> Outcome:
    """Verdict for a terminal state; only a ``pulse-off`` termination can be recaptured."""
    energy, quanta = residual_energy(state, ion, omega_z)
    if criterion.mode == "energy":
        if stack is None or voltages is None:
            raise ValueError("energy-mode classification needs the restored stack and voltages")
        depth, z_min = trap_depth(stack, voltages)
        e_well = 0.5 * ion.mass * state.v**2 + ion.charge * (
            total_potential(stack, voltages, state.z) - total_potential(stack, voltages, z_min)
        )
        inside = e_well < ion.charge * depth
    else:
        inside = abs(state.z) <= criterion.max_distance and abs(state.v) <= criterion.max_speed
    verdict = RECAPTURED if inside and reason == PULSE_OFF else LOST
    return Outcome(verdict, state.z, state.v, energy, quanta, reason, tuple(flags))
