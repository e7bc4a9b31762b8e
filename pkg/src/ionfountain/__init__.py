"""Simulation of deterministic single-ion extraction, reflection and recapture."""

__version__ = "0.1.0"

from .constants import CA40, IonSpecies
from .dynamics import RfAxialForceModel, SimParams, Trajectory, simulate
from .experiments import (
    InitialDistribution,
    calibrate_reflector,
    calibrate_rf_force,
    find_pulse_window,
    monte_carlo,
    sweep,
    wilson_interval,
)
from .fields import ElectrodeModel, ElectrodeStack, default_stack
from .recapture import RecaptureCriterion, classify
from .scenario import Scenario, baseline_scenario
from .waveforms import RfProgram, SwitchEvent, VoltageSchedule, baseline_schedule

__all__ = [
    "CA40", "IonSpecies", "RfAxialForceModel", "SimParams", "Trajectory", "simulate",
    "InitialDistribution", "calibrate_reflector", "calibrate_rf_force", "find_pulse_window",
    "monte_carlo", "sweep", "wilson_interval", "ElectrodeModel", "ElectrodeStack", "default_stack",
    "RecaptureCriterion", "classify", "Scenario", "baseline_scenario", "RfProgram", "SwitchEvent",
    "VoltageSchedule", "baseline_schedule",
]
