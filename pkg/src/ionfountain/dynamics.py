"""1D axial equation of motion, integrated with fixed-step velocity Verlet."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constants import IonSpecies
from .errors import ConfigurationError, NotReflectedError, NumericalBlowupError
from .fields import ENDCAP_Z, ElectrodeStack, total_potential
from .waveforms import VoltageSchedule, validate_schedule

PULSE_OFF = "pulse-off"
ESCAPED = "escaped"
MAX_TIME = "max-time"
RETURNED = "returned"


@dataclass(frozen=True)
class IonState:
    t: float
    z: float
    v: float

    def is_finite(self):
        return math.isfinite(self.t) and math.isfinite(self.z) and math.isfinite(self.v)


@dataclass(frozen=True)
class SimParams:
    """Integrator settings.

    ``stop`` selects the termination rule: ``"pulse-off"`` ends at the
    extraction switch-off event, ``"return"`` holds the pulse on and ends
    when the ion is back at its start after one reflection, ``"max-time"``
    ignores both.
    """

    dt: float = 2e-9
    z_init: float = 0.0
    v_init: float = 0.0
    max_time: float = 20e-6
    decimation: int = 10
    stop: str = "pulse-off"
    min_excursion: float = 1e-3

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("dt must be > 0", "sim.dt")
        if self.decimation < 1:
            raise ConfigurationError("decimation must be >= 1", "sim.decimation")
        if self.stop not in ("pulse-off", "return", "max-time"):
            raise ConfigurationError(f"unknown stop rule {self.stop!r}", "sim.stop")


@dataclass(frozen=True)
class RfAxialForceModel:
    """Axial RF force localised at the extraction endcap.

    ``force = q * scale * g(z) * sin(phase) * envelope(t) / (u_pp / 2)`` with
    ``g`` a Gaussian of width ``sigma`` about ``center_z`` minus the image
    term that pins ``g(0) = 0`` (no axial RF at the trap centre).
    """

    scale: float = 0.0
    center_z: float = ENDCAP_Z
    sigma: float = 0.4e-3

    def profile(self, z):
        z = np.asarray(z, dtype=float)
        s2 = 2.0 * self.sigma**2
        return np.exp(-((z - self.center_z) ** 2) / s2) - math.exp(-self.center_z**2 / s2) * np.exp(-(z**2) / s2)

    def scalar_profile(self):
        c, s2 = self.center_z, 2.0 * self.sigma**2
        image = math.exp(-c * c / s2)
        exp = math.exp

        def g(z):
            return exp(-(z - c) ** 2 / s2) - image * exp(-z * z / s2)

        return g


@dataclass
class Trajectory:
    """Recorded samples (every ``decimation`` steps) and the terminal state."""

    t: np.ndarray
    z: np.ndarray
    v: np.ndarray
    terminal: IonState
    reason: str
    dt: float
    t_return: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def states(self):
        return [IonState(float(a), float(b), float(c)) for a, b, c in zip(self.t, self.z, self.v)]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_s", "z_m", "v_mps"])
            for row in zip(self.t, self.z, self.v):
                writer.writerow([repr(float(x)) for x in row])


def step(state: IonState, accel: Callable[[float, float], float], dt: float) -> IonState:
    """One velocity-Verlet step; ``accel(z, t)`` returns m/s^2."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    a0 = accel(state.z, state.t)
    if not math.isfinite(a0):
        raise NumericalBlowupError("non-finite acceleration", state)
    z1 = state.z + state.v * dt + 0.5 * a0 * dt * dt
    a1 = accel(z1, state.t + dt)
    if not math.isfinite(a1):
        raise NumericalBlowupError("non-finite acceleration", state)
    return IonState(state.t + dt, z1, state.v + 0.5 * (a0 + a1) * dt)


def _force_terms(stack, schedule, ion, rf_force, times):
    """Per-electrode scalar gradient functions and their q/m-scaled voltage columns."""
    qm = ion.q_over_m
    grads, cols = [], []
    for name in schedule.electrodes:
        series = schedule.voltage_series(name, times)
        if not np.any(series):
            continue
        grads.append(stack[name].scalar_gradient())
        # a = (q/m) E = -(q/m) U dphi/dz
        cols.append((-qm * series).tolist())
    rf_col = rf_g = None
    if rf_force is not None and rf_force.scale != 0 and schedule.rf.u_pp > 0:
        rf = schedule.rf
        factor = rf_force.scale * np.sin(rf.phase(times)) * rf.amplitude(times) / (0.5 * rf.u_pp)
        rf_col = (qm * factor).tolist()
        rf_g = rf_force.scalar_profile()
    return grads, cols, rf_col, rf_g


def make_accel(stack, schedule, ion, rf_force=None):
    """Acceleration ``a(z, t)`` evaluated directly (slow path, used by tests)."""
    qm = ion.q_over_m
    names = list(schedule.electrodes)
    grads = [stack[n].scalar_gradient() for n in names]
    g_rf = rf_force.scalar_profile() if rf_force is not None and rf_force.scale else None

    def accel(z, t):
        a = 0.0
        for n, g in zip(names, grads):
            u = float(schedule.voltage_series(n, t))
            if u:
                a -= qm * u * g(z)
        if g_rf is not None:
            rf = schedule.rf
            a += qm * rf_force.scale * g_rf(z) * math.sin(float(rf.phase(t))) * float(rf.amplitude(t)) / (0.5 * rf.u_pp)
        return a

    return accel


def simulate(
    stack: ElectrodeStack,
    schedule: VoltageSchedule,
    ion: IonSpecies,
    params: SimParams = SimParams(),
    rf_force: RfAxialForceModel | None = None,
) -> Trajectory:
    """Integrate the ion from ``(z_init, v_init)`` at t = 0.

    Voltages (and the RF force) are sampled on the fixed time grid, so an
    event that does not fall on a grid point acts through its linear edge.
    """
    problems = validate_schedule(schedule, stack)
    if problems:
        raise ConfigurationError("; ".join(problems), "schedule")
    dt = params.dt
    t_end = params.max_time
    if params.stop == "pulse-off":
        t_off = schedule.pulse_off_time()
        if t_off is not None and t_off < t_end:
            t_end = t_off
    elif params.stop == "return":
        schedule = schedule.without_pulse_off()
    n_full = int(math.floor(t_end / dt + 1e-9))
    frac = t_end - n_full * dt
    times = np.arange(n_full + 2) * dt
    if frac > 1e-9 * dt:
        times[-1] = t_end
    grads, cols, rf_col, rf_g = _force_terms(stack, schedule, ion, rf_force, times)
    terms = list(zip(grads, cols))

    def accel(z, n):
        a = 0.0
        for g, col in terms:
            a += col[n] * g(z)
        if rf_col is not None:
            a += rf_col[n] * rf_g(z)
        return a

    z, v = params.z_init, params.v_init
    a = accel(z, 0)
    dec = params.decimation
    ts, zs, vs = [0.0], [z], [v]
    z_lo, z_hi = stack.min_z, stack.max_z
    want_return = params.stop == "return"
    turned = False
    t_return = None
    reason = MAX_TIME if params.stop != "pulse-off" or t_end == params.max_time else PULSE_OFF
    n = 0
    while n < n_full:
        z1 = z + v * dt + 0.5 * a * dt * dt
        a1 = accel(z1, n + 1)
        if not math.isfinite(a1) or not math.isfinite(z1):
            raise NumericalBlowupError(f"non-finite state at t={n * dt:.3e} s", IonState(n * dt, z, v))
        v1 = v + 0.5 * (a + a1) * dt
        n += 1
        if want_return:
            if not turned:
                if v > 0 >= v1 and z1 > params.z_init + params.min_excursion:
                    turned = True
            elif v1 >= 0 > v:
                t_return = (n - 1) * dt + dt * (-v) / (v1 - v)
            elif z1 <= params.z_init < z:
                t_return = (n - 1) * dt + dt * (z - params.z_init) / (z - z1)
        z, v, a = z1, v1, a1
        if n % dec == 0:
            ts.append(n * dt)
            zs.append(z)
            vs.append(v)
        if t_return is not None:
            reason = RETURNED
            break
        if z > z_hi or z < z_lo:
            reason = ESCAPED
            break
    t = n * dt
    if n == n_full and reason == PULSE_OFF and frac > 1e-9 * dt:
        # land exactly on the switch-off time
        z1 = z + v * frac + 0.5 * a * frac * frac
        a1 = accel(z1, n + 1)
        v = v + 0.5 * (a + a1) * frac
        z, t = z1, t_end
    return Trajectory(
        t=np.array(ts), z=np.array(zs), v=np.array(vs),
        terminal=IonState(t, z, v), reason=reason, dt=dt, t_return=t_return,
    )


def round_trip_time(stack, schedule, ion, params=SimParams(), rf_force=None) -> float:
    """Time for the ion to leave and come back to its start with the pulse held on."""
    p = SimParams(dt=params.dt, z_init=params.z_init, v_init=params.v_init,
                  max_time=params.max_time, decimation=params.decimation, stop="return",
                  min_excursion=params.min_excursion)
    traj = simulate(stack, schedule, ion, p, rf_force)
    if traj.t_return is None:
        raise NotReflectedError(f"ion did not return (terminated: {traj.reason})")
    return traj.t_return


def turning_point(traj: Trajectory):
    """``(z_turn, t_turn)`` of the first outward velocity reversal.

    The maximum is refined with a parabola through the three bracketing samples.
    """
    v = traj.v
    idx = np.nonzero((v[:-1] > 0) & (v[1:] <= 0))[0]
    if idx.size == 0:
        raise NotReflectedError("trajectory has no turning point")
    i = int(idx[0])
    i = i if traj.z[i] >= traj.z[i + 1] else i + 1
    if i == 0 or i == len(traj.z) - 1:
        return float(traj.z[i]), float(traj.t[i])
    z0, z1, z2 = traj.z[i - 1], traj.z[i], traj.z[i + 1]
    h = traj.t[i] - traj.t[i - 1]
    denom = z0 - 2.0 * z1 + z2
    if denom >= 0:
        return float(z1), float(traj.t[i])
    offset = 0.5 * (z0 - z2) / denom
    z_turn = z1 - 0.25 * (z0 - z2) * offset
    return float(z_turn), float(traj.t[i] + offset * h)


def peak_speed(traj: Trajectory) -> float:
    if len(traj.v) == 0:
        raise ValueError("empty trajectory")
    return float(np.max(np.abs(traj.v)))


def total_energy(stack, voltages, ion, z, v):
    """Kinetic plus electrostatic energy (J) in a static voltage map."""
    return 0.5 * ion.mass * v * v + ion.charge * total_potential(stack, voltages, z)
