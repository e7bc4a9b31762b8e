"""Time-dependent control program: DC switch events and the RF drive envelope."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .constants import OMEGA_RF, U_PP
from .errors import InvalidScheduleError

DEFAULT_EDGE = 50e-9
DEFAULT_RF_RAMP = 500e-9
EXTRACTION_VOLTAGE = -200.0
REFLECTOR_VOLTAGE = 7.5
PULSE_DURATION = 6.3e-6
T_RF = 6.35e-6


@dataclass(frozen=True)
class SwitchEvent:
    """Linear voltage edge on one electrode starting at ``time``."""

    time: float
    electrode: str
    target: float
    edge_duration: float = DEFAULT_EDGE

    @property
    def end(self):
        return self.time + self.edge_duration


@dataclass(frozen=True)
class RfProgram:
    """RF drive: amplitude envelope with cosine (or linear) ramps, fixed phase offset.

    The instantaneous phase is ``omega * (t + t_off)`` at all times; ramps only
    modulate the amplitude. ``ramp_up_start`` is the RF switch-on time t_RF
    and may be ``None`` (RF stays off after the ramp-down).
    """

    omega: float = OMEGA_RF
    u_pp: float = U_PP
    t_off: float = 0.0
    ramp_down_start: float = 0.0
    ramp_down_duration: float = DEFAULT_RF_RAMP
    ramp_up_start: float | None = T_RF
    ramp_up_duration: float = DEFAULT_RF_RAMP
    shape: str = "cosine"

    @property
    def period(self):
        return 2.0 * math.pi / self.omega

    def _ramp(self, s):
        s = np.clip(s, 0.0, 1.0)
        if self.shape == "linear":
            return s
        return 0.5 * (1.0 - np.cos(math.pi * s))

    def amplitude(self, t):
        """Envelope amplitude in V (0 .. u_pp/2); vectorised over ``t``."""
        t = np.asarray(t, dtype=float)
        peak = 0.5 * self.u_pp
        if self.ramp_down_duration > 0:
            down = 1.0 - self._ramp((t - self.ramp_down_start) / self.ramp_down_duration)
        else:
            down = (t < self.ramp_down_start).astype(float)
        env = down
        if self.ramp_up_start is not None:
            if self.ramp_up_duration > 0:
                up = self._ramp((t - self.ramp_up_start) / self.ramp_up_duration)
            else:
                up = (t >= self.ramp_up_start).astype(float)
            env = np.where(t >= self.ramp_up_start, up, down)
        return peak * env

    def phase(self, t):
        return self.omega * (np.asarray(t, dtype=float) + self.t_off)


@dataclass(frozen=True)
class VoltageSchedule:
    """Initial electrode voltages, ordered switch events and the RF program."""

    initial: Mapping[str, float]
    events: tuple = ()
    rf: RfProgram = field(default_factory=RfProgram)
    extraction_electrode: str = "E1"

    def __post_init__(self):
        object.__setattr__(self, "initial", dict(self.initial))
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def electrodes(self):
        names = list(self.initial)
        names += [e.electrode for e in self.events if e.electrode not in names]
        return tuple(names)

    def settled(self):
        """Voltage map after every event has completed."""
        out = dict(self.initial)
        for ev in sorted(self.events, key=lambda e: e.time):
            out[ev.electrode] = ev.target
        return out

    def pulse_on_time(self):
        for ev in self.events:
            if ev.electrode == self.extraction_electrode:
                return ev.time
        return None

    def pulse_off_time(self):
        """Time of the extraction electrode's switch-off (second) event, or ``None``."""
        seen = 0
        for ev in self.events:
            if ev.electrode == self.extraction_electrode:
                seen += 1
                if seen == 2:
                    return ev.time
        return None

    def with_pulse_duration(self, duration):
        """Move every event sharing the pulse-off time to ``pulse_on + duration``."""
        t_on, t_off = self.pulse_on_time(), self.pulse_off_time()
        if t_off is None:
            raise InvalidScheduleError("schedule has no extraction pulse-off event")
        new_time = t_on + duration
        if new_time < 0:
            raise InvalidScheduleError("pulse duration moves switch-off before t=0")
        events = [replace(e, time=new_time) if e.time == t_off else e for e in self.events]
        return replace(self, events=tuple(sorted(events, key=lambda e: e.time)))

    def without_pulse_off(self):
        """Same schedule with the extraction pulse held on indefinitely."""
        t_off = self.pulse_off_time()
        if t_off is None:
            return self
        return replace(self, events=tuple(e for e in self.events if e.time != t_off))

    def with_voltage(self, electrode, volts):
        initial = dict(self.initial)
        initial[electrode] = volts
        return replace(self, initial=initial)

    def with_pulse_voltage(self, electrode, volts):
        """Change the target of ``electrode``'s first (switch-on) event."""
        events = list(self.events)
        for i, ev in enumerate(events):
            if ev.electrode == electrode:
                events[i] = replace(ev, target=volts)
                return replace(self, events=tuple(events))
        raise InvalidScheduleError(f"no event on electrode {electrode!r}")

    def shifted(self, dt):
        """Time-translate every event and RF window by ``dt`` (t_off shifts by -dt)."""
        events = tuple(replace(e, time=e.time + dt) for e in self.events)
        rf = replace(
            self.rf,
            t_off=self.rf.t_off - dt,
            ramp_down_start=self.rf.ramp_down_start + dt,
            ramp_up_start=None if self.rf.ramp_up_start is None else self.rf.ramp_up_start + dt,
        )
        return replace(self, events=events, rf=rf)

    def breakpoints(self, name):
        """Piecewise-linear knots ``(times, volts)`` of one electrode's voltage."""
        v = self.initial.get(name, 0.0)
        times, volts = [0.0], [v]
        for ev in self.events:
            if ev.electrode != name:
                continue
            start = max(ev.time, times[-1])
            times.append(start)
            volts.append(v)
            times.append(max(ev.end, start))
            volts.append(ev.target)
            v = ev.target
        return np.array(times), np.array(volts)

    def voltage_series(self, name, t):
        """Vectorised voltage of one electrode on the time array ``t``."""
        times, volts = self.breakpoints(name)
        t = np.asarray(t, dtype=float)
        return np.interp(t, times, volts)


def voltage_at(schedule: VoltageSchedule, t: float) -> dict:
    """Voltage on every scheduled electrode at time ``t``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return {name: float(schedule.voltage_series(name, t)) for name in schedule.electrodes}


def rf_envelope_at(program: RfProgram, t: float):
    """Return ``(amplitude_V, phase_rad)`` of the RF drive at ``t``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return float(program.amplitude(t)), float(program.phase(t))


def validate_schedule(schedule: VoltageSchedule, stack=None) -> list:
    """List of human-readable violations; empty when the schedule is usable."""
    problems = []
    last = -math.inf
    for i, ev in enumerate(schedule.events):
        if ev.time < 0:
            problems.append(f"events[{i}]: negative time {ev.time!r}")
        if ev.time < last:
            problems.append(f"events[{i}]: events not sorted by time")
        last = ev.time
        if ev.edge_duration < 0:
            problems.append(f"events[{i}]: negative edge duration")
        if not math.isfinite(ev.target):
            problems.append(f"events[{i}]: non-finite target voltage")
    if stack is not None:
        for name in schedule.electrodes:
            if name not in stack.electrodes:
                problems.append(f"unknown electrode {name!r}")
    rf = schedule.rf
    if not rf.omega > 0:
        problems.append("rf.omega must be > 0")
    if rf.u_pp < 0:
        problems.append("rf.u_pp must be >= 0")
    if rf.ramp_down_duration < 0 or rf.ramp_up_duration < 0:
        problems.append("rf ramp durations must be >= 0")
    if rf.shape not in ("cosine", "linear"):
        problems.append(f"rf.shape {rf.shape!r} is not 'cosine' or 'linear'")
    if rf.ramp_up_start is not None and rf.ramp_up_start < rf.ramp_down_start + rf.ramp_down_duration:
        problems.append("rf ramp-up window overlaps the ramp-down window")
    return problems


def baseline_schedule(
    pulse_duration: float = PULSE_DURATION,
    extraction_voltage: float = EXTRACTION_VOLTAGE,
    reflector_voltage: float = REFLECTOR_VOLTAGE,
    edge: float = DEFAULT_EDGE,
    rf: RfProgram | None = None,
) -> VoltageSchedule:
    """Single negative pulse on E1 and F, static trap and reflector voltages."""
    initial = {"seg6": -0.6, "E1": 0.0, "F": 0.0, "E2": 0.0, "R": reflector_voltage}
    events = (
        SwitchEvent(0.0, "E1", extraction_voltage, edge),
        SwitchEvent(0.0, "F", extraction_voltage, edge),
        SwitchEvent(pulse_duration, "E1", 0.0, edge),
        SwitchEvent(pulse_duration, "F", 0.0, edge),
    )
    return VoltageSchedule(initial, events, rf or RfProgram())
