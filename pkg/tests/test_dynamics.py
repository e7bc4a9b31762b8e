import math

import numpy as np
import pytest

from ionfountain.constants import CA40, OMEGA_Z
from ionfountain.dynamics import (
    ESCAPED,
    MAX_TIME,
    PULSE_OFF,
    IonState,
    RfAxialForceModel,
    SimParams,
    make_accel,
    peak_speed,
    round_trip_time,
    simulate,
    step,
    total_energy,
    turning_point,
)
from ionfountain.errors import ConfigurationError, NotReflectedError, NumericalBlowupError
from ionfountain.fields import default_stack
from ionfountain.waveforms import RfProgram, SwitchEvent, VoltageSchedule

STATIC = VoltageSchedule({"seg6": -0.6}, (), RfProgram(ramp_up_start=None))


def test_free_drift_step():
    s = step(IonState(0.0, 1e-3, 100.0), lambda z, t: 0.0, 2e-9)
    assert s.z == pytest.approx(1e-3 + 200e-9, rel=1e-15)
    assert s.v == 100.0 and s.t == 2e-9


def test_uniform_field_exact():
    a = CA40.q_over_m * 1e4
    assert a == pytest.approx(2.414e10, rel=1e-3)
    s = IonState(0.0, 0.0, 0.0)
    for _ in range(500):
        s = step(s, lambda z, t: a, 2e-9)
    t = s.t
    assert s.v == pytest.approx(a * t, rel=1e-13)
    assert s.z == pytest.approx(0.5 * a * t * t, rel=1e-12)
    assert s.v == pytest.approx(2.414e4, rel=1e-3)
    assert s.z == pytest.approx(1.207e-2, rel=1e-3)


def test_step_blowup_and_bad_dt():
    with pytest.raises(NumericalBlowupError) as err:
        step(IonState(0, 1.0, 0), lambda z, t: math.nan, 1e-9)
    assert err.value.last_state.z == 1.0
    with pytest.raises(ValueError):
        step(IonState(0, 0, 0), lambda z, t: 0.0, 0.0)


def test_harmonic_period_energy():
    w = OMEGA_Z
    s = IonState(0.0, 0.0, 1.0)
    for _ in range(round(2 * math.pi / w / 2e-9)):
        s = step(s, lambda z, t: -w * w * z, 2e-9)
    e = 0.5 * (s.v**2 + w * w * s.z**2)
    assert abs(e - 0.5) / 0.5 < 1e-8


def test_static_trap_equilibrium():
    traj = simulate(default_stack(), STATIC, CA40, SimParams(max_time=5e-6))
    assert traj.reason == MAX_TIME
    assert np.all(traj.z == 0.0) and np.all(traj.v == 0.0)


def test_trap_frequency_from_simulation():
    traj = simulate(default_stack(), STATIC, CA40,
                    SimParams(v_init=0.5, max_time=60e-6, decimation=1, stop="max-time"))
    up = np.flatnonzero((traj.z[:-1] < 0) & (traj.z[1:] >= 0))
    t_cross = traj.t[up] - traj.z[up] * (traj.t[up + 1] - traj.t[up]) / (traj.z[up + 1] - traj.z[up])
    freq = 1.0 / np.mean(np.diff(t_cross))
    assert freq == pytest.approx(147e3, rel=5e-3)


def test_harmonic_amplitude_turning_point():
    v0 = 0.5
    traj = simulate(default_stack(), STATIC, CA40, SimParams(v_init=v0, max_time=5e-6, stop="max-time"))
    z_turn, t_turn = turning_point(traj)
    assert z_turn == pytest.approx(v0 / OMEGA_Z, rel=1e-3)
    assert t_turn == pytest.approx(0.25 * 2 * math.pi / OMEGA_Z, rel=1e-2)


def test_escape_not_reflected():
    # attractive reflector: the ion flies out of the stack
    sched = VoltageSchedule({"seg6": -0.6, "R": -250.0}, (SwitchEvent(0.0, "E1", -200.0), SwitchEvent(0.0, "F", -200.0)),
                            RfProgram(ramp_up_start=None))
    traj = simulate(default_stack(), sched, CA40, SimParams(max_time=20e-6))
    assert traj.reason == ESCAPED and traj.terminal.z > 80e-3
    with pytest.raises(NotReflectedError):
        turning_point(traj)
    with pytest.raises(NotReflectedError):
        round_trip_time(default_stack(), sched, CA40)


def test_invalid_schedule_rejected():
    sched = VoltageSchedule({"E9": 1.0})
    with pytest.raises(ConfigurationError):
        simulate(default_stack(), sched, CA40)


def test_sim_params_validation():
    with pytest.raises(ConfigurationError):
        SimParams(dt=0.0)
    with pytest.raises(ConfigurationError):
        SimParams(stop="sometime")


def test_peak_speed_simple():
    traj = simulate(default_stack(), VoltageSchedule({}), CA40, SimParams(v_init=100.0, max_time=1e-6, stop="max-time"))
    assert peak_speed(traj) == pytest.approx(100.0)


def test_baseline_flight(baseline):
    held = baseline.simulate(stop="return")
    z_turn, t_turn = turning_point(held)
    assert held.t_return == pytest.approx(6.3e-6, abs=0.05e-6)
    assert 54e-3 < z_turn < 62e-3
    assert t_turn == pytest.approx(3.15e-6, abs=0.15e-6)
    vmax = peak_speed(held)
    bound = math.sqrt(2 * CA40.charge * 200.0 / CA40.mass)
    assert bound == pytest.approx(3.11e4, rel=2e-3)
    assert 55e-3 / 3.15e-6 <= vmax <= bound


def test_baseline_terminates_at_pulse_off(baseline):
    traj = baseline.simulate()
    assert traj.reason == PULSE_OFF
    assert traj.terminal.t == pytest.approx(baseline.pulse_duration, abs=1e-15)


def test_time_reversal_symmetry(baseline):
    held = baseline.simulate(stop="return", decimation=1)
    z_turn, t_turn = turning_point(held)
    tau = np.linspace(0.0, t_turn - 60e-9, 300)
    fwd = np.interp(t_turn + tau, held.t, held.z)
    back = np.interp(t_turn - tau, held.t, held.z)
    assert np.max(np.abs(fwd - back)) < 1e-6


def test_return_at_rest(baseline):
    held = baseline.simulate(stop="return", decimation=1)
    i = np.searchsorted(held.t, held.t_return)
    assert abs(held.z[i]) < 1e-6
    assert abs(baseline.simulate().terminal.v) < 1.0


def test_energy_conservation_scales_as_dt_squared(baseline):
    # Verlet energy error is bounded and O(dt^2); with the steep 0.35 mm edges
    # of this stack its size at 2 ns is a few 1e-4 of the peak kinetic energy
    volts = baseline.schedule.without_pulse_off().settled()

    def worst(dt):
        tr = baseline.simulate(stop="max-time", max_time=10e-6, decimation=1, dt=dt)
        m = tr.t >= 60e-9
        e = total_energy(baseline.stack, volts, CA40, tr.z[m], tr.v[m])
        return np.max(np.abs(e - e[0])) / np.max(0.5 * CA40.mass * tr.v[m] ** 2)

    e2, e1 = worst(2e-9), worst(1e-9)
    assert e2 < 1e-3
    assert 3.2 < e2 / e1 < 4.8


def test_energy_conservation_in_trap():
    volts = {"seg6": -0.6}
    tr = simulate(default_stack(), STATIC, CA40, SimParams(v_init=1.0, max_time=10e-6, decimation=1, stop="max-time"))
    e = total_energy(default_stack(), volts, CA40, tr.z, tr.v)
    ke = 0.5 * CA40.mass * tr.v**2
    assert np.max(np.abs(e - e[0])) / ke.max() < 1e-6


def test_fast_path_matches_reference_accel(baseline):
    accel = make_accel(baseline.stack, baseline.schedule, CA40)
    s = IonState(0.0, 0.0, 0.0)
    for _ in range(2000):
        s = step(s, accel, 2e-9)
    traj = baseline.simulate(stop="max-time", max_time=4e-6, decimation=1)
    assert traj.z[2000] == pytest.approx(s.z, rel=1e-10)
    assert traj.v[2000] == pytest.approx(s.v, rel=1e-10)


def test_rf_profile_properties():
    m = RfAxialForceModel(1e7)
    assert m.profile(0.0) == 0.0
    assert abs(m.profile(20e-3)) < 1e-12
    z = np.linspace(-2e-3, 5e-3, 71)
    g = m.scalar_profile()
    assert np.allclose([g(x) for x in z], m.profile(z), atol=1e-15)


def test_rf_force_periodic_in_phase(baseline):
    s = baseline.with_parameter("rf_force.scale", 8e7)
    T = baseline.schedule.rf.period
    a = s.with_parameter("rf.t_off", 10e-9).round_trip()
    b = s.with_parameter("rf.t_off", 10e-9 + T).round_trip()
    assert a == pytest.approx(b, abs=1e-12)


def test_trajectory_csv(tmp_path, baseline):
    traj = baseline.simulate()
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t_s,z_m,v_mps"
    assert len(lines) == len(traj) + 1
    assert np.all(np.diff(traj.t) > 0)
