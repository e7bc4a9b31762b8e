"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import optimize
from statistics import NormalDist

from conftest import ACCEPTANCE_LINES
from ionfountain.constants import CA40, OMEGA_RF, OMEGA_Z
from ionfountain.dynamics import IonState, step
from ionfountain.experiments import (
    BackgroundLoss,
    InitialDistribution,
    calibrate_reflector,
    calibrate_rf_force,
    estimate_period,
    find_pulse_window,
    monte_carlo,
    tof_versus_phase,
    wilson_interval,
)
from ionfountain.scenario import baseline_scenario
from ionfountain.transverse import OpticsConfig, acceptance_map

SUITE_START = time.perf_counter()


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def calibrated(template):
    cal = calibrate_reflector(template)
    scenario = replace(template, stack=cal.stack).with_parameter("pulse_duration", cal.tof)
    return cal, scenario


def test_1_baseline_reproduction(calibrated):
    cal, scenario = calibrated
    # independent re-simulation: every step recorded; the turn is the first
    # + to - velocity flip, the return the next - to + flip
    traj = scenario.simulate(stop="max-time", max_time=8e-6, decimation=1)
    v = traj.v
    i_turn = np.flatnonzero((v[:-1] > 0) & (v[1:] <= 0))[0]
    i = i_turn + np.flatnonzero((v[i_turn:-1] < 0) & (v[i_turn + 1:] >= 0))[0]
    tof = traj.t[i] + (traj.t[i + 1] - traj.t[i]) * v[i] / (v[i] - v[i + 1])
    z_turn = traj.z.max()
    timings = []
    for _ in range(3):
        t0 = time.perf_counter()
        scenario.simulate()
        timings.append(time.perf_counter() - t0)
    runtime = min(timings)
    ok = abs(tof - 6.3e-6) < 0.1e-6 and abs(z_turn - 55e-3) < 1e-3 and runtime < 0.1
    report(1, "baseline reproduction", ok,
           f"ToF {tof * 1e6:.4f} us, z_turn {z_turn * 1e3:.3f} mm, {runtime * 1e3:.1f} ms/trajectory")


def test_2_return_at_rest(calibrated):
    _, scenario = calibrated
    details, ok = [], True
    for dt in (2e-9, 1e-9):
        term = scenario.with_parameter("sim.dt", dt).simulate().terminal
        ok &= abs(term.z) < 10e-6 and abs(term.v) < 5.0
        details.append(f"dt={dt * 1e9:g} ns: z={term.z:.2e} m, v={term.v:.2e} m/s")
    report(2, "return at rest", ok, "; ".join(details))


def test_3_pulse_window(calibrated):
    _, scenario = calibrated
    lo, hi = find_pulse_window(scenario, 5.8e-6, 6.8e-6, resolution=10e-9)
    width = hi - lo
    report(3, "pulse window", 50e-9 <= width <= 600e-9,
           f"[{lo * 1e6:.3f}, {hi * 1e6:.3f}] us, width {width * 1e9:.0f} ns")


def test_4_rf_phase_periodicity(calibrated):
    _, scenario = calibrated
    cal = calibrate_rf_force(scenario, target_shift=0.2e-6)
    rf_scenario = scenario.with_parameter("rf_force.scale", cal.scale)
    period_rf = 2 * math.pi / OMEGA_RF
    t_offs = np.arange(0.0, 3.2 * period_rf, 1e-9)
    tofs = tof_versus_phase(rf_scenario, t_offs)
    period = estimate_period(t_offs, tofs, 40e-9, 80e-9)
    ptp = float(np.ptp(tofs))
    ok = abs(period - 56.0e-9) <= 0.5e-9 and ptp > 10e-9
    report(4, "RF-phase periodicity", ok,
           f"E0 {cal.scale:.3g} V/m, mean ToF {cal.mean_tof * 1e6:.3f} us, "
           f"period {period * 1e9:.2f} ns, peak-to-peak {ptp * 1e9:.1f} ns")


def test_5_wilson_oracle():
    k, n = 715, 752
    lo, hi = wilson_interval(k, n, 0.95)
    z = NormalDist().inv_cdf(0.975)
    p_hat = k / n

    def score(p):
        return (p_hat - p) ** 2 - z * z * p * (1 - p) / n

    r_lo = optimize.brentq(score, 1e-12, p_hat, xtol=1e-15)
    r_hi = optimize.brentq(score, p_hat, 1 - 1e-12, xtol=1e-15)
    ok = (
        abs(p_hat - 0.9508) <= 1e-4
        and abs(lo - 0.933) <= 1e-3 and abs(hi - 0.964) <= 1e-3
        and abs(lo - r_lo) < 1e-12 and abs(hi - r_hi) < 1e-12
    )
    report(5, "Wilson interval oracle", ok,
           f"point {p_hat:.4f}, [{lo:.4f}, {hi:.4f}], root-finder [{r_lo:.4f}, {r_hi:.4f}]")


def _convergence_order():
    # switching edges of 48 ns fall on the 4, 2 and 1 ns grids
    scenario = baseline_scenario(pulse_duration=6.304e-6, edge=48e-9)

    def terminal(dt):
        t = scenario.with_parameter("sim.dt", dt).simulate().terminal
        return np.array([t.z * OMEGA_Z, t.v])

    ref = terminal(1e-9 / 16)
    dts = np.array([4e-9, 2e-9, 1e-9])
    errs = np.array([np.linalg.norm(terminal(dt) - ref) for dt in dts])
    return np.polyfit(np.log(dts), np.log(errs), 1)[0]


def _harmonic_drift(periods=20):
    omega = OMEGA_Z
    dt = 2e-9
    period = 2 * math.pi / omega

    def accel(z, t):
        return -omega * omega * z

    state = IonState(0.0, 0.0, 1.0)
    n = int(round(periods * period / dt))
    t = np.empty(n + 1)
    e = np.empty(n + 1)
    for i in range(n + 1):
        t[i], e[i] = state.t, 0.5 * (state.v ** 2 + omega ** 2 * state.z ** 2)
        state = step(state, accel, dt)
    slope = np.polyfit(t / period, e / e[0], 1)[0]
    return abs(slope)


def test_6_integrator_quality():
    drift = _harmonic_drift()
    order = _convergence_order()
    ok = drift < 1e-8 and abs(order - 2.0) <= 0.2
    report(6, "integrator quality", ok, f"energy drift {drift:.2e}/period, convergence order {order:.3f}")


def test_7_steering_map():
    u = np.round(np.arange(-4.0, 4.0 + 1e-9, 0.05), 10)
    retro = OpticsConfig()
    tuned = acceptance_map(u, u, retro)
    detuned = acceptance_map(u, u, retro.detuned(0.97))
    ok = tuned.is_contiguous() and tuned.area > detuned.area and tuned.success[len(u) // 2, len(u) // 2]
    report(7, "steering map", ok,
           f"area {tuned.area:.3f} V^2 (regions {tuned.n_regions()}) vs detuned {detuned.area:.3f} V^2")


def test_8_determinism(calibrated):
    _, scenario = calibrated
    dist = InitialDistribution("thermal", 0.5e-3)
    loss = BackgroundLoss()
    reports = {w: monte_carlo(scenario, dist, 48, seed=7, workers=w, background_loss=loss) for w in (1, 4, 16)}
    base = reports[1]
    same = all(
        r.n_success == base.n_success
        and [(t.z0, t.v0, t.outcome, t.background_lost) for t in r.trials]
        == [(t.z0, t.v0, t.outcome, t.background_lost) for t in base.trials]
        for r in reports.values()
    )
    elapsed = time.perf_counter() - SUITE_START
    report(8, "determinism and runtime", same and elapsed < 300,
           f"{base.n_success}/{base.n_trials} recaptured, trials identical over 1/4/16 workers, suite {elapsed:.1f} s")
