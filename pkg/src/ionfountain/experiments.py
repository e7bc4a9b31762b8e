"""Sweeps, Monte Carlo, pulse-window search and the calibration drivers.

Random numbers: trial ``i`` of a Monte Carlo run with seed ``s`` draws from
``np.random.default_rng(np.random.SeedSequence(s, spawn_key=(i,)))``; sweep
cell ``c`` uses ``spawn_key=(c, i)``. Each trial draws, in order, the
initial position, the initial velocity and one uniform for the background
loss test, whether or not those are used. Results are therefore fixed by
``(seed, index)`` and independent of how trials are spread over workers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from statistics import NormalDist

import numpy as np
from joblib import Parallel, delayed
from scipy import optimize

from .constants import BOLTZMANN
from .dynamics import SimParams, turning_point
from .errors import (
    CalibrationFailedError,
    ConfigurationError,
    FountainError,
    NotReflectedError,
    WindowNotFoundError,
)
from .recapture import LOST, Outcome
from .scenario import Scenario

# ---------------------------------------------------------------- statistics


def wilson_interval(k: int, n: int, confidence: float = 0.95):
    """Wilson score interval ``(lo, hi)`` for ``k`` successes in ``n`` trials."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    z = NormalDist().inv_cdf(0.5 + 0.5 * confidence)
    p = k / n
    z2n = z * z / n
    centre = (p + 0.5 * z2n) / (1.0 + z2n)
    half = z * math.sqrt(p * (1.0 - p) / n + 0.25 * z2n / n) / (1.0 + z2n)
    # at k = 0 and k = n one root is exactly 0 or 1; avoid rounding residue
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


# ---------------------------------------------------------------- sampling


@dataclass(frozen=True)
class InitialDistribution:
    """``delta`` (start at rest at the trap centre) or ``thermal`` at ``temperature``.

    Thermal draws are Gaussian with ``sigma_v = sqrt(k_B T / m)`` and
    ``sigma_z = sigma_v / omega_z``.
    """

    kind: str = "delta"
    temperature: float = 0.5e-3

    def __post_init__(self):
        if self.kind not in ("delta", "thermal"):
            raise ConfigurationError(f"unknown distribution {self.kind!r}", "distribution.kind")
        if not self.temperature >= 0:
            raise ConfigurationError("temperature must be >= 0", "distribution.temperature")

    def widths(self, mass, omega_z):
        if self.kind == "delta":
            return 0.0, 0.0
        sigma_v = math.sqrt(BOLTZMANN * self.temperature / mass)
        return sigma_v / omega_z, sigma_v

    def draw(self, rng, mass, omega_z):
        sz, sv = self.widths(mass, omega_z)
        return float(rng.normal(0.0, 1.0)) * sz, float(rng.normal(0.0, 1.0)) * sv


@dataclass(frozen=True)
class BackgroundLoss:
    """Per-trial loss probability ``rate * wait_time`` applied after the dynamics."""

    rate: float = 1.0 / 60.0
    wait_time: float = 1.0

    def __post_init__(self):
        if self.rate < 0 or self.wait_time < 0:
            raise ConfigurationError("loss rate and wait time must be >= 0", "background_loss")
        if self.probability > 1:
            raise ConfigurationError("loss probability rate*wait_time exceeds 1", "background_loss")

    @property
    def probability(self):
        return self.rate * self.wait_time


def trial_rng(seed: int, *key: int):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


@dataclass(frozen=True)
class TrialRecord:
    index: int
    z0: float
    v0: float
    outcome: Outcome
    background_lost: bool = False

    @property
    def success(self):
        return self.outcome.recaptured and not self.background_lost


def run_trial(scenario: Scenario, distribution, seed, key, loss=None) -> TrialRecord:
    rng = trial_rng(seed, *key)
    z0, v0 = distribution.draw(rng, scenario.ion.mass, scenario.omega_z)
    u = float(rng.random())
    outcome = scenario.outcome(scenario.sim.z_init + z0, scenario.sim.v_init + v0)
    lost = bool(loss is not None and outcome.recaptured and u < loss.probability)
    return TrialRecord(key[-1], z0, v0, outcome, lost)


def _run_chunk(scenario, distribution, seed, keys, loss):
    return [run_trial(scenario, distribution, seed, k, loss) for k in keys]


def _map_trials(scenario, distribution, seed, keys, loss, workers):
    keys = list(keys)
    if workers == 1 or len(keys) < 2:
        return _run_chunk(scenario, distribution, seed, keys, loss)
    n_chunks = min(len(keys), 4 * workers)
    chunks = [keys[i::n_chunks] for i in range(n_chunks)]
    parts = Parallel(n_jobs=workers)(
        delayed(_run_chunk)(scenario, distribution, seed, c, loss) for c in chunks
    )
    # undo the round-robin split so records come back in key order
    out = [None] * len(keys)
    for i, part in enumerate(parts):
        out[i::n_chunks] = part
    return out


# ---------------------------------------------------------------- Monte Carlo


@dataclass
class MonteCarloReport:
    n_trials: int
    n_success: int
    point: float
    interval: tuple
    seed: int
    confidence: float = 0.95
    trials: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not 0 <= self.n_success <= self.n_trials:
            raise ValueError("need 0 <= n_success <= n_trials")

    @classmethod
    def from_trials(cls, trials, seed, confidence=0.95):
        n = len(trials)
        k = sum(t.success for t in trials)
        return cls(n, k, k / n, wilson_interval(k, n, confidence), seed, confidence, list(trials))

    def summary(self):
        lo, hi = self.interval
        return (
            f"trials      {self.n_trials}\n"
            f"recaptured  {self.n_success}\n"
            f"probability {self.point:.3f}\n"
            f"wilson {100 * self.confidence:g}%  [{lo:.3f}, {hi:.3f}]\n"
            f"seed        {self.seed}\n"
        )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trial", "z0_m", "v0_mps", "verdict", "z_final_m", "v_final_mps",
                             "quanta", "reason", "background_lost", "flags"])
            for t in self.trials:
                o = t.outcome
                verdict = o.verdict if not t.background_lost else LOST
                writer.writerow([t.index, repr(t.z0), repr(t.v0), verdict, repr(float(o.z_final)),
                                 repr(float(o.v_final)), repr(float(o.quanta)), o.reason,
                                 int(t.background_lost), ";".join(o.flags)])


def monte_carlo(
    scenario: Scenario,
    distribution: InitialDistribution = InitialDistribution("thermal"),
    n: int = 752,
    seed: int = 0,
    workers: int = 1,
    background_loss: BackgroundLoss | None = None,
    confidence: float = 0.95,
) -> MonteCarloReport:
    """``n`` independent draws, each simulated and classified."""
    if n < 1:
        raise ValueError("n must be >= 1")
    keys = [(i,) for i in range(n)]
    trials = _map_trials(scenario, distribution, seed, keys, background_loss, workers)
    return MonteCarloReport.from_trials(trials, seed, confidence)


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepAxis:
    path: str
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigurationError("step must be > 0", f"grid.{self.path}.step")
        if not self.start < self.stop:
            raise ConfigurationError("start must be < stop", f"grid.{self.path}.start")

    @property
    def values(self):
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(n)


@dataclass(frozen=True)
class SweepGrid:
    axis1: SweepAxis
    axis2: SweepAxis | None = None

    @property
    def axes(self):
        return (self.axis1,) if self.axis2 is None else (self.axis1, self.axis2)

    @property
    def shape(self):
        return tuple(len(a.values) for a in self.axes)

    def cells(self):
        """``(index, values)`` pairs, axis 1 varying slowest."""
        grids = np.meshgrid(*[a.values for a in self.axes], indexing="ij")
        flat = [g.ravel() for g in grids]
        return [(i, tuple(float(f[i]) for f in flat)) for i in range(flat[0].size)]

    def validate(self, scenario: Scenario):
        for axis in self.axes:
            scenario.with_parameter(axis.path, float(axis.values[0]))

    def apply(self, scenario, values):
        for axis, v in zip(self.axes, values):
            scenario = scenario.with_parameter(axis.path, v)
        return scenario


@dataclass
class SweepResult:
    grid: SweepGrid
    n: np.ndarray
    k: np.ndarray
    records: list = field(repr=False, default_factory=list)

    @property
    def fraction(self):
        return self.k / self.n

    @property
    def success(self):
        return self.k == self.n

    def to_csv(self, path):
        two = self.grid.axis2 is not None
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["param1", "param2", "n", "k", "frac"])
            for idx, values in self.grid.cells():
                pos = np.unravel_index(idx, self.grid.shape)
                n, k = int(self.n[pos]), int(self.k[pos])
                writer.writerow([repr(values[0]), repr(values[1]) if two else "", n, k, repr(k / n)])


def _run_cell(scenario, grid, values, distribution, n, seed, cell, loss):
    try:
        cell_scenario = grid.apply(scenario, values)
    except FountainError as exc:
        raise ConfigurationError(str(exc), "grid") from exc
    return [run_trial(cell_scenario, distribution, seed, (cell, i), loss) for i in range(n)]


def sweep(
    scenario: Scenario,
    grid: SweepGrid,
    distribution: InitialDistribution | None = None,
    n_per_cell: int = 100,
    seed: int = 0,
    workers: int = 1,
    background_loss: BackgroundLoss | None = None,
) -> SweepResult:
    """Simulate and classify every grid cell.

    Without a distribution each cell is a single deterministic run from the
    scenario's initial state; with one, ``n_per_cell`` seeded trials.
    """
    grid.validate(scenario)
    n = 1 if distribution is None else n_per_cell
    dist = distribution or InitialDistribution("delta")
    cells = grid.cells()
    jobs = (delayed(_run_cell)(scenario, grid, v, dist, n, seed, i, background_loss) for i, v in cells)
    if workers == 1:
        results = [_run_cell(scenario, grid, v, dist, n, seed, i, background_loss) for i, v in cells]
    else:
        results = Parallel(n_jobs=workers)(jobs)
    counts = np.full(grid.shape, n)
    wins = np.array([sum(t.success for t in r) for r in results]).reshape(grid.shape)
    return SweepResult(grid, counts, wins, results)


# ---------------------------------------------------------------- pulse window


def find_pulse_window(
    scenario: Scenario,
    start: float | None = None,
    stop: float | None = None,
    resolution: float = 10e-9,
    coarse_step: float = 50e-9,
):
    """``(t_lo, t_hi)``: earliest and latest pulse duration giving a recapture.

    A coarse scan locates successes; each edge is then bisected against its
    failing neighbour until the bracket is below ``resolution``. The default
    range is the round-trip time +- 1 us.
    """
    if start is None or stop is None:
        centre = scenario.round_trip()
        start = centre - 1e-6 if start is None else start
        stop = centre + 1e-6 if stop is None else stop
    if not stop > start:
        raise ValueError("scan range must have stop > start")

    def ok(t):
        return scenario.with_parameter("pulse_duration", t).outcome().recaptured

    n = max(2, int(math.ceil((stop - start) / coarse_step)) + 1)
    ts = np.linspace(start, stop, n)
    hits = [ok(t) for t in ts]
    idx = np.flatnonzero(hits)
    if idx.size == 0:
        raise WindowNotFoundError(f"no recapture for pulse durations in [{start:.4g}, {stop:.4g}] s")

    def edge(bad, good):
        while abs(good - bad) > resolution:
            mid = 0.5 * (bad + good)
            if ok(mid):
                good = mid
            else:
                bad = mid
        return good

    i_lo, i_hi = int(idx[0]), int(idx[-1])
    t_lo = ts[i_lo] if i_lo == 0 else edge(ts[i_lo - 1], ts[i_lo])
    t_hi = ts[i_hi] if i_hi == n - 1 else edge(ts[i_hi + 1], ts[i_hi])
    return float(t_lo), float(t_hi)


# ---------------------------------------------------------------- calibration


@dataclass
class ReflectorCalibration:
    stack: object
    center_z: float
    width: float
    z_turn: float
    tof: float
    residuals: tuple
    iterations: int
    converged: bool


def measure_reflection(scenario: Scenario):
    """``(z_turn, tof)`` of the held-pulse round trip."""
    traj = scenario.simulate(stop="return")
    if traj.t_return is None:
        raise NotReflectedError(f"ion did not return (terminated: {traj.reason})")
    z_turn, _ = turning_point(traj)
    return z_turn, traj.t_return


def calibrate_reflector(
    scenario: Scenario,
    target_z_turn: float = 55e-3,
    target_tof: float = 6.3e-6,
    tol_z: float = 20e-6,
    tol_tof: float = 2e-9,
    max_iter: int = 100,
) -> ReflectorCalibration:
    """Fit the reflector edge (centre, width) so the ion turns at ``target_z_turn``
    and is back at the start after ``target_tof``.

    Broyden (secant) iteration in ``(center_z, log width)`` with a finite
    difference starting Jacobian, step capping and backtracking. Returns the
    input stack unchanged when it already meets the tolerances.
    """
    stack = scenario.stack
    if target_z_turn >= stack.max_z:
        raise CalibrationFailedError(
            f"target turning point {target_z_turn:.4g} m is beyond max_z={stack.max_z:.4g} m"
        )
    scales = np.array([1e-3, 1e-7])
    target = np.array([target_z_turn, target_tof])
    tol = np.array([tol_z, tol_tof]) / scales

    def evaluate(p):
        c, w = p[0], math.exp(p[1])
        try:
            s = replace(scenario, stack=stack.with_reflector(c, w))
            zt, tof = measure_reflection(s)
        except FountainError:
            return None
        return (np.array([zt, tof]) - target) / scales, zt, tof

    c0, w0 = stack.reflector_params()
    p = np.array([c0, math.log(w0)])
    res = evaluate(p)
    if res is None:
        raise CalibrationFailedError("template reflector does not reflect the ion")
    best = (p.copy(), res)
    iterations = 0

    def result(p, res, converged):
        c, w = float(p[0]), float(math.exp(p[1]))
        out_stack = stack if iterations == 0 else stack.with_reflector(c, w)
        return ReflectorCalibration(out_stack, c, w, res[1], res[2], tuple(res[0] * scales),
                                    iterations, converged)

    def jacobian(p, r):
        h = np.array([0.2e-3, 0.05])
        J = np.empty((2, 2))
        for j in range(2):
            q = p.copy()
            q[j] += h[j]
            rq = evaluate(q)
            if rq is None:
                q[j] = p[j] - h[j]
                rq = evaluate(q)
                if rq is None:
                    raise CalibrationFailedError("reflection lost near the current point", result(p, res, False))
                J[:, j] = (r - rq[0]) / h[j]
            else:
                J[:, j] = (rq[0] - r) / h[j]
        return J

    max_step = np.array([5e-3, 0.5])
    J = None
    while iterations < max_iter:
        r = res[0]
        if np.all(np.abs(r) < tol):
            return result(p, res, True)
        if J is None:
            J = jacobian(p, r)
        iterations += 1
        try:
            dp = -np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            J = None
            continue
        dp *= min(1.0, float(np.min(max_step / np.maximum(np.abs(dp), 1e-300))))
        accepted = None
        for _ in range(8):
            new = evaluate(p + dp)
            if new is not None and np.linalg.norm(new[0]) < np.linalg.norm(r):
                accepted = new
                break
            dp *= 0.5
        if accepted is None:
            J = None  # fresh finite-difference Jacobian on the next pass
            if iterations >= max_iter:
                break
            continue
        # Broyden rank-one update
        dr = accepted[0] - r
        J = J + np.outer(dr - J @ dp, dp) / float(dp @ dp)
        p = p + dp
        res = accepted
        if np.linalg.norm(res[0]) < np.linalg.norm(best[1][0]):
            best = (p.copy(), res)
    if np.all(np.abs(res[0]) < tol):
        return result(p, res, True)
    raise CalibrationFailedError(
        f"reflector calibration did not converge in {max_iter} iterations",
        result(best[0], best[1], False),
    )


def without_rf_switch_on(scenario: Scenario) -> Scenario:
    return scenario.with_parameter("rf.ramp_up_start", None)


def mean_tof_over_phase(scenario: Scenario, n_phases: int = 8) -> float:
    """Round-trip time averaged over ``n_phases`` evenly spaced RF phase offsets."""
    period = scenario.schedule.rf.period
    tofs = [scenario.with_parameter("rf.t_off", k * period / n_phases).round_trip() for k in range(n_phases)]
    return float(np.mean(tofs))


@dataclass
class RfForceCalibration:
    scale: float
    mean_tof: float
    reference_tof: float


def calibrate_rf_force(
    scenario: Scenario,
    target_shift: float = 0.2e-6,
    n_phases: int = 8,
    bracket=(1e6, 1e9),
    tol: float = 2e-9,
) -> RfForceCalibration:
    """Field scale E0 (V/m) whose phase-averaged round-trip delay is ``target_shift``.

    The delay is measured with the RF switch-on removed, so that only the
    decaying drive at extraction acts. Root found with Brent's method in
    ``log E0``.
    """
    base = without_rf_switch_on(replace(scenario, rf_force=None))
    reference = base.round_trip()

    def shift(log_e0):
        s = base.with_parameter("rf_force.scale", math.exp(log_e0))
        try:
            return mean_tof_over_phase(s, n_phases) - reference - target_shift
        except NotReflectedError:
            return math.inf

    lo, hi = (math.log(b) for b in bracket)
    f_lo, f_hi = shift(lo), shift(hi)
    if not (f_lo < 0 < f_hi):
        raise CalibrationFailedError(
            f"RF force bracket {bracket} does not straddle a {target_shift:.3g} s shift"
        )
    root = optimize.brentq(shift, lo, hi, xtol=1e-4, maxiter=100)
    scale = math.exp(root)
    achieved = mean_tof_over_phase(base.with_parameter("rf_force.scale", scale), n_phases)
    if abs(achieved - reference - target_shift) > tol:
        raise CalibrationFailedError("RF force calibration missed its tolerance",
                                     RfForceCalibration(scale, achieved, reference))
    return RfForceCalibration(scale, achieved, reference)


def _tof_at(scenario, t_off):
    return scenario.with_parameter("rf.t_off", t_off).round_trip()


def tof_versus_phase(scenario: Scenario, t_offs, workers: int = 1) -> np.ndarray:
    """Round-trip time for each RF phase offset ``t_off`` (s)."""
    if workers == 1:
        return np.array([_tof_at(scenario, float(t)) for t in t_offs])
    return np.array(Parallel(n_jobs=workers)(delayed(_tof_at)(scenario, float(t)) for t in t_offs))


def estimate_period(t, y, p_min, p_max, n_grid=400):
    """Shift ``P`` in ``[p_min, p_max]`` minimising the mismatch between y(t) and y(t + P).

    ``t`` must be uniformly spaced. The cost is the mean squared difference
    over the overlap, with ``y(t + P)`` linearly interpolated; the grid
    minimum is refined with a parabola.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t[-1] - t[0] <= p_max:
        raise ValueError("samples must span more than p_max")

    def cost(P):
        mask = t + P <= t[-1]
        d = np.interp(t[mask] + P, t, y) - y[mask]
        return float(np.mean(d * d))

    grid = np.linspace(p_min, p_max, n_grid)
    costs = np.array([cost(P) for P in grid])
    i = int(np.argmin(costs))
    if 0 < i < n_grid - 1:
        c0, c1, c2 = costs[i - 1 : i + 2]
        denom = c0 - 2 * c1 + c2
        if denom > 0:
            return float(grid[i] + 0.5 * (c0 - c2) / denom * (grid[1] - grid[0]))
    return float(grid[i])
