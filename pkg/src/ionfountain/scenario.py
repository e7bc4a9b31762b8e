"""A complete run definition: stack, schedule, ion, integrator and criterion."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .constants import CA40, OMEGA_Z, IonSpecies
from .dynamics import RfAxialForceModel, SimParams, round_trip_time, simulate
from .errors import ConfigurationError, NumericalBlowupError
from .fields import ElectrodeStack, default_stack
from .recapture import LOST, Outcome, RecaptureCriterion, classify, residual_energy
from .waveforms import VoltageSchedule, baseline_schedule

# Reflector edge found by calibrate_reflector for the default stack; shipped
# so that examples and the CLI baseline do not have to recalibrate.
CALIBRATED_REFLECTOR = (0.05263663503545931, 0.0014502577122150345)


@dataclass(frozen=True)
class Scenario:
    stack: ElectrodeStack
    schedule: VoltageSchedule
    ion: IonSpecies = CA40
    sim: SimParams = SimParams()
    rf_force: RfAxialForceModel | None = None
    criterion: RecaptureCriterion = RecaptureCriterion()
    omega_z: float = OMEGA_Z

    def simulate(self, z_init=None, v_init=None, **sim_changes):
        sim = self.sim
        if z_init is not None or v_init is not None or sim_changes:
            sim = replace(
                sim,
                z_init=sim.z_init if z_init is None else z_init,
                v_init=sim.v_init if v_init is None else v_init,
                **sim_changes,
            )
        return simulate(self.stack, self.schedule, self.ion, sim, self.rf_force)

    def outcome(self, z_init=None, v_init=None) -> Outcome:
        """simulate + classify; a numerical blow-up counts as lost and is flagged."""
        try:
            traj = self.simulate(z_init, v_init, stop="pulse-off")
        except NumericalBlowupError as exc:
            state = exc.last_state
            energy, quanta = residual_energy(state, self.ion, self.omega_z)
            return Outcome(LOST, state.z, state.v, energy, quanta, "numerical-blowup", ("numerical-blowup",))
        voltages = None
        if self.criterion.mode == "energy":
            voltages = self.schedule.settled()
        return classify(
            traj.terminal, self.criterion, traj.reason, self.ion, self.omega_z,
            stack=self.stack, voltages=voltages,
        )

    def round_trip(self) -> float:
        return round_trip_time(self.stack, self.schedule, self.ion, self.sim, self.rf_force)

    @property
    def pulse_duration(self):
        return self.schedule.pulse_off_time() - self.schedule.pulse_on_time()

    def with_parameter(self, path: str, value: float) -> "Scenario":
        """Return a copy with one named parameter changed.

        Paths: ``pulse_duration``, ``rf.<field>`` (``rf.t_rf`` is the ramp-up
        start), ``voltage.<electrode>``, ``pulse_voltage.<electrode>``,
        ``stack.<electrode>.<field>``, ``reflector.center_z``,
        ``reflector.width``, ``rf_force.<field>``, ``sim.<field>``,
        ``criterion.<field>``.
        """
        head, _, rest = path.partition(".")
        try:
            if head == "pulse_duration" and not rest:
                return replace(self, schedule=self.schedule.with_pulse_duration(value))
            if head == "rf":
                field_name = {"t_rf": "ramp_up_start"}.get(rest, rest)
                _require_field(self.schedule.rf, field_name, path)
                return replace(self, schedule=replace(self.schedule, rf=replace(self.schedule.rf, **{field_name: value})))
            if head == "voltage":
                self.stack[rest]
                return replace(self, schedule=self.schedule.with_voltage(rest, value))
            if head == "pulse_voltage":
                self.stack[rest]
                return replace(self, schedule=self.schedule.with_pulse_voltage(rest, value))
            if head == "stack":
                name, _, field_name = rest.partition(".")
                _require_field(self.stack[name], field_name, path)
                return replace(self, stack=self.stack.replace_electrode(name, **{field_name: value}))
            if head == "reflector":
                c, w = self.stack.reflector_params()
                if rest == "center_z":
                    return replace(self, stack=self.stack.with_reflector(value, w))
                if rest == "width":
                    return replace(self, stack=self.stack.with_reflector(c, value))
            if head == "rf_force":
                model = self.rf_force or RfAxialForceModel()
                _require_field(model, rest, path)
                return replace(self, rf_force=replace(model, **{rest: value}))
            if head == "sim":
                _require_field(self.sim, rest, path)
                return replace(self, sim=replace(self.sim, **{rest: value}))
            if head == "criterion":
                _require_field(self.criterion, rest, path)
                return replace(self, criterion=replace(self.criterion, **{rest: value}))
        except ConfigurationError as exc:
            raise ConfigurationError(str(exc), path) from None
        raise ConfigurationError("unknown parameter path", path)


def _require_field(obj, name, path):
    if name not in getattr(obj, "__dataclass_fields__", {}):
        raise ConfigurationError("unknown parameter path", path)


def baseline_scenario(calibrated: bool = True, pulse_duration: float | None = None, **schedule_kw) -> Scenario:
    """U_E1 = U_F = -200 V, U_R = 7.5 V, static seg6 trap, dt = 2 ns.

    With ``calibrated=True`` the reflector sits at :data:`CALIBRATED_REFLECTOR`
    and the pulse length defaults to the calibrated round-trip time.
    """
    stack = default_stack()
    if calibrated:
        stack = stack.with_reflector(*CALIBRATED_REFLECTOR)
    schedule = baseline_schedule(**schedule_kw)
    scenario = Scenario(stack, schedule)
    if pulse_duration is None and calibrated:
        pulse_duration = scenario.round_trip()
    if pulse_duration is not None:
        scenario = scenario.with_parameter("pulse_duration", pulse_duration)
    return scenario
