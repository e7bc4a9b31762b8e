"""TOML run configurations with explicit units, validated against a JSON schema."""

from __future__ import annotations

import copy
import json
import math
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import jsonschema
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .constants import ELEMENTARY_CHARGE, IonSpecies
from .dynamics import RfAxialForceModel, SimParams
from .errors import ConfigurationError
from .experiments import BackgroundLoss, InitialDistribution, SweepAxis, SweepGrid
from .fields import ENDCAP_Z, default_stack, load_tabulated_csv
from .recapture import RecaptureCriterion
from .scenario import CALIBRATED_REFLECTOR, Scenario
from .transverse import KINETIC_ENERGY_EV, STEERING_Z, TURN_Z, Aperture, OpticsConfig
from .units import UnitError, parse_quantity
from .waveforms import RfProgram, baseline_schedule


def load_schema():
    text = resources.files("ionfountain").joinpath("data/run_config.schema.json").read_text()
    return json.loads(text)


def _error_path(error):
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "required":
        missing = [k for k in error.validator_value if k not in error.instance]
        if missing:
            parts.append(missing[0])
    elif error.validator == "additionalProperties":
        extra = sorted(set(error.instance) - set(error.schema.get("properties", {})))
        if extra:
            parts.append(extra[0])
    return ".".join(parts) or "<root>"


def validate(raw: dict):
    """Raise :class:`ConfigurationError` naming the first offending field."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        err = errors[0]
        raise ConfigurationError(err.message, _error_path(err))


@dataclass
class RunConfig:
    scenario: Scenario
    distribution: InitialDistribution
    background_loss: BackgroundLoss | None
    mc_n: int
    seed: int
    sweep: SweepGrid | None
    sweep_n_per_cell: int
    sweep_use_distribution: bool
    window: dict
    calibration: dict
    optics: OpticsConfig
    optics_energy_given: bool
    aperture: Aperture
    scan: tuple
    pulse_auto: bool
    raw: dict
    base_dir: Path


class _Section:
    """Typed access to one table; errors carry the dotted field path."""

    def __init__(self, raw, name, label=None):
        self.data = raw.get(name, {})
        self.name = label or name

    def __contains__(self, key):
        return key in self.data

    def q(self, key, dimension, default=None):
        if key not in self.data:
            return default
        try:
            return parse_quantity(self.data[key], dimension)
        except UnitError as exc:
            raise ConfigurationError(str(exc), f"{self.name}.{key}") from None

    def get(self, key, default=None):
        return self.data.get(key, default)


def read_toml(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}", "config") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid TOML: {exc}", "config") from None


def load_config(path) -> RunConfig:
    raw = read_toml(path)
    return build_config(raw, Path(path).resolve().parent)


def build_config(raw: dict, base_dir=Path(".")) -> RunConfig:
    validate(raw)
    base_dir = Path(base_dir)
    ion_s = _Section(raw, "ion")
    mass, charge = ion_s.q("mass", "mass"), ion_s.q("charge", "charge")
    try:
        ion = IonSpecies(mass, charge, ion_s.get("label", "ion"))
    except ValueError as exc:
        raise ConfigurationError(str(exc), "ion") from None

    trap = _Section(raw, "trap")
    omega_z = 2 * math.pi * trap.q("axial_frequency", "frequency", 147e3)
    trap_voltage = trap.q("trap_voltage", "voltage", -0.6)

    st = _Section(raw, "stack")
    center = st.q("reflector_center", "length", CALIBRATED_REFLECTOR[0])
    width = st.q("reflector_width", "length", CALIBRATED_REFLECTOR[1])
    stack = default_stack(ion, omega_z).with_reflector(center, width)
    stack = replace(stack, max_z=st.q("max_z", "length", stack.max_z), min_z=st.q("min_z", "length", stack.min_z))
    for name, rel in st.get("tabulated", {}).items():
        if name not in stack:
            raise ConfigurationError(f"unknown electrode {name!r}", f"stack.tabulated.{name}")
        models = dict(stack.electrodes)
        models[name] = load_tabulated_csv(base_dir / rel)
        stack = replace(stack, electrodes=models)

    rf_s = _Section(raw, "rf")
    t_rf = rf_s.get("t_rf")
    rf = RfProgram(
        omega=2 * math.pi * rf_s.q("frequency", "frequency", 17.85e6),
        u_pp=rf_s.q("u_pp", "voltage", 150.0),
        t_off=rf_s.q("t_off", "time", 0.0),
        ramp_down_start=rf_s.q("ramp_down_start", "time", 0.0),
        ramp_down_duration=rf_s.q("ramp_down_duration", "time", 500e-9),
        ramp_up_start=None if t_rf == "none" else rf_s.q("t_rf", "time", 6.35e-6),
        ramp_up_duration=rf_s.q("ramp_up_duration", "time", 500e-9),
        shape=rf_s.get("shape", "cosine"),
    )

    sc = _Section(raw, "schedule")
    pulse = sc.get("pulse_duration", "auto")
    pulse_auto = pulse == "auto"
    schedule = baseline_schedule(
        pulse_duration=6.3e-6 if pulse_auto else sc.q("pulse_duration", "time"),
        extraction_voltage=sc.q("extraction_voltage", "voltage", -200.0),
        reflector_voltage=sc.q("reflector_voltage", "voltage", 7.5),
        edge=sc.q("edge", "time", 50e-9),
        rf=rf,
    ).with_voltage("seg6", trap_voltage)
    for name in sc.get("voltages", {}):
        if name not in stack:
            raise ConfigurationError(f"unknown electrode {name!r}", f"schedule.voltages.{name}")
        schedule = schedule.with_voltage(name, _Section(sc.data, "voltages", "schedule.voltages").q(name, "voltage"))

    sim_s = _Section(raw, "sim")
    sim = SimParams(
        dt=sim_s.q("dt", "time", 2e-9),
        max_time=sim_s.q("max_time", "time", 20e-6),
        decimation=sim_s.get("decimation", 10),
        z_init=sim_s.q("z_init", "length", 0.0),
        v_init=sim_s.q("v_init", "speed", 0.0),
    )
    rff = _Section(raw, "rf_force")
    rf_force = None
    if rff.get("enabled", False):
        rf_force = RfAxialForceModel(
            rff.q("scale", "field", 0.0), rff.q("center", "length", ENDCAP_Z), rff.q("sigma", "length", 0.4e-3)
        )
    cr = _Section(raw, "criterion")
    bounds = cr.q("max_distance", "length", 100e-6), cr.q("max_speed", "speed", 50.0)
    try:
        criterion = RecaptureCriterion(*bounds, cr.get("mode", "instantaneous"))
    except ValueError as exc:
        raise ConfigurationError(str(exc), "criterion") from None

    scenario = Scenario(stack, schedule, ion, sim, rf_force, criterion, omega_z)

    ds = _Section(raw, "distribution")
    distribution = InitialDistribution(ds.get("kind", "thermal"), ds.q("temperature", "temperature", 0.5e-3))
    bl = _Section(raw, "background_loss")
    loss = None
    if bl.get("enabled", False):
        loss = BackgroundLoss(bl.q("rate", "rate", 1 / 60), bl.q("wait_time", "time", 1.0))
    mc = raw.get("mc", {})

    grid = None
    sw = raw.get("sweep")
    if sw is not None:
        axes = []
        for key in ("axis1", "axis2"):
            if key in sw:
                a = _Section(sw, key, f"sweep.{key}")
                path = a.get("path")
                dim = _path_dimension(path)
                axes.append(SweepAxis(path, a.q("start", dim), a.q("stop", dim), a.q("step", dim)))
        grid = SweepGrid(*axes)

    win = _Section(raw, "window")
    window = {
        "start": win.q("start", "time"), "stop": win.q("stop", "time"),
        "resolution": win.q("resolution", "time", 10e-9), "coarse_step": win.q("coarse_step", "time", 50e-9),
    }
    cal = _Section(raw, "calibration")
    calibration = {
        "target_z_turn": cal.q("target_z_turn", "length", 55e-3),
        "target_tof": cal.q("target_tof", "time", 6.3e-6),
        "tol_z": cal.q("tol_z", "length", 20e-6),
        "tol_tof": cal.q("tol_tof", "time", 2e-9),
        "max_iter": cal.get("max_iter", 100),
    }
    op = _Section(raw, "optics")
    kinetic = op.q("kinetic_energy", "energy")
    optics = OpticsConfig(
        steering_distance=op.q("steering_distance", "length", STEERING_Z - ENDCAP_Z),
        turn_distance=op.q("turn_distance", "length", TURN_Z - ENDCAP_Z),
        reflector_voltage=schedule.initial["R"],
        lens_scale=op.get("lens_scale", 1.0),
        kinetic_energy_ev=KINETIC_ENERGY_EV if kinetic is None else kinetic / ELEMENTARY_CHARGE,
        position_spread=op.q("position_spread", "length", 10e-6),
        angle_spread=op.q("angle_spread", "angle", 3e-3),
    )
    aperture = Aperture(op.q("aperture_radius", "length", 200e-6))
    scan = (op.q("scan_half_range", "voltage", 4.0), op.q("scan_step", "voltage", 0.05))

    return RunConfig(
        scenario, distribution, loss, mc.get("n", 752), mc.get("seed", 0), grid,
        sw.get("n_per_cell", 100) if sw else 100, bool(sw.get("use_distribution", False)) if sw else False,
        window, calibration, optics, kinetic is not None, aperture, scan, pulse_auto, raw, base_dir,
    )


_PATH_DIMENSIONS = {
    "pulse_duration": "time", "rf": "time", "voltage": "voltage", "pulse_voltage": "voltage",
    "reflector": "length", "sim": "time",
}


def _path_dimension(path):
    head = path.split(".")[0]
    if path in ("rf.u_pp",):
        return "voltage"
    if path == "rf_force.scale":
        return "field"
    return _PATH_DIMENSIONS.get(head)


def resolve_pulse(config: RunConfig) -> Scenario:
    """Scenario with ``pulse_duration = "auto"`` replaced by the held-pulse round trip."""
    s = config.scenario
    if config.pulse_auto:
        s = s.with_parameter("pulse_duration", s.round_trip())
    return s


def write_calibrated(raw: dict, center_z, width, tof, path):
    """Copy of ``raw`` with the fitted reflector edge and pulse length, as TOML."""
    out = copy.deepcopy(raw)
    stack = out.setdefault("stack", {})
    stack["reflector_center"] = f"{center_z!r} m"
    stack["reflector_width"] = f"{width!r} m"
    out.setdefault("schedule", {})["pulse_duration"] = f"{tof!r} s"
    with open(path, "wb") as fh:
        tomli_w.dump(out, fh)
