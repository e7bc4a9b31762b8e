"""Command line: ``ionfountain {simulate,sweep,mc,window,calibrate,steer,plot}``.

Exit status 0 on success, 2 for configuration/schema problems, 3 for
runtime simulation failures. Errors are reported on stderr as one JSON
object with ``category``, ``path`` and ``message``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config, resolve_pulse, write_calibrated
from .dynamics import RfAxialForceModel, turning_point
from .errors import ConfigurationError, FountainError
from .fields import ENDCAP_Z
from .experiments import calibrate_reflector, calibrate_rf_force, find_pulse_window, monte_carlo, sweep
from .plotting import plot_csv
from .transverse import acceptance_map, kinetic_energy_at
from .units import UnitError, parse_quantity

OUT_ENV = "IONFOUNTAIN_OUT"
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--out", type=Path, help=f"output directory (default: ${OUT_ENV} or ./out)")
    common.add_argument("--seed", type=int, help="override mc.seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    common.add_argument("--dt", help='override sim.dt, e.g. "1 ns"')
    common.add_argument("--enable-rf-force", action="store_true",
                        help="enable the axial RF force (calibrated if no scale is configured)")

    p = argparse.ArgumentParser(prog="ionfountain", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="one trajectory plus summary")
    sub.add_parser("sweep", parents=[common], help="parameter grid scan")
    mc = sub.add_parser("mc", parents=[common], help="Monte Carlo recapture probability")
    mc.add_argument("-n", type=int, help="override mc.n")
    sub.add_parser("window", parents=[common], help="pulse-duration acceptance window")
    sub.add_parser("calibrate", parents=[common], help="fit the reflector and write a calibrated config")
    sub.add_parser("steer", parents=[common], help="transverse steering acceptance map")
    plot = sub.add_parser("plot", parents=[common], help="render a produced CSV as SVG")
    plot.add_argument("input", type=Path)
    return p


def _out_dir(args):
    out = args.out or Path(os.environ.get(OUT_ENV, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    if args.config is None:
        raise ConfigurationError("--config is required", "config")
    cfg = load_config(args.config)
    s = cfg.scenario
    if args.dt is not None:
        try:
            s = s.with_parameter("sim.dt", parse_quantity(args.dt, "time"))
        except UnitError as exc:
            raise ConfigurationError(str(exc), "--dt") from None
    if args.enable_rf_force and (s.rf_force is None or s.rf_force.scale == 0):
        scale = calibrate_rf_force(s).scale
        s = replace(s, rf_force=replace(s.rf_force or RfAxialForceModel(), scale=scale))
    cfg.scenario = s
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _summary(path, lines):
    text = "".join(f"{k:<12}{v}\n" for k, v in lines)
    path.write_text(text)
    sys.stdout.write(text)


def cmd_simulate(args):
    cfg = _load(args)
    s = resolve_pulse(cfg)
    out = _out_dir(args)
    held = s.simulate(stop="return")
    z_turn, t_turn = turning_point(held)
    traj = s.simulate()
    traj.to_csv(out / "trajectory.csv")
    o = s.outcome()
    _summary(out / "summary.txt", [
        ("tof_s", repr(held.t_return)),
        ("z_turn_m", repr(z_turn)),
        ("t_turn_s", repr(t_turn)),
        ("pulse_s", repr(s.pulse_duration)),
        ("z_final_m", repr(float(o.z_final))),
        ("v_final_mps", repr(float(o.v_final))),
        ("quanta", repr(float(o.quanta))),
        ("verdict", o.verdict),
    ])


def cmd_sweep(args):
    cfg = _load(args)
    if cfg.sweep is None:
        raise ConfigurationError("config has no [sweep] table", "sweep")
    s = resolve_pulse(cfg)
    dist = cfg.distribution if cfg.sweep_use_distribution else None
    res = sweep(s, cfg.sweep, dist, cfg.sweep_n_per_cell, cfg.seed, args.threads, cfg.background_loss)
    out = _out_dir(args)
    res.to_csv(out / "sweep.csv")
    print(f"cells {res.k.size}  all-success {int(res.success.sum())}  -> {out / 'sweep.csv'}")


def cmd_mc(args):
    cfg = _load(args)
    s = resolve_pulse(cfg)
    n = args.n or cfg.mc_n
    report = monte_carlo(s, cfg.distribution, n, cfg.seed, args.threads, cfg.background_loss)
    out = _out_dir(args)
    report.to_csv(out / "mc_trials.csv")
    (out / "mc_report.txt").write_text(report.summary())
    sys.stdout.write(report.summary())


def cmd_window(args):
    cfg = _load(args)
    s = resolve_pulse(cfg)
    w = cfg.window
    lo, hi = find_pulse_window(s, w["start"], w["stop"], w["resolution"], w["coarse_step"])
    _summary(_out_dir(args) / "window.txt", [("t_lo_s", repr(lo)), ("t_hi_s", repr(hi)), ("width_s", repr(hi - lo))])


def cmd_calibrate(args):
    cfg = _load(args)
    c = cfg.calibration
    cal = calibrate_reflector(cfg.scenario, c["target_z_turn"], c["target_tof"], c["tol_z"], c["tol_tof"], c["max_iter"])
    out = _out_dir(args)
    write_calibrated(cfg.raw, cal.center_z, cal.width, cal.tof, out / "calibrated.toml")
    _summary(out / "calibration.txt", [
        ("center_z_m", repr(cal.center_z)), ("width_m", repr(cal.width)),
        ("z_turn_m", repr(cal.z_turn)), ("tof_s", repr(cal.tof)),
        ("iterations", cal.iterations),
    ])


def cmd_steer(args):
    cfg = _load(args)
    optics = cfg.optics
    if not cfg.optics_energy_given:
        traj = cfg.scenario.simulate(stop="return")
        k = kinetic_energy_at(traj, ENDCAP_Z + optics.steering_distance, cfg.scenario.ion)
        optics = replace(optics, kinetic_energy_ev=k)
    half, step = cfg.scan
    u = np.round(np.arange(-half, half + 0.5 * step, step), 12)
    amap = acceptance_map(u, u, optics, cfg.aperture)
    out = _out_dir(args)
    amap.to_csv(out / "acceptance_map.csv")
    print(f"K {optics.kinetic_energy_ev:.2f} eV  area {amap.area:.4g} V^2  regions {amap.n_regions()}")


def cmd_plot(args):
    out = args.out
    target = (out / args.input.with_suffix(".svg").name) if out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    print(plot_csv(args.input, target))


COMMANDS = {
    "simulate": cmd_simulate, "sweep": cmd_sweep, "mc": cmd_mc, "window": cmd_window,
    "calibrate": cmd_calibrate, "steer": cmd_steer, "plot": cmd_plot,
}


def _report(category, path, message):
    sys.stderr.write(json.dumps({"category": category, "path": path, "message": message}) + "\n")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except ConfigurationError as exc:
        _report(exc.category, exc.path, str(exc))
        return EXIT_CONFIG
    except FountainError as exc:
        _report(exc.category, None, str(exc))
        return EXIT_RUNTIME
    except (ArithmeticError, ValueError, OSError) as exc:
        _report("runtime", None, str(exc))
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
