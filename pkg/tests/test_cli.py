import json
import time
from pathlib import Path

import pytest

from ionfountain import cli, experiments
from ionfountain.config import load_config, read_toml
from ionfountain.experiments import TrialRecord
from ionfountain.plotting import heatmap, line_plot, plot_csv
from ionfountain.recapture import LOST, RECAPTURED, Outcome

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
BASELINE = CONFIGS / "baseline.toml"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def summary(path):
    return dict(line.split(None, 1) for line in path.read_text().splitlines())


def test_simulate_baseline(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--config", BASELINE, "--out", tmp_path)
    assert code == 0
    s = summary(tmp_path / "summary.txt")
    assert float(s["tof_s"]) == pytest.approx(6.3e-6, abs=0.1e-6)
    assert float(s["z_turn_m"]) == pytest.approx(55e-3, abs=1e-3)
    assert s["verdict"] == RECAPTURED
    assert (tmp_path / "trajectory.csv").read_text().startswith("t_s,z_m,v_mps\n")
    assert "tof_s" in out


def test_outputs_are_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(capsys, "simulate", "--config", BASELINE, "--out", tmp_path / d)[0] == 0
        assert run(capsys, "mc", "--config", BASELINE, "--out", tmp_path / d, "-n", "6", "--seed", "9")[0] == 0
    for name in ("trajectory.csv", "summary.txt", "mc_trials.csv", "mc_report.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_mc_reports_published_fraction(tmp_path, capsys, monkeypatch):
    def stub(scenario, distribution, seed, key, loss=None):
        i = key[-1]
        verdict = RECAPTURED if i < 715 else LOST
        return TrialRecord(i, 0.0, 0.0, Outcome(verdict, 0.0, 0.0, 0.0, 0.0, "pulse-off"))

    monkeypatch.setattr(experiments, "run_trial", stub)
    code, out, _ = run(capsys, "mc", "--config", BASELINE, "--out", tmp_path)
    assert code == 0
    assert "probability 0.951" in out
    assert "[0.933, 0.964]" in out
    assert (tmp_path / "mc_report.txt").read_text() == out


def test_missing_mass_exit_2(tmp_path, capsys):
    text = BASELINE.read_text().replace('mass = "39.96205142009096 u"\n', "")
    cfg = tmp_path / "c.toml"
    cfg.write_text(text)
    code, _, err = run(capsys, "simulate", "--config", cfg, "--out", tmp_path)
    assert code == 2
    payload = json.loads(err)
    assert payload["path"] == "ion.mass" and payload["category"] == "configuration"


def test_bad_dt_flag_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", "--config", BASELINE, "--out", tmp_path, "--dt", "2 V")
    assert code == 2 and json.loads(err)["path"] == "--dt"


def test_missing_config_exit_2(tmp_path, capsys):
    assert run(capsys, "simulate", "--out", tmp_path)[0] == 2
    assert run(capsys, "simulate", "--config", tmp_path / "nope.toml", "--out", tmp_path)[0] == 2


def test_runtime_error_exit_3(tmp_path, capsys):
    text = BASELINE.read_text().replace('reflector_voltage = "7.5 V"', 'reflector_voltage = "-50 V"')
    cfg = tmp_path / "c.toml"
    cfg.write_text(text)
    code, _, err = run(capsys, "simulate", "--config", cfg, "--out", tmp_path)
    assert code == 3
    assert json.loads(err)["category"] == "not-reflected"


def test_window_not_found_exit_3(tmp_path, capsys):
    text = BASELINE.read_text().replace('stop = "6.8 us"', 'stop = "3 us"').replace('start = "5.8 us"', 'start = "1 us"')
    cfg = tmp_path / "c.toml"
    cfg.write_text(text)
    code, _, err = run(capsys, "window", "--config", cfg, "--out", tmp_path)
    assert code == 3 and json.loads(err)["category"] == "window-not-found"


def test_window_command(tmp_path, capsys):
    assert run(capsys, "window", "--config", BASELINE, "--out", tmp_path)[0] == 0
    width = float(summary(tmp_path / "window.txt")["width_s"])
    assert 50e-9 <= width <= 600e-9


def test_env_var_sets_output_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "envout"))
    assert run(capsys, "simulate", "--config", BASELINE)[0] == 0
    assert (tmp_path / "envout" / "trajectory.csv").exists()


def test_calibrate_writes_loadable_config(tmp_path, capsys):
    text = BASELINE.read_text()
    for key in ("reflector_center", "reflector_width"):
        text = "\n".join(l for l in text.splitlines() if not l.startswith(key))
    # start from the uncalibrated template edge
    cfg = tmp_path / "template.toml"
    cfg.write_text(text.replace("[stack]", '[stack]\nreflector_center = "56 mm"\nreflector_width = "3 mm"'))
    assert run(capsys, "calibrate", "--config", cfg, "--out", tmp_path)[0] == 0
    s = summary(tmp_path / "calibration.txt")
    assert float(s["z_turn_m"]) == pytest.approx(55e-3, abs=20e-6)
    loaded = load_config(tmp_path / "calibrated.toml")
    assert loaded.scenario.pulse_duration == pytest.approx(float(s["tof_s"]))
    assert read_toml(tmp_path / "calibrated.toml")["mc"]["seed"] == 2024


def test_steer_command(tmp_path, capsys):
    code, out, _ = run(capsys, "steer", "--config", BASELINE, "--out", tmp_path)
    assert code == 0 and "regions 1" in out
    lines = (tmp_path / "acceptance_map.csv").read_text().splitlines()
    assert lines[0] == "ux_v,uy_v,success" and len(lines) == 161 * 161 + 1


def test_sweep_without_grid_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "sweep", "--config", BASELINE, "--out", tmp_path)
    assert code == 2 and json.loads(err)["path"] == "sweep"


def test_enable_rf_force_changes_tof(tmp_path, capsys):
    text = BASELINE.read_text().replace("enabled = false", 'enabled = true\nscale = "9.457e7 V/m"')
    cfg = tmp_path / "rf.toml"
    cfg.write_text(text)
    assert run(capsys, "simulate", "--config", cfg, "--out", tmp_path)[0] == 0
    tof = float(summary(tmp_path / "summary.txt")["tof_s"])
    assert abs(tof - 6.3e-6) > 1e-9


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_configs_run_quickly(path, tmp_path, capsys):
    cfg = read_toml(path)
    command = "sweep" if "sweep" in cfg else "simulate"
    t0 = time.perf_counter()
    assert run(capsys, command, "--config", path, "--out", tmp_path)[0] == 0
    assert time.perf_counter() - t0 < 60.0


# ---------------------------------------------------------------- plotting

def test_plot_trajectory_deterministic(tmp_path, capsys):
    assert run(capsys, "simulate", "--config", BASELINE, "--out", tmp_path)[0] == 0
    a = plot_csv(tmp_path / "trajectory.csv", tmp_path / "a.svg").read_text()
    b = plot_csv(tmp_path / "trajectory.csv", tmp_path / "b.svg").read_text()
    assert a == b
    assert a.startswith('<?xml version="1.0"') and 'version="1.1"' in a and "<polyline" in a


def test_plot_command(tmp_path, capsys):
    csv = tmp_path / "m.csv"
    csv.write_text("ux_v,uy_v,success\n0.0,0.0,1\n1.0,0.0,0\n0.0,1.0,1\n1.0,1.0,1\n")
    code, out, _ = run(capsys, "plot", csv, "--out", tmp_path / "svg")
    assert code == 0
    assert (tmp_path / "svg" / "m.svg").read_text().count("<rect") == 6


def test_plot_sweep_1d(tmp_path):
    csv = tmp_path / "s.csv"
    csv.write_text("param1,param2,n,k,frac\n1.0,,1,0,0.0\n2.0,,1,1,1.0\n")
    assert "<polyline" in plot_csv(csv).read_text()


def test_plot_rejects_unknown_csv(tmp_path, capsys):
    csv = tmp_path / "x.csv"
    csv.write_text("a,b\n1,2\n")
    assert run(capsys, "plot", csv)[0] == 2


def test_plot_helpers_validate():
    with pytest.raises(ValueError):
        line_plot([], [[]])
    with pytest.raises(ValueError):
        heatmap([0, 1], [0], [[1.0]])
