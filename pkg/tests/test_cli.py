import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from loadertwin import io as tio
from loadertwin.cli import CONFIG_ENV, main
from loadertwin.terrain.dig import BucketPose
from samples import sample_result

GOLDEN = Path(__file__).parent / "golden"

SMALL_CONFIG = """
[bed]
extent = [1.5, 0.4]
[terrain]
young_modulus = 5e6
particle_size = 0.08
[dig]
depth = 0.15
push = 0.4
curl = 0.3
lift = 0.2
hold = 0.0
sample_dt = 0.25
[calibration]
budget = 12
"""


@pytest.fixture
def cfg(tmp_path, monkeypatch):
    p = tmp_path / "small.toml"
    p.write_text(SMALL_CONFIG)
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_ik_text_and_json(capsys):
    code, out, _ = run(capsys, "ik", "--theta4", "-0.3", "--height", "150")
    assert code == 0 and "s1" in out
    code, out, _ = run(capsys, "ik", "--theta4", "-0.3", "--height", "150", "--format", "json")
    d = json.loads(out)
    assert d["solution"]["s1"] == pytest.approx(1528.0983924471864, abs=1e-9)


def test_ik_workspace_error_exit_2(capsys):
    code, _, err = run(capsys, "ik", "--theta4", "0", "--height", "99999")
    assert code == 2
    assert "arm angle from blade height" in err


def test_fk_round_trip(capsys):
    code, out, _ = run(capsys, "fk", "--s1", "1528.0983924471864", "--s2", "1302.5083431175597",
                       "--format", "json")
    assert code == 0
    d = json.loads(out)
    assert d["target"]["theta4"] == pytest.approx(-0.3, abs=1e-9)
    assert d["target"]["y_p8"] == pytest.approx(150.0, abs=1e-8)
    code, _, _ = run(capsys, "fk", "--s1", "10", "--s2", "1300")
    assert code == 2


def test_usage_and_config_errors_exit_1(capsys, tmp_path, cfg):
    with pytest.raises(SystemExit) as exc:
        main(["ik", "--theta4", "abc", "--height", "1"])
    assert exc.value.code == 1
    code, _, err = run(capsys, "simulate")
    assert code == 1 and "--config" in err
    code, _, _ = run(capsys, "simulate", "--config", str(tmp_path / "missing.toml"))
    assert code == 1
    bad = tmp_path / "bad.toml"
    bad.write_text("[terrain]\nfriction = -1\n")
    code, _, _ = run(capsys, "simulate", "--config", str(bad))
    assert code == 1
    code, _, err = run(capsys, "simulate", "--config", cfg, "--param", "bogus=1")
    assert code == 1


def test_simulate_is_reproducible(capsys, tmp_path, cfg):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "simulate", "--config", cfg, "--out-dir", str(a))[0] == 0
    assert run(capsys, "simulate", "--config", cfg, "--out-dir", str(b))[0] == 0
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    tr = tio.read_trace_csv(a / "trace.csv")
    assert tr.f.max() > 0


def test_simulate_env_config_and_overrides(capsys, tmp_path, cfg, monkeypatch):
    monkeypatch.setenv(CONFIG_ENV, cfg)
    code, out, _ = run(capsys, "simulate", "--out-dir", str(tmp_path), "--param", "E=1e7",
                       "--param", "mu_r=0.3", "--seed", "1", "--format", "json")
    assert code == 0
    d = json.loads(out)
    assert d["seed"] == 1 and d["samples"] > 2


def test_simulate_above_surface_is_zero(capsys, tmp_path, cfg):
    traj = tmp_path / "air.csv"
    tio.write_trajectory_csv([BucketPose(0.0, 0.3, 0.4, -0.3), BucketPose(0.5, 0.6, 0.5, -0.2)],
                             traj)
    code, _, _ = run(capsys, "simulate", "--config", cfg, "--trajectory", str(traj),
                     "--output", str(tmp_path / "air_trace.csv"))
    assert code == 0
    assert np.all(tio.read_trace_csv(tmp_path / "air_trace.csv").f == 0.0)


def test_simulate_deeper_cut_has_larger_peak(capsys, tmp_path, cfg):
    deep = tmp_path / "deep.toml"
    deep.write_text(SMALL_CONFIG.replace("depth = 0.15", "depth = 0.3"))
    run(capsys, "simulate", "--config", cfg, "--output", str(tmp_path / "s.csv"))
    run(capsys, "simulate", "--config", str(deep), "--output", str(tmp_path / "d.csv"))
    assert (tio.read_trace_csv(tmp_path / "d.csv").f.max()
            > tio.read_trace_csv(tmp_path / "s.csv").f.max())


def test_calibrate_self_and_report(capsys, tmp_path, cfg):
    run(capsys, "simulate", "--config", cfg, "--output", str(tmp_path / "m.csv"))
    out_dir = tmp_path / "fit"
    code, out, _ = run(capsys, "calibrate", "--config", cfg, "--measured", str(tmp_path / "m.csv"),
                       "--out-dir", str(out_dir), "--format", "json")
    assert code == 0
    d = json.loads(out)
    assert d["objective"] == 0.0 and d["converged"]
    for name in ("report.json", "iterations.csv", "measured.csv", "initial.csv", "fitted.csv"):
        assert (out_dir / name).exists()
    code, out, _ = run(capsys, "report", "--config", cfg, "--result", str(out_dir / "report.json"),
                       "--trace", str(out_dir / "measured.csv"), "--no-png",
                       "--out-dir", str(out_dir))
    assert code == 0 and "Terrain parameters" in out
    for name in ("tables.txt", "history.dat", "history.gp", "traces.dat", "traces.gp"):
        assert (out_dir / name).exists()


def test_calibrate_budget_too_small_exit_2(capsys, tmp_path, cfg):
    tio.write_trace_csv(tio.ForceTrace([0.0, 1.0], [1.0, 2.0]), tmp_path / "m.csv")
    code, _, err = run(capsys, "calibrate", "--config", cfg, "--measured",
                       str(tmp_path / "m.csv"), "--budget", "1", "--out-dir", str(tmp_path))
    assert code == 2 and "BudgetTooSmall" in err


def test_gen_synthetic_then_calibrate_from_log(capsys, tmp_path, cfg):
    code, _, _ = run(capsys, "gen-synthetic", "--config", cfg, "--out-dir", str(tmp_path))
    assert code == 0
    log = tio.read_sensor_log(tmp_path / "sensor_log.csv")
    pose, force = tio.extract_traces(log, tio.load_config(cfg))
    ref = tio.read_trace_csv(tmp_path / "sensor_log_force.csv")
    assert np.max(np.abs(force.f - ref.f)) < 1e-9
    code, out, _ = run(capsys, "calibrate", "--config", cfg, "--measured",
                       str(tmp_path / "sensor_log.csv"), "--out-dir", str(tmp_path / "fit"),
                       "--format", "json")
    assert code == 0 and json.loads(out)["objective"] == pytest.approx(0.0, abs=1e-9)


def test_report_golden_tables(capsys, tmp_path, cfg):
    tio.write_report(sample_result(), tmp_path / "r.json")
    code, out, _ = run(capsys, "report", "--config", cfg, "--result", str(tmp_path / "r.json"),
                       "--out-dir", str(tmp_path))
    assert code == 0
    golden = (GOLDEN / "tables.txt").read_text()
    assert out == golden
    assert (tmp_path / "tables.txt").read_text() == golden
    assert (tmp_path / "history.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "loadertwin.cli", "ik", "--theta4", "-0.3",
                        "--height", "150", "--format", "json"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["command"] == "ik"
