import math
from pathlib import Path

import numpy as np
import pytest

from loadertwin import io as tio
from loadertwin.errors import (IoError, MissingChannel, MissingColumn, NonMonotoneTime,
                               ParseError, UnitError, ValidationError)
from loadertwin.statics import BucketBody
from loadertwin.terrain.dig import BucketPose
from loadertwin.traces import ForceTrace, PoseTrace
from samples import sample_result

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = Path(__file__).parent / "golden"


# ----------------------------------------------------------------------------
# configuration


def test_shipped_config_is_the_default():
    assert tio.load_config(ROOT / "configs" / "default.toml") == tio.TwinConfig()


def test_config_dump_golden_and_round_trip(tmp_path):
    text = tio.dumps_config(tio.TwinConfig())
    assert text == (GOLDEN / "default_dump.toml").read_text()
    cfg = tio.loads_config(text)
    assert cfg == tio.TwinConfig()
    assert tio.config_fingerprint(cfg) == tio.config_fingerprint(tio.TwinConfig())


def test_config_overrides_and_fingerprint():
    cfg = tio.loads_config("""
[terrain]
young_modulus = 2e7
[simulation]
seed = 3
ensemble = 2
dt = 1e-5
[calibration]
budget = 40
bounds = { friction = [0.5, 0.9] }
""")
    assert cfg.terrain.young_modulus == 2e7 and cfg.seed == 3 and cfg.ensemble == 2
    assert cfg.dt == 1e-5 and cfg.calibration.budget == 40
    assert cfg.calibration.bounds == {"friction": (0.5, 0.9)}
    sc = cfg.scenario()
    assert sc.seeds == (3, 4) and sc.dt == 1e-5
    assert tio.config_fingerprint(cfg) != tio.config_fingerprint(tio.TwinConfig())
    assert tio.loads_config(tio.dumps_config(cfg)) == cfg


@pytest.mark.parametrize("text", [
    "[nonsense]\nx = 1",
    "[terrain]\nyoung = 1",
    "[terrain]\nfriction = -1",
    "schema_version = 2",
    "[calibration]\nbudget = 0",
    "[calibration]\nweights = [0, 0]",
    "[calibration]\nbounds = { friction = [0.8, 0.9] }",
    "[calibration.bounds]\ndensity = [1, 2]",
    "[bed]\nextent = [1.0]",
    "[simulation]\ndt = -1",
    "[mapping.height]\nunit = 'mm'",
    "[mapping.bogus]\ncolumns = ['a']",
    "[geometry]\nl1 = -3",
    "[dig]\nattack = 0.2",
])
def test_config_validation(text):
    with pytest.raises(ValidationError):
        tio.loads_config(text)


def test_config_unit_error():
    with pytest.raises(UnitError):
        tio.loads_config("[mapping.height]\ncolumns = ['h']\nunit = 'furlong'")


def test_config_parse_error_has_location():
    with pytest.raises(ParseError) as exc:
        tio.loads_config("[terrain\nfriction = 1")
    assert exc.value.line == 1


def test_config_missing_file(tmp_path):
    with pytest.raises(IoError):
        tio.load_config(tmp_path / "absent.toml")


# ----------------------------------------------------------------------------
# sensor logs


def _write(path, text):
    path.write_text(text)
    return path


def test_sensor_log_units_and_summed_columns(tmp_path):
    p = _write(tmp_path / "log.csv", "time_ms,h,incl,f1,f2\n0,100,0,1,2\n500,200,90,3,4\n")
    mapping = {"time": tio.Binding("time_ms", "ms"), "height": tio.Binding(["h"], "mm"),
               "inclinometer": tio.Binding(["incl"], "deg"),
               "mp_x": tio.Binding(["f1", "f2"], "kN")}
    log = tio.read_sensor_log(p, mapping)
    assert np.allclose(log.t, [0.0, 0.5])
    assert np.allclose(log.channel("height"), [0.1, 0.2])
    assert np.allclose(log.channel("inclinometer"), [0.0, math.pi / 2])
    assert np.allclose(log.channel("mp_x"), [3000.0, 7000.0])
    with pytest.raises(MissingChannel):
        log.channel("sp_x")


def test_sensor_log_errors(tmp_path):
    p = _write(tmp_path / "a.csv", "t_s,height_mm\n0,1\n0,2\n")
    with pytest.raises(NonMonotoneTime):
        tio.read_sensor_log(p)
    p = _write(tmp_path / "b.csv", "height_mm\n1\n")
    with pytest.raises(MissingColumn):
        tio.read_sensor_log(p)
    p = _write(tmp_path / "c.csv", "t_s,height_mm\n0,abc\n")
    with pytest.raises(ValidationError):
        tio.read_sensor_log(p)
    with pytest.raises(IoError):
        tio.read_sensor_log(tmp_path / "none.csv")
    with pytest.raises(UnitError):
        tio.to_si(np.ones(2), "psi", "pressure")


def test_unit_round_trip():
    v = np.array([1.0, 2.5])
    for q, table in tio.UNITS.items():
        for unit in table:
            assert np.allclose(tio.from_si(tio.to_si(v, unit, q), unit, q), v)


def test_synthetic_log_round_trip(tmp_path):
    t = np.linspace(0.0, 3.0, 7)
    force = ForceTrace(t, [0.0, 10.0, 2500.0, 12000.0, 8000.0, 300.0, 0.0])
    pose = PoseTrace(t, np.linspace(50.0, -600.0, 7), np.linspace(-0.5, 0.4, 7))
    path = tmp_path / "syn.csv"
    tio.write_synthetic_log(path, pose, force, BucketBody())
    got_pose, got_force = tio.extract_traces(tio.read_sensor_log(path), tio.TwinConfig())
    assert np.max(np.abs(got_force.f - force.f)) < 1e-9
    assert np.max(np.abs(got_pose.y_p8 - pose.y_p8)) < 1e-9
    assert np.max(np.abs(got_pose.theta4 - pose.theta4)) < 1e-9
    with pytest.raises(ValidationError):
        tio.write_synthetic_log(path, PoseTrace(t + 1, pose.y_p8, pose.theta4), force,
                                BucketBody())


# ----------------------------------------------------------------------------
# traces, trajectories, reports


def test_trace_csv_exact_round_trip(tmp_path):
    tr = ForceTrace([0.0, 0.1, 1 / 3], [0.0, math.pi, 1e-300], "fitted run")
    tio.write_trace_csv(tr, tmp_path / "t.csv")
    back = tio.read_trace_csv(tmp_path / "t.csv")
    assert np.array_equal(back.t, tr.t) and np.array_equal(back.f, tr.f)
    assert back.label == "fitted_run"
    pt = PoseTrace([0.0, 1.0], [1 / 7, 2.0], [0.1, -0.2])
    tio.write_pose_csv(pt, tmp_path / "p.csv")
    bp = tio.read_pose_csv(tmp_path / "p.csv")
    assert np.array_equal(bp.y_p8, pt.y_p8)


def test_trace_csv_errors(tmp_path):
    p = _write(tmp_path / "bad.csv", "# schema_version=1\nt_s,force_N\n1,0\n0,1\n")
    with pytest.raises(NonMonotoneTime):
        tio.read_trace_csv(p)
    p = _write(tmp_path / "cols.csv", "t_s,f\n0,1\n")
    with pytest.raises(MissingColumn):
        tio.read_trace_csv(p)


def test_trajectory_csv(tmp_path):
    tr = (BucketPose(0.0, 0.1, 0.05, -0.5), BucketPose(0.5, 0.4, -0.2, -0.5))
    tio.write_trajectory_csv(tr, tmp_path / "tr.csv")
    assert tio.read_trajectory_csv(tmp_path / "tr.csv") == tr


def test_report_golden(tmp_path):
    res = sample_result()
    tio.write_report(res, tmp_path / "r.json", tio.TwinConfig())
    assert (tmp_path / "r.json").read_text() == (GOLDEN / "report.json").read_text()
    back, raw = tio.read_report(tmp_path / "r.json")
    assert back.fitted == res.fitted and back.evaluations == 4
    assert math.isinf(back.history[3].objective) and math.isnan(back.history[3].peak_error_pct)
    assert raw["config_fingerprint"] == tio.config_fingerprint(tio.TwinConfig())


def test_iterations_golden(tmp_path):
    tio.write_iterations_csv(sample_result(), tmp_path / "it.csv")
    assert (tmp_path / "it.csv").read_text() == (GOLDEN / "iterations.csv").read_text()


def test_report_errors(tmp_path):
    p = _write(tmp_path / "r.json", "{not json")
    with pytest.raises(ParseError):
        tio.read_report(p)
    p = _write(tmp_path / "s.json", '{"schema_version": 1}')
    with pytest.raises(ValidationError):
        tio.read_report(p)


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(IoError):
        tio.write_trace_csv(ForceTrace([0, 1], [0, 1]), blocker / "x.csv")
