"""Configuration, sensor logs, traces and reports on disk.

Formats
-------
* Configuration: TOML.  Every section and key is optional; omitted values take
  the defaults of the corresponding dataclass.  Unknown keys are rejected.
  Lengths of the linkage are in mm and its angles in radians; everything on
  the soil side is SI.
* Sensor logs: CSV with a header row.  A mapping binds log columns to roles
  and converts units to SI.
* Traces and iteration tables: CSV whose first line is a ``# schema_version``
  comment.  Reports: JSON with sorted keys and a ``schema_version`` field.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import tomli
import tomli_w

from .calibration import FIELDS, CalibrationProblem, CalibrationResult, Evaluation
from .errors import (ConfigError, IoError, MissingChannel, MissingColumn, NonMonotoneTime,
                     ParseError, TwinError, UnitError, ValidationError)
from .mechanism import LinkageGeometry
from .statics import BucketBody, HingeForces, LoadPin, resultant_from_shears, soil_force_from_hinges
from .terrain.contact import TerrainParams
from .terrain.dem import DEFAULT_BUCKET, BucketProfile
from .terrain.dig import (DEFAULT_BUCKET_WIDTH, DEFAULT_EXTENT, BucketPose, DigScenario,
                          dig_trajectory)
from .traces import ForceTrace, PoseTrace

SCHEMA_VERSION = 1

# ----------------------------------------------------------------------------
# units

# factor to SI per unit, grouped by quantity
UNITS = {
    "time": {"s": 1.0, "ms": 1e-3},
    "pressure": {"Pa": 1.0, "kPa": 1e3, "bar": 1e5, "MPa": 1e6},
    "length": {"m": 1.0, "mm": 1e-3},
    "angle": {"rad": 1.0, "deg": math.pi / 180.0},
    "force": {"N": 1.0, "kN": 1e3},
}

ROLE_QUANTITY = {
    "time": "time",
    "lift_pressure": "pressure",
    "tilt_pressure": "pressure",
    "inclinometer": "angle",
    "encoder_position": "length",
    "height": "length",
    "mp_x": "force", "mp_y": "force",
    "sp_x": "force", "sp_y": "force",
    "mp_x_link": "force", "mp_y_link": "force",
    "sp_x_link": "force", "sp_y_link": "force",
}


def to_si(values, unit: str, quantity: str):
    table = UNITS.get(quantity, {})
    if unit not in table:
        raise UnitError(f"unit {unit!r} is not a {quantity} unit (known: {sorted(table)})")
    if unit == "deg":
        return np.radians(values)
    f = table[unit]
    return values if f == 1.0 else values * f


def from_si(values, unit: str, quantity: str):
    table = UNITS.get(quantity, {})
    if unit not in table:
        raise UnitError(f"unit {unit!r} is not a {quantity} unit (known: {sorted(table)})")
    if unit == "deg":
        return np.degrees(values)
    f = table[unit]
    return values if f == 1.0 else values / f


# ----------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class Binding:
    """Log columns feeding one role; several columns are summed."""

    columns: Tuple[str, ...]
    unit: str

    def __post_init__(self):
        cols = (self.columns,) if isinstance(self.columns, str) else tuple(self.columns)
        if not cols:
            raise ValidationError("a binding needs at least one column")
        object.__setattr__(self, "columns", cols)


# Column layout written by the synthetic-log generator.
SYNTHETIC_MAPPING = {
    "time": Binding(("t_s",), "s"),
    "height": Binding(("height_mm",), "mm"),
    "inclinometer": Binding(("inclinometer_deg",), "deg"),
    "mp_x": Binding(("mp_x_N",), "N"),
    "mp_y": Binding(("mp_y_N",), "N"),
    "sp_x": Binding(("sp_x_N",), "N"),
    "sp_y": Binding(("sp_y_N",), "N"),
}
SYNTHETIC_COLUMNS = ("t_s", "height_mm", "inclinometer_deg", "mp_x_N", "mp_y_N", "sp_x_N",
                     "sp_y_N")


@dataclass(frozen=True)
class PinGeometry:
    length: float = 200.0  # mm
    s1_pin: float = 50.0
    s2_pin: float = 50.0

    def __post_init__(self):
        LoadPin(self.length, self.s1_pin, self.s2_pin)


@dataclass(frozen=True)
class CylinderAreas:
    lift: float = 0.0113  # m^2 piston face, per configured cylinder
    tilt: float = 0.0154

    def __post_init__(self):
        if not (self.lift > 0 and self.tilt > 0):
            raise ValidationError("piston areas must be positive")


@dataclass(frozen=True)
class DigShape:
    depth: float = 0.6
    attack: float = -0.5
    curl: float = 0.9
    push: float = 2.0
    x0: float = 0.1
    clearance: float = 0.05
    lift: float = 0.9
    speed: float = 1.0
    hold: float = 1.0
    sample_dt: float = 0.5

    def __post_init__(self):
        dig_trajectory(**self.__dict__)

    def trajectory(self):
        return dig_trajectory(**self.__dict__)


@dataclass(frozen=True)
class CalibrationSettings:
    weights: Tuple[float, float] = (0.5, 0.5)
    budget: int = 60
    bounds: Dict[str, Tuple[float, float]] = field(default_factory=dict)


@dataclass(frozen=True)
class TwinConfig:
    geometry: LinkageGeometry = field(default_factory=LinkageGeometry)
    pin: PinGeometry = field(default_factory=PinGeometry)
    cylinders: CylinderAreas = field(default_factory=CylinderAreas)
    bucket: BucketProfile = DEFAULT_BUCKET
    bucket_width: float = DEFAULT_BUCKET_WIDTH
    bucket_body: BucketBody = field(default_factory=BucketBody)
    bed_extent: Tuple[float, float] = DEFAULT_EXTENT
    terrain: TerrainParams = field(default_factory=TerrainParams)
    seed: int = 0
    ensemble: int = 1
    dt: Optional[float] = None
    dig: DigShape = field(default_factory=DigShape)
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)
    mapping: Dict[str, Binding] = field(default_factory=lambda: dict(SYNTHETIC_MAPPING))

    def scenario(self, trajectory=None, label="simulated") -> DigScenario:
        return DigScenario(
            trajectory=self.dig.trajectory() if trajectory is None else trajectory,
            extent=self.bed_extent, bucket=self.bucket, bucket_width=self.bucket_width,
            seed=self.seed, ensemble=self.ensemble, dt=self.dt, label=label)

    def problem(self, measured: ForceTrace, trajectory=None, budget=None) -> CalibrationProblem:
        c = self.calibration
        return CalibrationProblem(
            measured=measured, initial=self.terrain, scenario=self.scenario(trajectory),
            bounds=dict(c.bounds), weights=tuple(c.weights),
            budget=c.budget if budget is None else budget)


def _reject_unknown(section: str, data: dict, allowed):
    extra = sorted(set(data) - set(allowed))
    if extra:
        where = f"[{section}]" if section else "top level"
        raise ValidationError(f"unknown key(s) {', '.join(extra)} at {where}")


def _table(data, key):
    v = data.get(key, {})
    if not isinstance(v, dict):
        raise ValidationError(f"[{key}] must be a table")
    return v


def _build(cls, section, data, **overrides):
    names = [f.name for f in fields(cls)]
    _reject_unknown(section, data, names)
    kw = {}
    for k, v in data.items():
        kw[k] = tuple(v) if isinstance(v, list) else v
    kw.update(overrides)
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ValidationError(f"[{section}]: {exc}") from exc


def config_from_dict(data: dict) -> TwinConfig:
    """Validated configuration from parsed TOML data."""
    top = ("schema_version", "geometry", "pin", "cylinders", "bucket", "bed", "terrain",
           "simulation", "dig", "calibration", "mapping")
    _reject_unknown("", data, top)
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {version}")

    geo = dict(_table(data, "geometry"))
    masses = geo.pop("masses", None)
    geometry = _build(LinkageGeometry, "geometry", geo,
                      **({} if masses is None else {"masses": dict(masses)}))

    bucket_t = dict(_table(data, "bucket"))
    _reject_unknown("bucket", bucket_t, ("vertices", "width", "mass"))
    verts = bucket_t.get("vertices")
    bucket = DEFAULT_BUCKET if verts is None else BucketProfile(
        vertices=tuple(tuple(float(c) for c in v) for v in verts))
    body = BucketBody(mass=bucket_t.get("mass", BucketBody().mass))

    bed = _table(data, "bed")
    _reject_unknown("bed", bed, ("extent",))
    extent = tuple(float(v) for v in bed.get("extent", DEFAULT_EXTENT))
    if len(extent) != 2 or not all(v > 0 for v in extent):
        raise ValidationError("bed extent must be two positive lengths")

    sim = _table(data, "simulation")
    _reject_unknown("simulation", sim, ("seed", "dt", "ensemble"))
    dt = sim.get("dt")
    if dt is not None and not dt > 0:
        raise ValidationError("dt must be positive")

    cal = dict(_table(data, "calibration"))
    _reject_unknown("calibration", cal, ("weights", "budget", "bounds"))
    bounds = {}
    for k, v in cal.get("bounds", {}).items():
        if k not in FIELDS:
            raise ValidationError(f"unknown key(s) {k} at [calibration.bounds]")
        if len(v) != 2:
            raise ValidationError(f"bounds for {k} must be [lo, hi]")
        bounds[k] = (float(v[0]), float(v[1]))
    weights = tuple(float(w) for w in cal.get("weights", (0.5, 0.5)))
    if len(weights) != 2 or min(weights) < 0 or sum(weights) == 0:
        raise ValidationError("weights must be two non-negative numbers, not both zero")
    budget = cal.get("budget", CalibrationSettings().budget)
    if not isinstance(budget, int) or budget < 1:
        raise ValidationError("budget must be a positive integer")

    mapping = dict(SYNTHETIC_MAPPING)
    for role, b in _table(data, "mapping").items():
        if role not in ROLE_QUANTITY:
            raise ValidationError(f"unknown key(s) {role} at [mapping]")
        if not isinstance(b, dict):
            raise ValidationError(f"[mapping.{role}] must be a table")
        _reject_unknown(f"mapping.{role}", b, ("columns", "unit"))
        cols = b.get("columns")
        if cols is None:
            raise ValidationError(f"[mapping.{role}] needs columns")
        unit = b.get("unit", next(iter(UNITS[ROLE_QUANTITY[role]])))
        if unit not in UNITS[ROLE_QUANTITY[role]]:
            raise UnitError(f"unit {unit!r} is not a {ROLE_QUANTITY[role]} unit")
        mapping[role] = Binding(cols, unit)

    cfg = TwinConfig(
        geometry=geometry,
        pin=_build(PinGeometry, "pin", _table(data, "pin")),
        cylinders=_build(CylinderAreas, "cylinders", _table(data, "cylinders")),
        bucket=bucket,
        bucket_width=float(bucket_t.get("width", DEFAULT_BUCKET_WIDTH)),
        bucket_body=body,
        bed_extent=extent,
        terrain=_build(TerrainParams, "terrain", _table(data, "terrain")),
        seed=int(sim.get("seed", 0)),
        ensemble=sim.get("ensemble", 1),
        dt=None if dt is None else float(dt),
        dig=_build(DigShape, "dig", _table(data, "dig")),
        calibration=CalibrationSettings(weights=weights, budget=budget, bounds=bounds),
        mapping=mapping,
    )
    if not cfg.bucket_width > 0:
        raise ValidationError("bucket width must be positive")
    # bounds must hold the initial point
    cfg.problem(ForceTrace([0.0, 1.0], [1.0, 1.0]))
    return cfg


def config_to_dict(cfg: TwinConfig) -> dict:
    geo = {}
    for f in fields(LinkageGeometry):
        v = getattr(cfg.geometry, f.name)
        geo[f.name] = dict(sorted(v.items())) if isinstance(v, dict) else (
            list(v) if isinstance(v, tuple) else v)
    out = {
        "schema_version": SCHEMA_VERSION,
        "geometry": geo,
        "pin": dict(cfg.pin.__dict__),
        "cylinders": dict(cfg.cylinders.__dict__),
        "bucket": {"vertices": [list(v) for v in cfg.bucket.vertices],
                   "width": cfg.bucket_width, "mass": cfg.bucket_body.mass},
        "bed": {"extent": list(cfg.bed_extent)},
        "terrain": {f.name: getattr(cfg.terrain, f.name) for f in fields(TerrainParams)},
        "simulation": {"seed": cfg.seed, "ensemble": cfg.ensemble,
                       **({} if cfg.dt is None else {"dt": cfg.dt})},
        "dig": dict(cfg.dig.__dict__),
        "calibration": {"weights": list(cfg.calibration.weights),
                        "budget": cfg.calibration.budget,
                        "bounds": {k: list(v) for k, v in sorted(cfg.calibration.bounds.items())}},
        "mapping": {role: {"columns": list(b.columns), "unit": b.unit}
                    for role, b in sorted(cfg.mapping.items())},
    }
    return out


def dumps_config(cfg: TwinConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def loads_config(text: str) -> TwinConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        raise ParseError(getattr(exc, "msg", str(exc)), line=line, column=col) from exc
    return config_from_dict(data)


def load_config(path) -> TwinConfig:
    """Read and validate a TOML configuration file."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"config is not UTF-8: {exc}") from exc
    return loads_config(text)


def dump_config(cfg: TwinConfig, path) -> None:
    _write_text(path, dumps_config(cfg))


def config_fingerprint(cfg: TwinConfig) -> str:
    return hashlib.sha256(dumps_config(cfg).encode()).hexdigest()


# ----------------------------------------------------------------------------
# sensor logs


@dataclass(frozen=True, eq=False)
class SensorLog:
    t: np.ndarray
    channels: Dict[str, np.ndarray]
    mapping: Dict[str, Binding]

    def __len__(self):
        return len(self.t)

    def channel(self, role: str) -> np.ndarray:
        if role not in self.channels:
            raise MissingChannel(f"sensor log has no {role!r} channel")
        return self.channels[role]


def _parse_float(text, row, col):
    try:
        v = float(text)
    except ValueError:
        raise ValidationError(f"row {row}, column {col!r}: {text!r} is not a number") from None
    if not math.isfinite(v):
        raise ValidationError(f"row {row}, column {col!r}: value is not finite")
    return v


def read_sensor_log(path, mapping: Optional[Dict[str, Binding]] = None) -> SensorLog:
    """Read a CSV sensor log and bind its columns to roles in SI units.

    Roles bound in ``mapping`` whose columns are absent raise MissingColumn,
    except that an absent role simply yields no channel when none of its
    columns exist and the role is not ``time``.
    """
    mapping = dict(SYNTHETIC_MAPPING if mapping is None else mapping)
    if "time" not in mapping:
        raise ValidationError("the mapping needs a time binding")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise IoError(f"cannot read sensor log {path}: {exc}") from exc
    if not rows:
        raise MissingColumn("sensor log has no header row")
    header, body = rows[0], rows[1:]
    index = {name.strip(): k for k, name in enumerate(header)}
    channels = {}
    for role, b in mapping.items():
        if role not in ROLE_QUANTITY:
            raise ValidationError(f"unknown role {role!r}")
        missing = [c for c in b.columns if c not in index]
        if missing:
            if role == "time" or len(missing) < len(b.columns):
                raise MissingColumn(f"column(s) {', '.join(missing)} for {role!r} not in log")
            continue
        total = np.zeros(len(body))
        for c in b.columns:
            k = index[c]
            vals = []
            for r, row in enumerate(body, start=2):
                if k >= len(row):
                    raise ValidationError(f"row {r} is too short")
                vals.append(_parse_float(row[k], r, c))
            total = total + np.array(vals, dtype=float)
        channels[role] = to_si(total, b.unit, ROLE_QUANTITY[role])
    t = channels.pop("time")
    if len(t) and np.any(np.diff(t) <= 0):
        k = int(np.nonzero(np.diff(t) <= 0)[0][0])
        raise NonMonotoneTime(f"time does not increase at data row {k + 2}")
    return SensorLog(t=t, channels=channels, mapping=mapping)


def extract_traces(log: SensorLog, cfg: TwinConfig) -> Tuple[PoseTrace, ForceTrace]:
    """Pose from the height and inclinometer channels; soil force from the pins.

    The pin channels hold the bucket-side groove shears of the two
    instrumented hinges; the bucket is treated as a static free body.
    """
    height = log.channel("height")
    angle = log.channel("inclinometer")
    pose = PoseTrace(log.t, height * 1000.0, angle, label="measured")
    parts = []
    for pin in ("mp", "sp"):
        for ax in ("x", "y"):
            v1 = log.channel(f"{pin}_{ax}")
            v2 = log.channels.get(f"{pin}_{ax}_link", np.zeros_like(v1))
            parts.append(resultant_from_shears(v1, v2, ax)[0])
    mp_x, mp_y, sp_x, sp_y = parts
    body = cfg.bucket_body
    f = np.empty(len(log.t))
    for k in range(len(f)):
        s = soil_force_from_hinges(HingeForces(mp_x[k], mp_y[k], sp_x[k], sp_y[k]), body)
        f[k] = s.magnitude
    return pose, ForceTrace(log.t, f, label="measured")


# share of the soil reaction carried by the main-arm pin in synthetic logs
SYNTHETIC_MP_SHARE = 0.6
SYNTHETIC_FORCE_ANGLE = math.radians(35.0)  # soil force direction above horizontal


def synthetic_hinges(force: np.ndarray, body: BucketBody):
    """Hinge forces that balance a soil force of magnitude ``force``."""
    fx = force * math.cos(SYNTHETIC_FORCE_ANGLE)
    fy = force * math.sin(SYNTHETIC_FORCE_ANGLE)
    k = SYNTHETIC_MP_SHARE
    rest_y = body.weight - fy
    return k * fx, k * rest_y, (1.0 - k) * fx, (1.0 - k) * rest_y


def write_synthetic_log(path, pose: PoseTrace, force: ForceTrace, body: BucketBody) -> None:
    """Sensor log in the documented synthetic layout (``SYNTHETIC_COLUMNS``)."""
    if not np.array_equal(pose.t, force.t):
        raise ValidationError("pose and force traces need the same time base")
    mp_x, mp_y, sp_x, sp_y = synthetic_hinges(force.f, body)
    cols = (pose.t, pose.y_p8, np.degrees(pose.theta4), mp_x, mp_y, sp_x, sp_y)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SYNTHETIC_COLUMNS)
    for row in zip(*cols):
        w.writerow([_fmt(v) for v in row])
    _write_text(path, buf.getvalue())


# ----------------------------------------------------------------------------
# traces and trajectories


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_text(path, text: str) -> None:
    try:
        d = os.path.dirname(os.fspath(path))
        if d:
            os.makedirs(d, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _csv_text(kind, header, rows) -> str:
    buf = _io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION} kind={kind}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _read_csv(path, header):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    meta = {}
    body = []
    for line in lines:
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise MissingColumn(f"{path} has no header row")
    got = [c.strip() for c in rows[0]]
    missing = [c for c in header if c not in got]
    if missing:
        raise MissingColumn(f"{path} lacks column(s) {', '.join(missing)}")
    idx = [got.index(c) for c in header]
    data = np.array([[_parse_float(r[k], n, header[j]) for j, k in enumerate(idx)]
                     for n, r in enumerate(rows[1:], start=2)], dtype=float).reshape(-1, len(header))
    return meta, data


def write_trace_csv(trace: ForceTrace, path) -> None:
    rows = ([_fmt(t), _fmt(f)] for t, f in zip(trace.t, trace.f))
    text = _csv_text("force_trace", ("t_s", "force_N"), rows)
    if trace.label:
        text = text.replace("kind=force_trace", f"kind=force_trace label={_token(trace.label)}", 1)
    _write_text(path, text)


def read_trace_csv(path) -> ForceTrace:
    meta, d = _read_csv(path, ("t_s", "force_N"))
    t = d[:, 0]
    if np.any(np.diff(t) <= 0):
        raise NonMonotoneTime(f"{path}: time does not increase")
    return ForceTrace(t, d[:, 1], meta.get("label", ""))


def _token(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in label)


def write_pose_csv(trace: PoseTrace, path) -> None:
    rows = ([_fmt(a), _fmt(b), _fmt(c)] for a, b, c in zip(trace.t, trace.y_p8, trace.theta4))
    _write_text(path, _csv_text("pose_trace", ("t_s", "y_p8_mm", "theta4_rad"), rows))


def read_pose_csv(path) -> PoseTrace:
    _, d = _read_csv(path, ("t_s", "y_p8_mm", "theta4_rad"))
    return PoseTrace(d[:, 0], d[:, 1], d[:, 2])


TRAJECTORY_COLUMNS = ("t_s", "x_m", "y_m", "angle_rad")


def write_trajectory_csv(trajectory: Sequence[BucketPose], path) -> None:
    rows = ([_fmt(p.t), _fmt(p.x), _fmt(p.y), _fmt(p.angle)] for p in trajectory)
    _write_text(path, _csv_text("trajectory", TRAJECTORY_COLUMNS, rows))


def read_trajectory_csv(path) -> Tuple[BucketPose, ...]:
    _, d = _read_csv(path, TRAJECTORY_COLUMNS)
    if len(d) and np.any(np.diff(d[:, 0]) <= 0):
        raise NonMonotoneTime(f"{path}: time does not increase")
    return tuple(BucketPose(*map(float, r)) for r in d)


# ----------------------------------------------------------------------------
# reports


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def _unnum(v):
    return float(v)


def _params_dict(p: TerrainParams):
    return {f.name: getattr(p, f.name) for f in fields(TerrainParams)}


def result_to_dict(result: CalibrationResult, cfg: Optional[TwinConfig] = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config_fingerprint": None if cfg is None else config_fingerprint(cfg),
        "fitted": _params_dict(result.fitted),
        "initial": _params_dict(result.initial),
        "objective": _num(result.objective),
        "peak_error_pct": _num(result.peak_error_pct),
        "avg_error_pct": _num(result.avg_error_pct),
        "initial_peak_error_pct": _num(result.initial_peak_error_pct),
        "initial_avg_error_pct": _num(result.initial_avg_error_pct),
        "evaluations": result.evaluations,
        "converged": result.converged,
        "weights": list(result.weights),
        "history": [
            {"index": h.index, "objective": _num(h.objective),
             "peak_error_pct": _num(h.peak_error_pct), "avg_error_pct": _num(h.avg_error_pct),
             "params": _params_dict(h.params)}
            for h in result.history
        ],
    }


def result_from_dict(d: dict) -> CalibrationResult:
    try:
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValidationError(f"unsupported report schema_version {d.get('schema_version')}")
        hist = [Evaluation(int(h["index"]), TerrainParams(**h["params"]), _unnum(h["objective"]),
                           _unnum(h["peak_error_pct"]), _unnum(h["avg_error_pct"]))
                for h in d["history"]]
        return CalibrationResult(
            fitted=TerrainParams(**d["fitted"]), objective=_unnum(d["objective"]),
            peak_error_pct=_unnum(d["peak_error_pct"]), avg_error_pct=_unnum(d["avg_error_pct"]),
            initial=TerrainParams(**d["initial"]),
            initial_peak_error_pct=_unnum(d["initial_peak_error_pct"]),
            initial_avg_error_pct=_unnum(d["initial_avg_error_pct"]),
            history=hist, evaluations=int(d["evaluations"]), converged=bool(d["converged"]),
            weights=tuple(d["weights"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed report: {exc}") from exc


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(result: CalibrationResult, path, cfg: Optional[TwinConfig] = None) -> None:
    _write_text(path, dumps_json(result_to_dict(result, cfg)))


def read_report(path) -> Tuple[CalibrationResult, dict]:
    """The result and the raw report dictionary."""
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), line=exc.lineno, column=exc.colno) from exc
    return result_from_dict(d), d


ITERATION_COLUMNS = ("index", "objective", "peak_error_pct", "avg_error_pct") + FIELDS


def write_iterations_csv(result: CalibrationResult, path) -> None:
    rows = ([str(h.index), _fmt(h.objective), _fmt(h.peak_error_pct), _fmt(h.avg_error_pct)]
            + [_fmt(getattr(h.params, n)) for n in FIELDS] for h in result.history)
    _write_text(path, _csv_text("iterations", ITERATION_COLUMNS, rows))
