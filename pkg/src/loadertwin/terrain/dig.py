"""Prescribed-motion dig cycles through a particle bed."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import ValidationError
from ..traces import ForceTrace, PoseTrace
from .contact import TerrainParams
from .dem import (DEFAULT_BUCKET, BucketProfile, SimState, advance, compute_forces, fill_bed,
                  stable_dt)

DEFAULT_EXTENT = (6.0, 1.2)  # holds 1969 particles of the default size
DEFAULT_BUCKET_WIDTH = 1.8  # m, configured; only scales the per-depth reaction


@dataclass(frozen=True)
class BucketPose:
    """Blade-tip position (m, bed frame) and bucket pitch (rad) at time ``t``."""

    t: float
    x: float
    y: float
    angle: float


def _as_keyframes(trajectory) -> Tuple[BucketPose, ...]:
    kf = tuple(p if isinstance(p, BucketPose) else BucketPose(*map(float, p)) for p in trajectory)
    if len(kf) < 2:
        raise ValidationError("a trajectory needs at least two poses")
    t = np.array([p.t for p in kf])
    if not np.all(np.isfinite([[p.t, p.x, p.y, p.angle] for p in kf])):
        raise ValidationError("trajectory poses must be finite")
    if np.any(np.diff(t) <= 0):
        raise ValidationError("trajectory times must be strictly increasing")
    return kf


def dig_trajectory(depth=0.6, attack=-0.5, curl=0.9, push=2.0, *, x0=0.1, clearance=0.05,
                   lift=0.9, speed=1.0, hold=1.0, sample_dt=0.5) -> Tuple[BucketPose, ...]:
    """Enter, push, curl-and-lift, carry cycle sampled every ``sample_dt`` seconds.

    The bucket enters along its own floor direction at pitch ``attack``
    (negative: tip down) so only the blade cuts, pushes level at ``depth``
    below the fill line, then gains ``curl`` of pitch while the tip rises to
    ``lift`` above the fill line, and finally carries the load motionless
    for ``hold`` seconds.
    """
    if not (attack < 0 and depth > 0 and push > 0 and speed > 0 and sample_dt > 0
            and hold >= 0):
        raise ValidationError("invalid dig-cycle shape")
    drop = clearance + depth
    run = drop / math.tan(-attack)
    enter = math.hypot(run, drop) / speed
    knots = [
        (0.0, x0, clearance, attack),
        (enter, x0 + run, -depth, attack),
        (enter + push / speed, x0 + run + push, -depth, attack),
        (enter + push / speed + 1.0, x0 + run + push + 0.1, lift, attack + curl),
    ]
    if hold > 0:
        knots.append((knots[-1][0] + hold,) + knots[-1][1:])
    kt = np.array([k[0] for k in knots])
    n = int(math.ceil(kt[-1] / sample_dt - 1e-9))
    t = np.linspace(0.0, kt[-1], n + 1)
    cols = [np.interp(t, kt, [k[c] for k in knots]) for c in (1, 2, 3)]
    return tuple(BucketPose(float(a), float(b), float(c), float(d))
                 for a, b, c, d in zip(t, *cols))


@dataclass(frozen=True)
class DigScenario:
    """Everything a dig run needs besides the soil parameters."""

    trajectory: Tuple[BucketPose, ...] = field(default_factory=dig_trajectory)
    extent: Tuple[float, float] = DEFAULT_EXTENT
    bucket: BucketProfile = DEFAULT_BUCKET
    bucket_width: float = DEFAULT_BUCKET_WIDTH
    seed: int = 0
    ensemble: int = 1  # beds seeded seed, seed + 1, ...; their traces are averaged
    dt: Optional[float] = None  # None: the stability bound of each parameter set
    label: str = "simulated"

    def __post_init__(self):
        object.__setattr__(self, "trajectory", _as_keyframes(self.trajectory))
        if not self.bucket_width > 0:
            raise ValidationError("bucket_width must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValidationError("dt must be positive")
        if int(self.ensemble) != self.ensemble or self.ensemble < 1:
            raise ValidationError("ensemble must be a positive integer")

    @property
    def seeds(self) -> Tuple[int, ...]:
        return tuple(self.seed + k for k in range(int(self.ensemble)))

    def run(self, params: TerrainParams) -> ForceTrace:
        """Ensemble-mean reaction trace of the scenario under ``params``."""
        runs = [run_dig_cycle(self.trajectory, params, s, extent=self.extent, bucket=self.bucket,
                              bucket_width=self.bucket_width, dt=self.dt, label=self.label)
                for s in self.seeds]
        if len(runs) == 1:
            return runs[0]
        return ForceTrace(runs[0].t, np.mean([r.f for r in runs], axis=0), self.label)


def run_dig_cycle(trajectory: Sequence, params: TerrainParams, seed: int, *,
                  extent=DEFAULT_EXTENT, bucket: BucketProfile = DEFAULT_BUCKET,
                  bucket_width: float = DEFAULT_BUCKET_WIDTH, dt: Optional[float] = None,
                  bed: Optional[SimState] = None, blowup_speed: float = 20.0,
                  label: str = "simulated") -> ForceTrace:
    """Drive the bucket through a settled bed and record the soil reaction.

    The bucket pose is interpolated linearly between keyframes.  Each
    keyframe interval is split into equal sub-steps no longer than ``dt``
    (default: the stability bound).  The sample at a keyframe is the
    magnitude of the reaction averaged over the preceding interval, per metre
    of depth, times ``bucket_width``; the first sample is the instantaneous
    reaction at the first pose.
    """
    kf = _as_keyframes(trajectory)
    dt_max = stable_dt(params) if dt is None else float(dt)
    state = fill_bed(extent, params, seed) if bed is None else bed.copy()
    p = kf[0]
    state.bucket = bucket.moved((p.x, p.y, p.angle), (0.0, 0.0, 0.0))
    scale = bucket_width / state.thickness
    samples = [float(np.hypot(*compute_forces(state, params, 0.0).reaction)) * scale]
    for a, b in zip(kf[:-1], kf[1:]):
        span = b.t - a.t
        nsub = max(1, int(math.ceil(span / dt_max - 1e-9)))
        h = span / nsub
        vel = ((b.x - a.x) / span, (b.y - a.y) / span, (b.angle - a.angle) / span)
        state.bucket = bucket.moved((a.x, a.y, a.angle), vel)
        state, acc, _ = advance(state, params, h, nsub, pose_to=(b.x, b.y, b.angle),
                                blowup_speed=blowup_speed)
        samples.append(float(np.hypot(*(acc / nsub))) * scale)
    return ForceTrace([p.t for p in kf], samples, label)


def pose_trace(trajectory, label: str = "trajectory") -> PoseTrace:
    """Blade height (mm above the fill line) and pitch of a bucket trajectory."""
    kf = _as_keyframes(trajectory)
    return PoseTrace([p.t for p in kf], [1000.0 * p.y for p in kf], [p.angle for p in kf], label)
