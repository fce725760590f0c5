"""Two-dimensional discrete-element soil bed.

Particles are disks in a slab one particle diameter thick, so a disk weighs
as much as a cylinder of length ``d`` and the sphere-contact Hertz law stays
dimensionally consistent.  The bucket reaction is reported per metre of
depth (summed contact force divided by the slab thickness).  The bed sits in
a box: a floor at ``-depth`` and side walls at ``0`` and ``width``; the
nominal free surface is ``y = 0``.  A rigid bucket polyline moves through
the bed under prescribed motion and collects the reaction of every particle
it touches.

Integration is symplectic Euler with a fixed iteration order, so a state,
time step and parameter set always produce the same successor bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from ..errors import ExtentTooSmall, UnstableStep, ValidationError
from . import _kernels
from .contact import TerrainParams, restitution_damping

GRAVITY = 9.80665
RADIUS_JITTER = 0.10
NEIGHBOUR_SKIN = 0.4  # in units of the largest radius


def _self_intersects(v):
    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    n = len(v) - 1
    for i in range(n):
        for j in range(i + 2, n):
            p1, p2, q1, q2 = v[i], v[i + 1], v[j], v[j + 1]
            d1, d2 = cross(q1, q2, p1), cross(q1, q2, p2)
            d3, d4 = cross(p1, p2, q1), cross(p1, p2, q2)
            if d1 * d2 < 0 and d3 * d4 < 0:
                return True
    return False


@dataclass(frozen=True)
class BucketProfile:
    """Bucket cross-section as a polyline in its own frame (m).

    The local origin is the blade tip.  ``pose`` is ``(x, y, angle)`` of that
    frame in the bed; ``pose_vel`` its velocity ``(vx, vy, omega)``.
    """

    vertices: Tuple[Tuple[float, float], ...]
    pose: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    pose_vel: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] != 2:
            raise ValidationError("bucket profile needs at least two 2D vertices")
        if np.any(np.hypot(*np.diff(v, axis=0).T) == 0):
            raise ValidationError("bucket profile has a zero-length segment")
        if _self_intersects(v):
            raise ValidationError("bucket profile intersects itself")

    def world_vertices(self) -> np.ndarray:
        x, y, a = self.pose
        c, s = math.cos(a), math.sin(a)
        v = np.asarray(self.vertices, dtype=float)
        return np.column_stack((x + c * v[:, 0] - s * v[:, 1], y + s * v[:, 0] + c * v[:, 1]))

    def moved(self, pose, pose_vel=None) -> "BucketProfile":
        return replace(self, pose=tuple(pose),
                       pose_vel=self.pose_vel if pose_vel is None else tuple(pose_vel))


DEFAULT_BUCKET = BucketProfile(vertices=((-0.93, 0.93), (-1.17, 0.60), (-1.17, 0.225),
                                         (-0.93, 0.0), (0.0, 0.0)))


@dataclass
class SimState:
    pos: np.ndarray
    vel: np.ndarray
    omega: np.ndarray
    radius: np.ndarray
    mass: np.ndarray
    width: float  # box width (m)
    depth: float  # floor at -depth
    seed: int
    thickness: float  # slab thickness (m)
    bucket: Optional[BucketProfile] = None
    time: float = 0.0
    reaction: np.ndarray = field(default_factory=lambda: np.zeros(2))
    reaction_torque: float = 0.0
    contact_keys: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    contact_springs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    # diagnostics of the last force evaluation
    internal_force_sum: np.ndarray = field(default_factory=lambda: np.zeros(2))
    max_contact_force: float = 0.0
    # cached candidate pairs (i, j, reference positions); never mutated in place
    neighbours: Optional[tuple] = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.radius)

    @property
    def inertia(self) -> np.ndarray:
        return 0.5 * self.mass * self.radius ** 2

    def copy(self) -> "SimState":
        return replace(self, pos=self.pos.copy(), vel=self.vel.copy(), omega=self.omega.copy(),
                       radius=self.radius.copy(), mass=self.mass.copy(),
                       reaction=self.reaction.copy(), contact_keys=self.contact_keys.copy(),
                       contact_springs=self.contact_springs.copy(),
                       internal_force_sum=self.internal_force_sum.copy())

    def kinetic_energy(self) -> float:
        return float(0.5 * np.sum(self.mass * np.sum(self.vel ** 2, axis=1))
                     + 0.5 * np.sum(self.inertia * self.omega ** 2))

    def momentum(self) -> np.ndarray:
        return np.sum(self.mass[:, None] * self.vel, axis=0)


def make_state(pos, radius, params: TerrainParams, width, depth, seed=0, vel=None,
               omega=None) -> SimState:
    pos = np.array(pos, dtype=float).reshape(-1, 2)
    radius = np.array(radius, dtype=float).reshape(-1)
    if np.any(radius <= 0):
        raise ValidationError("particle radii must be positive")
    n = len(radius)
    return SimState(
        pos=pos,
        vel=np.zeros((n, 2)) if vel is None else np.array(vel, dtype=float).reshape(-1, 2),
        omega=np.zeros(n) if omega is None else np.array(omega, dtype=float).reshape(-1),
        radius=radius,
        mass=params.density * math.pi * radius ** 2 * params.particle_size,
        width=float(width), depth=float(depth), seed=int(seed),
        thickness=params.particle_size,
    )


def stable_dt(params: TerrainParams, r_min=None, r_max=None) -> float:
    """Time step ``0.2 sqrt(m_min / k_max)``.

    ``k_max`` is the Hertz tangent stiffness of the stiffest contact (a
    largest particle against a wall) at an overlap of one percent of the
    diameter.
    """
    r = params.radius
    r_min = r * (1 - RADIUS_JITTER) if r_min is None else r_min
    r_max = r * (1 + RADIUS_JITTER) if r_max is None else r_max
    m_min = params.density * math.pi * r_min ** 2 * params.particle_size
    d_ref = 0.01 * params.particle_size
    k_max = 2.0 * params.effective_modulus * math.sqrt(r_max) * math.sqrt(d_ref)
    return 0.2 * math.sqrt(m_min / k_max)


# ----------------------------------------------------------------------------
# forces


@dataclass
class Forces:
    force: np.ndarray  # (n, 2) total on each particle, gravity included
    torque: np.ndarray
    reaction: np.ndarray  # on the bucket, N over the slab thickness
    reaction_torque: float  # about the bucket frame origin
    keys: np.ndarray  # contact ids, sorted
    springs: np.ndarray  # tangential spring elongation per contact
    internal_sum: np.ndarray  # vector sum of all particle-particle forces
    max_contact: float


def neighbour_pairs(state: SimState) -> Tuple[np.ndarray, np.ndarray]:
    """Candidate contact pairs ``i < j``, sorted.

    A Verlet list: pairs closer than ``r_i + r_j + skin`` are kept and reused
    until some particle has moved half the skin since the list was built.
    Contacts are filtered by actual overlap afterwards, so the contact set
    is the same as from a fresh search.
    """
    if state.n < 2:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    skin = NEIGHBOUR_SKIN * float(state.radius.max())
    cached = state.neighbours
    if cached is not None and len(cached[2]) == state.n:
        moved = np.max(np.hypot(*(state.pos - cached[2]).T))
        if moved < 0.5 * skin:
            return cached[0], cached[1]
    i, j = _kernels.neighbour_pairs(state.pos, state.radius, skin)
    state.neighbours = (i, j, state.pos.copy())
    return i, j


_NO_BUCKET = np.zeros((2, 2))


def compute_forces(state: SimState, params: TerrainParams, dt: float) -> Forces:
    """All contact, rolling and gravity loads on the particles for one step.

    Rolling resistance is a sign function of the relative spin and chatters
    when applied explicitly, so each contact may remove at most its share of
    the relative spin in one step (the share counts every contact of both
    bodies).
    """
    i, j = neighbour_pairs(state)
    b = state.bucket
    if b is None:
        verts, pose, vel, has = _NO_BUCKET, np.zeros(3), np.zeros(3), False
    else:
        verts = b.world_vertices()
        pose = np.array(b.pose, dtype=float)
        vel = np.array(b.pose_vel, dtype=float)
        has = True
    out = _kernels.contact_forces(
        state.pos, state.vel, state.omega, state.radius, state.mass, state.inertia,
        float(state.width), float(state.depth), i, j, verts, pose, vel, has,
        params.effective_modulus, params.effective_shear_modulus, params.friction,
        params.rolling_resistance, restitution_damping(params.restitution), GRAVITY, float(dt),
        state.contact_keys, state.contact_springs)
    force, torque, reaction, rtorque, keys, springs, internal, fmax = out
    return Forces(force, torque, reaction, float(rtorque), keys, springs, internal, float(fmax))


def step(state: SimState, dt: float, params: TerrainParams, *,
         blowup_speed: float = 20.0) -> SimState:
    """Advance the bed by one symplectic Euler step and return the successor."""
    f = compute_forces(state, params, dt)
    new = state.copy()
    new.vel = state.vel + dt * f.force / state.mass[:, None]
    new.pos = state.pos + dt * new.vel
    new.omega = state.omega + dt * f.torque / state.inertia
    new.time = state.time + dt
    new.reaction = f.reaction
    new.reaction_torque = f.reaction_torque
    new.contact_keys = f.keys
    new.contact_springs = f.springs
    new.internal_force_sum = f.internal_sum
    new.max_contact_force = f.max_contact
    if state.bucket is not None:
        x, y, a = state.bucket.pose
        vx, vy, w = state.bucket.pose_vel
        new.bucket = state.bucket.moved((x + vx * dt, y + vy * dt, a + w * dt))
    if not np.all(np.isfinite(new.pos)) or not np.all(np.isfinite(new.vel)):
        raise UnstableStep("non-finite particle state; time step too large")
    if new.n and float(np.max(np.hypot(new.vel[:, 0], new.vel[:, 1]))) > blowup_speed:
        raise UnstableStep(f"particle speed exceeded {blowup_speed} m/s; time step too large")
    return new


def max_speed(state: SimState) -> float:
    if state.n == 0:
        return 0.0
    return float(np.max(np.hypot(state.vel[:, 0], state.vel[:, 1])))


PACKING_PARAMS = dict(young_modulus=40.0e6, friction=0.5, restitution=0.25,
                      rolling_resistance=0.1)
LATTICE_SPACING = 1.1  # in diameters
LATTICE_JITTER = 0.05  # in diameters
OVERFILL = 1.25  # lattice height over bed depth before settling


@lru_cache(maxsize=32)
def _packing(width, depth, d, density, poisson, seed, max_steps):
    """Settled, struck-off particle layout; depends on geometry and seed only."""
    params = TerrainParams(particle_size=d, density=density, poisson=poisson, **PACKING_PARAMS)
    r = 0.5 * d
    s = LATTICE_SPACING * d
    xs = np.arange(0.5 * s, width - 0.5 * s + 1e-12, s)
    ys = np.arange(-depth + 0.5 * s, -depth + OVERFILL * depth - 0.5 * s + 1e-12, s)
    if len(xs) == 0 or len(ys) == 0:
        raise ExtentTooSmall(f"extent {width} x {depth} m holds no particle of size {d} m")
    gx, gy = np.meshgrid(xs, ys)
    pos = np.column_stack((gx.ravel(), gy.ravel()))
    rng = np.random.default_rng(seed)
    radius = r * (1.0 + RADIUS_JITTER * rng.uniform(-1.0, 1.0, len(pos)))
    pos = pos + LATTICE_JITTER * d * rng.uniform(-1.0, 1.0, pos.shape)
    state = make_state(pos, radius, params, width, depth, seed)
    state = settle_bed(state, params, max_steps=max_steps)
    # strike off at the fill line, then let the cut surface relax
    keep = state.pos[:, 1] <= -0.5 * state.radius
    state = make_state(state.pos[keep], state.radius[keep], params, width, depth, seed)
    state = settle_bed(state, params, max_steps=max_steps)
    pos, radius = state.pos.copy(), state.radius.copy()
    pos.setflags(write=False)
    radius.setflags(write=False)
    return pos, radius


def fill_bed(extent, params: TerrainParams, seed: int, *, settle: bool = True,
             dt: Optional[float] = None, settle_speed: float = 1e-4,
             max_settle_steps: int = 20000) -> SimState:
    """Settled bed of jittered disks filling ``extent = (width, depth)``.

    A square lattice of pitch ``1.1 d`` rising a quarter above the fill line
    is jittered (sites by five percent of ``d``, radii by up to ten percent,
    both drawn from ``seed``), rained down and settled with fixed packing
    contact parameters, struck off at the fill line ``y = 0`` and settled
    again.  The packing therefore depends on the extent, the particle size,
    density and seed but not on the contact parameters, so every parameter
    set digs through the same site; it is cached.  With ``settle`` the
    packing is then relaxed under ``params`` until the fastest particle is
    slower than ``settle_speed`` or ``max_settle_steps`` is reached.
    """
    width, depth = float(extent[0]), float(extent[1])
    d = params.particle_size
    if not (width >= d and depth >= d):
        raise ExtentTooSmall(f"extent {width} x {depth} m is smaller than the particle size {d} m")
    pos, radius = _packing(width, depth, d, params.density, params.poisson, int(seed),
                           max_settle_steps)
    state = make_state(pos, radius, params, width, depth, seed)
    if settle:
        state = settle_bed(state, params, dt=dt, speed=settle_speed, max_steps=max_settle_steps)
    return state


def advance(state: SimState, params: TerrainParams, dt: float, steps: int, *,
            pose_to=None, blowup_speed: float = 20.0, quench: bool = False,
            settle_speed: float = 1e-4) -> Tuple[SimState, np.ndarray, int]:
    """Run ``steps`` steps of :func:`step` in compiled code.

    With a bucket, step ``k`` places it at ``pose + (k / steps)(pose_to -
    pose)`` with its velocity held at ``pose_vel``.  ``quench`` switches to
    settling mode as described in :func:`settle_bed`.  Returns the successor,
    the bucket reaction summed over the steps and the number of steps taken.
    """
    b = state.bucket
    if b is None:
        local, pose0, pose1, bvel, has = _NO_BUCKET, np.zeros(3), np.zeros(3), np.zeros(3), False
    else:
        local = np.asarray(b.vertices, dtype=float)
        pose0 = np.array(b.pose, dtype=float)
        pose1 = pose0 if pose_to is None else np.array(pose_to, dtype=float)
        bvel = np.array(b.pose_vel, dtype=float)
        has = True
    skin = NEIGHBOUR_SKIN * float(state.radius.max()) if state.n else 0.0
    cached = state.neighbours
    if cached is not None and len(cached[2]) == state.n:
        pi, pj, ref = cached[0], cached[1], cached[2].copy()
    else:
        pi, pj = ((np.zeros(0, np.int64),) * 2 if state.n < 2
                  else _kernels.neighbour_pairs(state.pos, state.radius, skin))
        ref = state.pos.copy()
    new = state.copy()
    out = _kernels.integrate(
        new.pos, new.vel, new.omega, new.radius, new.mass, float(new.width), float(new.depth),
        pi, pj, ref, skin, local, pose0, pose1, bvel, has, int(steps), float(dt),
        params.effective_modulus, params.effective_shear_modulus, params.friction,
        params.rolling_resistance, restitution_damping(params.restitution), GRAVITY,
        state.contact_keys, state.contact_springs, float(blowup_speed), bool(quench),
        float(settle_speed))
    done, acc, reaction, rtorque, internal, fmax, keys, springs, pi, pj, ref, status = out
    if status == 1:
        raise UnstableStep("non-finite particle state; time step too large")
    if status == 2:
        raise UnstableStep(f"particle speed exceeded {blowup_speed} m/s; time step too large")
    new.time = state.time + done * dt
    new.reaction = reaction
    new.reaction_torque = float(rtorque)
    new.contact_keys = keys
    new.contact_springs = springs
    new.internal_force_sum = internal
    new.max_contact_force = float(fmax)
    new.neighbours = (pi, pj, ref)
    if b is not None:
        s = done / steps
        x, y, a = (p0 + s * (p1 - p0) for p0, p1 in zip(pose0, pose1))
        new.bucket = b.moved((float(x), float(y), float(a)))
    return new, acc, done


def settle_bed(state: SimState, params: TerrainParams, *, dt=None, speed=1e-4,
               max_steps=20000) -> SimState:
    """Relax a bed under gravity.

    Kinetic-energy quenching: whenever the total kinetic energy passes a peak
    all velocities are zeroed, which drains the packing in far fewer steps
    than contact damping alone.  Stops once the fastest particle is slower
    than ``speed`` or after ``max_steps``.
    """
    dt = stable_dt(params) if dt is None else dt
    state, _, _ = advance(state, params, dt, max_steps, quench=True, settle_speed=speed)
    state.time = 0.0
    return state
