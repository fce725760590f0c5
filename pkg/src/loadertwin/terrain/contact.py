"""Hertz-Mindlin contact law for disks.

Normal force: Hertz elastic term ``(4/3) E* sqrt(R*) d^1.5`` plus a dashpot
``eta(e) sqrt(m* k_h) d^0.25 d_dot`` with ``k_h = (4/3) E* sqrt(R*)``.  With
that scaling the coefficient of restitution of an isolated impact depends on
``eta`` only, so ``eta`` is matched to the requested restitution by solving the
dimensionless impact ``y'' = -max(0, y^1.5 + eta y^0.25 y')`` once per value.

Tangential force: incremental Mindlin spring ``k_t = 8 G* sqrt(R* d)`` capped
by Coulomb friction.  There is no tangential dashpot: with rotation coupled in,
the effective tangential mass of a disk is a third of its mass and an
explicit dashpot on a particle with several contacts goes unstable.

Rolling resistance: a torque of magnitude ``mu_r |F_n| R*`` against the
relative spin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from ..errors import ValidationError


@dataclass(frozen=True)
class TerrainParams:
    """Soil parameters.  The first five are the calibrated set."""

    young_modulus: float = 1.0e6  # Pa
    friction: float = 0.67
    restitution: float = 0.25
    particle_size: float = 0.06  # m, diameter
    rolling_resistance: float = 0.1
    density: float = 1500.0  # kg/m^3
    poisson: float = 0.3

    def __post_init__(self):
        checks = (
            (self.young_modulus > 0, "young_modulus must be positive"),
            (self.friction >= 0, "friction must be non-negative"),
            (0 <= self.restitution <= 1, "restitution must lie in [0, 1]"),
            (self.particle_size > 0, "particle_size must be positive"),
            (self.rolling_resistance >= 0, "rolling_resistance must be non-negative"),
            (self.density > 0, "density must be positive"),
            (0 <= self.poisson < 0.5, "poisson must lie in [0, 0.5)"),
        )
        for ok, msg in checks:
            if not ok:
                raise ValidationError(msg)
        for name in self.__dataclass_fields__:
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")

    @property
    def effective_modulus(self) -> float:
        return self.young_modulus / (2.0 * (1.0 - self.poisson ** 2))

    @property
    def effective_shear_modulus(self) -> float:
        shear = self.young_modulus / (2.0 * (1.0 + self.poisson))
        return shear / (2.0 * (2.0 - self.poisson))

    @property
    def radius(self) -> float:
        return 0.5 * self.particle_size

    def replace(self, **changes) -> "TerrainParams":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return TerrainParams(**d)


PRE_CALIBRATION = TerrainParams()
POST_CALIBRATION = TerrainParams(young_modulus=20e6, friction=0.68, restitution=0.25,
                                 particle_size=0.06, rolling_resistance=0.3)


def _impact_restitution(eta: float) -> float:
    """Rebound ratio of the dimensionless damped Hertz impact."""
    if eta == 0.0:
        return 1.0

    def rhs(_, z):
        y, v = z
        yp = max(y, 0.0)
        f = yp ** 1.5 + eta * yp ** 0.25 * v
        return (v, -max(f, 0.0))

    def exit_(_, z):
        return z[0]
    exit_.terminal = True
    exit_.direction = -1

    sol = solve_ivp(rhs, (0.0, 1e3), (1e-12, 1.0), events=exit_, rtol=1e-10,
                    atol=1e-13, max_step=0.05)
    return float(-sol.y_events[0][0][1])


@lru_cache(maxsize=256)
def restitution_damping(e: float) -> float:
    """Dimensionless dashpot coefficient that rebounds with restitution ``e``.

    Zero at ``e = 1`` and increasing as ``e`` falls.
    """
    if e >= 1.0:
        return 0.0
    e = max(e, 1e-3)
    hi = 1.0
    while _impact_restitution(hi) > e:
        hi *= 2.0
    return brentq(lambda eta: _impact_restitution(eta) - e, 0.0, hi, xtol=1e-12, rtol=1e-12)


class ContactForce(NamedTuple):
    normal: np.ndarray  # repulsive, >= 0
    tangential: np.ndarray  # along the tangent, on the first body
    rolling_torque: np.ndarray  # on the first body
    spring: np.ndarray  # updated tangential spring elongation


def hertz_mindlin_contact(overlap, normal_rel_vel, tangential_rel_vel, effective_radius,
                          effective_mass, params: TerrainParams, spring=0.0, dt=0.0,
                          rel_angular_vel=0.0) -> ContactForce:
    """Contact forces for one or many contacts (array arguments broadcast).

    ``normal_rel_vel`` is the rate of overlap growth (positive while
    approaching).  ``tangential_rel_vel`` and ``rel_angular_vel`` are the slip
    and spin of the first body relative to the second; the spring elongation is
    advanced by ``tangential_rel_vel * dt`` before the force is evaluated.
    """
    delta = np.asarray(overlap, dtype=float)
    vn = np.asarray(normal_rel_vel, dtype=float)
    vt = np.asarray(tangential_rel_vel, dtype=float)
    rstar = np.asarray(effective_radius, dtype=float)
    mstar = np.asarray(effective_mass, dtype=float)
    xi = np.asarray(spring, dtype=float)
    w = np.asarray(rel_angular_vel, dtype=float)

    touching = delta > 0.0
    d = np.where(touching, delta, 0.0)
    eta = restitution_damping(params.restitution)

    k_h = (4.0 / 3.0) * params.effective_modulus * np.sqrt(rstar)
    fn = k_h * d ** 1.5 + eta * np.sqrt(mstar * k_h) * d ** 0.25 * vn
    fn = np.where(touching, np.maximum(fn, 0.0), 0.0)

    k_t = 8.0 * params.effective_shear_modulus * np.sqrt(rstar * d)
    xi = np.where(touching, xi + vt * dt, 0.0)
    ft = -k_t * xi
    cap = params.friction * fn
    slip = np.abs(ft) > cap
    ft = np.where(slip, np.sign(ft) * cap, ft)
    safe_kt = np.where(k_t > 0.0, k_t, 1.0)
    xi = np.where(slip, np.where(k_t > 0.0, -ft / safe_kt, 0.0), xi)
    ft = np.where(touching, ft, 0.0)

    torque = -params.rolling_resistance * fn * rstar * np.sign(w)
    return ContactForce(fn, ft, torque, xi)
