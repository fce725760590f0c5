"""Static force analysis of the instrumented bucket.

Forces are planar (x forward, y up), in newtons.  Hinge forces are what the
main arm (``mp``) and link A (``sp``) apply to the bucket through their pins;
the soil force is the soil reaction on the bucket.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import EmptySpan, NonPositiveArea, ValidationError

GRAVITY = 9.80665

# bucket + bucket base, the body between the instrumented pins and the soil
DEFAULT_BUCKET_MASS = 205.8 + 84.8


@dataclass(frozen=True)
class HingeForces:
    f_mp_x: float
    f_mp_y: float
    f_sp_x: float
    f_sp_y: float


@dataclass(frozen=True)
class SoilForce:
    f_s_x: float
    f_s_y: float

    @property
    def magnitude(self) -> float:
        return math.hypot(self.f_s_x, self.f_s_y)


@dataclass(frozen=True)
class BucketBody:
    mass: float = DEFAULT_BUCKET_MASS
    a_x: float = 0.0
    a_y: float = 0.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValidationError("bucket mass must be positive")

    @property
    def weight(self) -> float:
        return self.mass * GRAVITY


def soil_force_from_hinges(h: HingeForces, b: BucketBody) -> SoilForce:
    """Soil reaction that balances the hinge loads, weight and inertia."""
    fx = h.f_mp_x + h.f_sp_x - b.mass * b.a_x
    fy = b.weight + b.mass * b.a_y - h.f_mp_y - h.f_sp_y
    return SoilForce(fx, fy)


def static_residual(h: HingeForces, s: SoilForce, b: BucketBody) -> Tuple[float, float]:
    """Out-of-balance force of a static free body; zero at equilibrium."""
    return (h.f_mp_x + h.f_sp_x - s.f_s_x,
            h.f_mp_y + h.f_sp_y + s.f_s_y - b.weight)


@dataclass
class LoadPin:
    """Geometry and sampled contact loads of one load pin.

    The bucket base bears on ``[0, s1_pin]`` and link A on
    ``[length - s2_pin, length]`` (mm).  ``grooves`` are the two gauge
    positions, which must lie between the contact spans.  Load distributions
    are sampled piecewise-linear functions ``(positions_mm, load_N_per_mm)``.
    """

    length: float
    s1_pin: float
    s2_pin: float
    grooves: Tuple[float, float] = None
    q_bb: Tuple[np.ndarray, np.ndarray] = field(default=None, repr=False)
    q_la: Tuple[np.ndarray, np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not (self.length > 0 and self.s1_pin > 0 and self.s2_pin > 0):
            raise ValidationError("pin length and contact spans must be positive")
        if self.s1_pin > self.length - self.s2_pin:
            raise ValidationError("contact spans overlap")
        if self.grooves is None:
            self.grooves = (self.s1_pin, self.length - self.s2_pin)
        g1, g2 = self.grooves
        if not (self.s1_pin <= g1 <= g2 <= self.length - self.s2_pin):
            raise ValidationError("grooves must lie between the contact spans")

    @property
    def bucket_span(self):
        return 0.0, self.s1_pin

    @property
    def link_span(self):
        return self.length - self.s2_pin, self.length


def _span_integral(samples, span, name):
    if samples is None:
        raise EmptySpan(f"{name} has no samples")
    s = np.asarray(samples[0], dtype=float)
    q = np.asarray(samples[1], dtype=float)
    lo, hi = span
    tol = 1e-9 * max(1.0, abs(hi))
    keep = (s >= lo - tol) & (s <= hi + tol)
    if keep.sum() < 2:
        raise EmptySpan(f"{name} needs at least two samples on [{lo}, {hi}]")
    s, q = s[keep], q[keep]
    order = np.argsort(s, kind="stable")
    return float(np.trapezoid(q[order], s[order]))


def pin_shears(pin: LoadPin) -> Tuple[float, float]:
    """Groove shears ``(V1, V2)``: trapezoidal integrals of the contact loads."""
    v1 = _span_integral(pin.q_bb, pin.bucket_span, "bucket-base load")
    v2 = _span_integral(pin.q_la, pin.link_span, "link-A load")
    return v1, v2


def resultant_from_shears(v1: float, v2: float, axis: str = "x") -> Tuple[float, float]:
    """Contact resultants on the pin recovered from the two groove shears.

    With the gauges on the neutral axis and between the two contact spans,
    each groove carries the whole load of the span next to it, so the
    bucket-side resultant is ``V1`` and the link-side resultant is ``V2``.
    """
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    return v1, v2


def pin_resultants(v1_x, v2_x, v1_y, v2_y):
    """Planar resultants ``(bucket_side_xy, link_side_xy)`` of a dual-axis pin."""
    bx, lx = resultant_from_shears(v1_x, v2_x, "x")
    by, ly = resultant_from_shears(v1_y, v2_y, "y")
    return (bx, by), (lx, ly)


def cylinder_pressure(force: float, piston_area: float, side: str = "head") -> float:
    """Quasi-static pressure (Pa) behind a piston face of ``piston_area`` m^2."""
    if side not in ("head", "rod"):
        raise ValueError("side must be 'head' or 'rod'")
    if not piston_area > 0:
        raise NonPositiveArea(f"piston area must be positive, got {piston_area}")
    return force / piston_area
