"""Planar kinematics of the end-loader linkage.

The linkage is described by constant link lengths ``l1..l18`` and constant
frame angles ``beta0..beta5``.  Two cylinders drive it: the lift cylinder
(total length ``s_lift``) swings the main arm, the tilt cylinder (``s_tilt``)
turns the bucket through a straight lever pivoted on the arm and a coupler
link.  Angles are in radians and lengths in millimetres throughout.

Point names used below (all in the frame of the lift-cylinder base ``P0``):

* arm pivot ``l7`` from the origin at ``beta0``;
* ``Pm`` the lift-cylinder attachment on the arm (arm pivot + ``l11``);
* ``P12`` the lever pivot on the arm (``Pm`` + ``l12``);
* ``P8`` the bucket blade tip, ``P7`` the coupler pin on the bucket.

:func:`inverse_kinematics` is the closed-form chain that maps a task target
(bucket orientation ``theta4`` and blade height ``y_p8``) to cylinder lengths.
:func:`forward_kinematics` solves the loop-closure residuals numerically and
serves as an independent check on it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np

from .errors import (
    AssemblyError,
    Degenerate,
    GeometryError,
    Inconsistent,
    NoConvergence,
    SingularSystem,
    StrokeError,
    Unsolvable,
    ValidationError,
    WorkspaceError,
)

PI = math.pi

DEFAULT_MASSES = {
    "bucket": 205.8,
    "bucket_base": 84.8,
    "link_b": 8.99,
    "link_a": 33.9,
    "main_arm": 294.6,
    "hydraulic_rod_a1": 20.3,
    "hydraulic_rod_a2": 13.1,
    "hydraulic_rod_b1": 19.6,
    "hydraulic_rod_b2": 14.7,
}


def wrap_angle(a: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    w = math.remainder(a, 2.0 * PI)
    if w <= -PI:
        w += 2.0 * PI
    return w


@dataclass(frozen=True)
class LinkageGeometry:
    """Constant geometry, masses and stroke limits of the linkage.

    Lengths ``l1..l16`` and ``beta2..beta5`` default to the measured machine.
    ``beta0``, ``beta1``, ``l17``, ``l18``, ``angle_p0p12p2`` and the stroke
    ranges were not measured; the defaults are a pinned fixture under which the
    linkage assembles over the whole stroke box (see ``configs/default.toml``).
    """

    l1: float = 348.76
    l2: float = 796.91
    l3: float = 770.0
    l4: float = 840.0
    l5: float = 560.0
    l6: float = 982.0
    l7: float = 334.23
    l8: float = 2030.0
    l9: float = 772.33
    l10: float = 272.41
    l11: float = 1068.88
    l12: float = 279.50
    l13: float = 973.13
    l14: float = 320.88
    l15: float = 320.0
    l16: float = 520.0
    l17: float = 0.0
    l18: float = 0.0
    beta0: float = math.radians(60.0)
    beta1: float = math.radians(55.0)
    beta2: float = math.radians(26.8)
    beta3: float = math.radians(12.31)
    beta4: float = math.radians(16.06)
    beta5: float = math.radians(5.86)
    angle_p0p12p2: float = 0.0
    p0: Tuple[float, float] = (0.0, 0.0)
    masses: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_MASSES))
    stroke_lift: Tuple[float, float] = (1390.0, 1630.0)
    stroke_tilt: Tuple[float, float] = (1200.0, 1400.0)
    # mid-workspace target used to seed the numeric forward solve
    seed_theta4: float = -0.3
    seed_y_p8: float = 150.0

    def __post_init__(self):
        for i in range(1, 17):
            v = getattr(self, f"l{i}")
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"l{i} must be positive")
        for name in ("l17", "l18"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be non-negative")
        for name in ("beta0", "beta1", "beta2", "beta3", "beta4", "beta5",
                     "angle_p0p12p2", "seed_theta4", "seed_y_p8"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        for name in ("stroke_lift", "stroke_tilt"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and 0 <= lo < hi):
                raise ValidationError(f"{name} must satisfy 0 <= min < max")
        for part, m in self.masses.items():
            if not (math.isfinite(m) and m > 0):
                raise ValidationError(f"mass of {part} must be positive")

    def with_(self, **changes) -> "LinkageGeometry":
        return replace(self, **changes)

    def __hash__(self):
        return hash(self._key())

    def __eq__(self, other):
        return isinstance(other, LinkageGeometry) and self._key() == other._key()

    def _key(self):
        vals = []
        for f in self.__dataclass_fields__:
            v = getattr(self, f)
            vals.append(tuple(sorted(v.items())) if isinstance(v, dict) else v)
        return tuple(vals)


@dataclass(frozen=True)
class TaskTarget:
    theta4: float  # bucket orientation
    y_p8: float  # blade height


@dataclass(frozen=True)
class CylinderExtensions:
    """Cylinder strokes ``s1``, ``s2`` and the total lengths they imply."""

    s1: float
    s2: float
    l17: float = 0.0
    l18: float = 0.0

    @property
    def s_lift(self) -> float:
        return self.s1 + self.l17

    @property
    def s_tilt(self) -> float:
        return self.s2 + self.l18

    @classmethod
    def from_lengths(cls, s_lift, s_tilt, geom: LinkageGeometry):
        return cls(s_lift - geom.l17, s_tilt - geom.l18, geom.l17, geom.l18)


@dataclass(frozen=True)
class JointSolution:
    theta0: float
    theta3: float
    theta4: float
    theta5: float
    theta5_plus_theta8: float
    theta6: float
    theta7: float
    theta8: float
    theta9: float
    theta10: float
    p7: Tuple[float, float]
    p8: Tuple[float, float]
    p12: Tuple[float, float]
    extensions: CylinderExtensions

    @property
    def y_p8(self) -> float:
        return self.p8[1]

    def target(self) -> TaskTarget:
        return TaskTarget(self.theta4, self.p8[1])


# ----------------------------------------------------------------------------
# trigonometric solvers


def solve_linear_trig(a: float, b: float, c: float, supplementary: bool = False) -> float:
    """Solve ``a = b*sin(x) - c*cos(x)`` for ``x``.

    The left side is rewritten as ``hypot(b, c) * sin(x + phi)`` with phase
    ``phi = atan2(-c, b)``.  The principal arcsine branch is returned unless
    ``supplementary`` is set.  The result is wrapped to (-pi, pi].
    """
    r = math.hypot(b, c)
    if r == 0.0:
        raise Degenerate("b and c are both zero")
    ratio = a / r
    if abs(ratio) > 1.0:
        if abs(ratio) - 1.0 > 1e-12:
            raise Unsolvable(f"|a|/hypot(b, c) = {abs(ratio):.6g} exceeds 1")
        ratio = math.copysign(1.0, ratio)
    phi = math.atan2(-c, b)
    s = math.asin(ratio)
    x = (PI - s if supplementary else s) - phi
    return wrap_angle(x)


def solve_cos_sin_system(p, q, r, s, c3, f3) -> Tuple[float, float]:
    """Solve ``p cos x + q sin x = c3`` and ``r sin x + s cos x = f3``.

    Treats ``cos x`` and ``sin x`` as independent unknowns of a 2x2 linear
    system, then recovers ``x`` with a four-quadrant arctangent.  Returns
    ``(x, cos^2 + sin^2 - 1)``; the second value measures how far the inputs
    are from describing an actual angle.
    """
    det = p * r - q * s
    if abs(det) < 1e-12:
        raise SingularSystem(f"determinant {det:.3g} is zero")
    cx = (r * c3 - q * f3) / det
    sx = (-s * c3 + p * f3) / det
    resid = cx * cx + sx * sx - 1.0
    if abs(resid) > 1e-6:
        raise Inconsistent(f"cos^2 + sin^2 - 1 = {resid:.3g}")
    return math.atan2(sx, cx), resid


# ----------------------------------------------------------------------------
# closed-form pieces shared by the inverse chain and the residual checks


def blade_height(joints: JointSolution, geom: LinkageGeometry) -> float:
    """Blade height from arm angle and bucket orientation."""
    tb3 = geom.beta0 - joints.theta3
    return (geom.l7 * math.sin(geom.beta0) + geom.l8 * math.sin(tb3)
            - geom.l9 * math.sin(joints.theta4 - tb3))


def _blade_tip(theta3, theta4, g):
    tb3 = g.beta0 - theta3
    x = g.l7 * math.cos(g.beta0) + g.l8 * math.cos(tb3) + g.l9 * math.cos(theta4 - tb3)
    y = g.l7 * math.sin(g.beta0) + g.l8 * math.sin(tb3) - g.l9 * math.sin(theta4 - tb3)
    return x, y


def _coupler_pin(theta3, theta4, g):
    # P7 sits on the bucket at a fixed offset l6 from the blade tip; the
    # offset direction keeps the angle between l9 and l6 constant.
    x8, y8 = _blade_tip(theta3, theta4, g)
    psi = theta4 + g.beta4 - (g.beta0 - theta3)
    return x8 - g.l6 * math.cos(psi), y8 + g.l6 * math.sin(psi)


def _lever_pivot_from_arm(theta10, g):
    a = g.beta0 - theta10
    x = g.l7 * math.cos(g.beta0) + g.l11 * math.cos(a) + g.l12 * math.cos(g.beta2 + a)
    y = g.l7 * math.sin(g.beta0) + g.l11 * math.sin(a) + g.l12 * math.sin(g.beta2 + a)
    return x, y


def _lift_route(s_lift, theta0, theta9, theta10, g):
    """Lever pivot reached through the lift cylinder, rod offset and ``l12``."""
    al = PI / 2 - theta0
    x2 = PI - (theta9 + al)
    a = g.beta2 + g.beta0 - theta10
    x = s_lift * math.cos(al) - g.l10 * math.cos(x2) + g.l12 * math.cos(a)
    y = s_lift * math.sin(al) + g.l10 * math.sin(x2) + g.l12 * math.sin(a)
    return x, y


# ----------------------------------------------------------------------------
# inverse kinematics


def inverse_kinematics(target: TaskTarget, geom: LinkageGeometry, *,
                       supplementary: bool = False, elbow: bool = False,
                       check_stroke: bool = True) -> JointSolution:
    """Cylinder lengths and joint angles for a bucket orientation and blade height.

    ``supplementary`` selects the other arcsine branch for the arm angle;
    ``elbow`` selects the mirrored assembly of the lever/coupler four-bar.
    Both alternates are accepted only if the closure residuals vanish.
    """
    g = geom
    th4 = target.theta4
    y = target.y_p8
    if not (math.isfinite(th4) and math.isfinite(y)):
        raise WorkspaceError("target must be finite", stage="input")

    # arm angle: y - l7 sin(beta0) = (l8 + l9 cos th4) sin(tb3) - l9 sin(th4) cos(tb3)
    a1 = y - g.l7 * math.sin(g.beta0)
    b1 = g.l8 + g.l9 * math.cos(th4)
    c1 = g.l9 * math.sin(th4)
    try:
        tb3 = solve_linear_trig(a1, b1, c1, supplementary=supplementary)
    except Unsolvable as exc:
        raise WorkspaceError(str(exc), stage="arm angle from blade height") from exc
    theta3 = wrap_angle(g.beta0 - tb3)
    theta10 = theta3 - g.beta5

    # lift cylinder direction from the lever pivot bearing
    xq, yq = _lever_pivot_from_arm(theta10, g)
    alpha = math.atan2(yq, xq) - g.angle_p0p12p2
    theta0 = PI / 2 - alpha

    # lift loop.  Matching
    #   s_lift cos(al) - l10 cos(x2) = l7 cos(b0) + l11 cos(b0 - th10)
    #   s_lift sin(al) + l10 sin(x2) = l7 sin(b0) + l11 sin(b0 - th10)
    # against  A2 x1 - B2 cos x2 = C2,  D2 x1 + E2 sin x2 = F2  gives
    #   A2 = cos(al), B2 = l10, C2 = rhs_x, D2 = sin(al), E2 = l10, F2 = rhs_y.
    A2, B2, D2, E2 = math.cos(alpha), g.l10, math.sin(alpha), g.l10
    C2 = g.l7 * math.cos(g.beta0) + g.l11 * math.cos(g.beta0 - theta10)
    F2 = g.l7 * math.sin(g.beta0) + g.l11 * math.sin(g.beta0 - theta10)
    G2 = F2 * A2 - D2 * C2
    # D2 B2 cos x2 + A2 E2 sin x2 = G2  ->  b = A2 E2, c = -D2 B2
    try:
        x2 = solve_linear_trig(G2, A2 * E2, -D2 * B2)
    except Unsolvable as exc:
        raise WorkspaceError(str(exc), stage="lift cylinder loop") from exc
    # back-substitute through whichever equation is better conditioned
    if abs(A2) >= abs(D2):
        s_lift = (C2 + B2 * math.cos(x2)) / A2
    else:
        s_lift = (F2 - E2 * math.sin(x2)) / D2
    theta9 = PI - alpha - x2

    # coupler pin and lever pivot
    x7, y7 = _coupler_pin(theta3, th4, g)
    x12, y12 = _lift_route(s_lift, theta0, theta9, theta10, g)

    # lever/coupler triangle by the law of cosines
    l_th6 = math.hypot(x7 - x12, y7 - y12)
    den = -2.0 * g.l16 * g.l5
    if den == 0.0:
        raise GeometryError("law-of-cosines denominator is zero")
    cos_arg = (l_th6 ** 2 - g.l16 ** 2 - g.l5 ** 2) / den
    if abs(cos_arg) > 1.0:
        raise WorkspaceError(f"arccos argument {cos_arg:.6g} outside [-1, 1]",
                             stage="bucket four-bar (law of cosines)")
    theta6 = PI - math.acos(cos_arg)
    if elbow:
        theta6 = -theta6

    # coupler loop in x4 = theta5 + theta8 - beta1.  With the bucket-side
    # terms moved right:
    #   l16 cos x4 + l5 cos(th6 - x4) = x7 - x12
    #  -l16 sin x4 + l5 sin(th6 - x4) = y7 - y12
    # so P = l16 + l5 cos th6, Q = l5 sin th6, R = -P, S = l5 sin th6.
    P = g.l16 + g.l5 * math.cos(theta6)
    Q = g.l5 * math.sin(theta6)
    R = -P
    S = g.l5 * math.sin(theta6)
    x4, _ = solve_cos_sin_system(P, Q, R, S, x7 - x12, y7 - y12)
    theta7 = theta6 - x4 - (tb3 - th4 - g.beta4)
    theta58 = x4 + g.beta1

    # tilt loop: s_tilt cos x7 = A4, s_tilt sin x7 = B4
    A4 = x12 - g.l1 * math.cos(g.beta1) - g.l15 * math.cos(x4)
    B4 = y12 - g.l1 * math.sin(g.beta1) + g.l15 * math.sin(x4)
    s_tilt = math.hypot(A4, B4)
    xt = math.atan2(B4, A4)
    theta8 = g.beta1 - xt
    theta5 = theta58 - theta8

    ext = CylinderExtensions(s_lift - g.l17, s_tilt - g.l18, g.l17, g.l18)
    if check_stroke:
        _check_stroke(ext.s_lift, ext.s_tilt, g)
    x8, y8 = _blade_tip(theta3, th4, g)
    sol = JointSolution(
        theta0=wrap_angle(theta0), theta3=theta3, theta4=wrap_angle(th4),
        theta5=wrap_angle(theta5), theta5_plus_theta8=wrap_angle(theta58),
        theta6=wrap_angle(theta6), theta7=wrap_angle(theta7),
        theta8=wrap_angle(theta8), theta9=wrap_angle(theta9), theta10=wrap_angle(theta10),
        p7=(x7, y7), p8=(x8, y8), p12=(x12, y12), extensions=ext,
    )
    if supplementary or elbow:
        worst = max(abs(v) for v in loop_residuals(sol, g).values())
        if worst > 1e-6:
            raise WorkspaceError(f"alternate branch does not close (residual {worst:.3g} mm)",
                                 stage="branch check")
    return sol


STROKE_TOL = 1e-9  # mm; round-off of the closed-form chain at the stroke ends


def _check_stroke(s_lift, s_tilt, g):
    s1, s2 = s_lift - g.l17, s_tilt - g.l18
    lo, hi = g.stroke_lift
    if not lo - STROKE_TOL <= s1 <= hi + STROKE_TOL:
        raise StrokeError(f"lift extension {s1:.3f} mm outside [{lo}, {hi}]")
    lo, hi = g.stroke_tilt
    if not lo - STROKE_TOL <= s2 <= hi + STROKE_TOL:
        raise StrokeError(f"tilt extension {s2:.3f} mm outside [{lo}, {hi}]")


# ----------------------------------------------------------------------------
# loop-closure residuals


def _residual_terms(th0, th3, th4, th5, th6, th7, th8, th9, s_lift, s_tilt, g):
    """Left minus right side of every closure equation, in a fixed order.

    Returns six loop residuals (mm) followed by the lever-bearing and
    angle-sum constraints (rad).
    """
    b0, b1 = g.beta0, g.beta1
    th10 = th3 - g.beta5
    tb3 = b0 - th3
    al = PI / 2 - th0
    x2 = PI - (th9 + al)
    arm_x = g.l7 * math.cos(b0) + g.l11 * math.cos(b0 - th10)
    arm_y = g.l7 * math.sin(b0) + g.l11 * math.sin(b0 - th10)
    # lift cylinder + rod offset vs. arm
    r1 = s_lift * math.cos(al) - g.l10 * math.cos(x2) - arm_x
    r2 = s_lift * math.sin(al) + g.l10 * math.sin(x2) - arm_y
    ax = g.beta2 + b0 - th10
    qx = s_lift * math.cos(al) - g.l10 * math.cos(x2) + g.l12 * math.cos(ax)
    qy = s_lift * math.sin(al) + g.l10 * math.sin(x2) + g.l12 * math.sin(ax)
    u = th5 - (b1 - th8)
    w = th7 - (th6 - u)
    tip_x = g.l7 * math.cos(b0) + g.l8 * math.cos(tb3) + g.l9 * math.cos(th4 - tb3)
    tip_y = g.l7 * math.sin(b0) + g.l8 * math.sin(tb3) - g.l9 * math.sin(th4 - tb3)
    # lift side through lever, coupler and bucket vs. arm and bucket
    r3 = qx + g.l16 * math.cos(u) + g.l5 * math.cos(th6 - u) + g.l6 * math.cos(w) - tip_x
    r4 = qy - g.l16 * math.sin(u) + g.l5 * math.sin(th6 - u) - g.l6 * math.sin(w) - tip_y
    # tilt cylinder + lever vs. lift side
    r5 = g.l1 * math.cos(b1) + s_tilt * math.cos(b1 - th8) + g.l15 * math.cos(u) - qx
    r6 = g.l1 * math.sin(b1) + s_tilt * math.sin(b1 - th8) - g.l15 * math.sin(u) - qy
    xq, yq = _lever_pivot_from_arm(th10, g)
    r7 = math.remainder(al - (math.atan2(yq, xq) - g.angle_p0p12p2), 2 * PI)
    r8 = (b1 - th8 - th5 + th6 - th7) - (tb3 - th4 - g.beta4)
    return r1, r2, r3, r4, r5, r6, r7, r8


LOOP_NAMES = ("lift_x", "lift_y", "coupler_x", "coupler_y", "tilt_x", "tilt_y")


def loop_residuals(sol: JointSolution, geom: LinkageGeometry) -> Dict[str, float]:
    """Residuals (mm) of the three two-component loop-closure equations."""
    r = _residual_terms(sol.theta0, sol.theta3, sol.theta4, sol.theta5, sol.theta6,
                        sol.theta7, sol.theta8, sol.theta9,
                        sol.extensions.s_lift, sol.extensions.s_tilt, geom)
    return dict(zip(LOOP_NAMES, r[:6]))


def angle_residuals(sol: JointSolution, geom: LinkageGeometry) -> Dict[str, float]:
    r = _residual_terms(sol.theta0, sol.theta3, sol.theta4, sol.theta5, sol.theta6,
                        sol.theta7, sol.theta8, sol.theta9,
                        sol.extensions.s_lift, sol.extensions.s_tilt, geom)
    return {"lift_bearing": r[6], "angle_sum": wrap_angle(r[7]),
            "arm_offset": sol.theta3 - sol.theta10 - geom.beta5}


# ----------------------------------------------------------------------------
# forward kinematics (numeric)

_ANGLE_SCALE = 1000.0  # weight angle residuals like millimetres


def _fk_residual(u, s_lift, s_tilt, g):
    th3, th0, th9, th4, th6, th7, th5, th8 = u
    r = _residual_terms(th0, th3, th4, th5, th6, th7, th8, th9, s_lift, s_tilt, g)
    return np.array(r[:6] + (r[6] * _ANGLE_SCALE, r[7] * _ANGLE_SCALE))


def _fk_jacobian(u, s_lift, s_tilt, g, f0):
    n = len(u)
    jac = np.empty((n, n))
    for k in range(n):
        h = 1e-7
        up = list(u)
        um = list(u)
        up[k] += h
        um[k] -= h
        jac[:, k] = (_fk_residual(up, s_lift, s_tilt, g) - _fk_residual(um, s_lift, s_tilt, g)) / (2 * h)
    return jac


@lru_cache(maxsize=32)
def _fk_seed(geom: LinkageGeometry):
    try:
        sol = inverse_kinematics(TaskTarget(geom.seed_theta4, geom.seed_y_p8), geom,
                                 check_stroke=False)
    except WorkspaceError as exc:
        raise AssemblyError(f"seed configuration does not assemble: {exc}") from exc
    u = (sol.theta3, sol.theta0, sol.theta9, sol.theta4, sol.theta6, sol.theta7,
         sol.theta5, sol.theta8)
    return u, sol.extensions.s_lift, sol.extensions.s_tilt


def _newton(u0, s_lift, s_tilt, g, max_iter, tol):
    u = np.array(u0, dtype=float)
    f = _fk_residual(u, s_lift, s_tilt, g)
    for it in range(max_iter):
        if np.max(np.abs(f[:6])) < tol and np.max(np.abs(f[6:])) < tol * 1e-2:
            return u, f, it
        jac = _fk_jacobian(u, s_lift, s_tilt, g, f)
        try:
            du = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise AssemblyError("singular loop-closure Jacobian") from exc
        # keep steps moderate; the residual system is only locally convex
        big = np.max(np.abs(du))
        if big > 0.3:
            du *= 0.3 / big
        norm0 = np.linalg.norm(f)
        lam = 1.0
        while True:
            un = u + lam * du
            fn = _fk_residual(un, s_lift, s_tilt, g)
            if np.linalg.norm(fn) < norm0 or lam < 1e-4:
                break
            lam *= 0.5
        if lam < 1e-4 and np.linalg.norm(fn) >= norm0:
            if norm0 < 1e-7:  # at roundoff floor
                return u, f, it
            raise AssemblyError(f"loop closure stalled at residual {norm0:.3g}")
        u, f = un, fn
    if np.max(np.abs(f[:6])) < tol and np.max(np.abs(f[6:])) < tol * 1e-2:
        return u, f, max_iter
    raise NoConvergence(f"no convergence after {max_iter} iterations "
                        f"(residual {np.max(np.abs(f)):.3g})")


def forward_kinematics(ext: CylinderExtensions, geom: LinkageGeometry, *,
                       max_iter: int = 200, tol: float = 1e-10,
                       check_stroke: bool = True) -> Tuple[TaskTarget, JointSolution]:
    """Task target and joint state for given cylinder extensions.

    Solves the eight closure equations for the eight joint angles by damped
    Newton iteration from a fixed mid-workspace seed.  If the direct solve
    fails, the extensions are approached from the seed in a few continuation
    steps.  Deterministic.
    """
    g = geom
    s_lift, s_tilt = ext.s1 + g.l17, ext.s2 + g.l18
    if check_stroke:
        _check_stroke(s_lift, s_tilt, g)
    u0, sl0, st0 = _fk_seed(g)
    try:
        u, f, _ = _newton(u0, s_lift, s_tilt, g, max_iter, tol)
    except (AssemblyError, NoConvergence) as first:
        u = np.array(u0)
        n_sub = 8
        for k in range(1, n_sub + 1):
            sl = sl0 + (s_lift - sl0) * k / n_sub
            st = st0 + (s_tilt - st0) * k / n_sub
            try:
                u, f, _ = _newton(u, sl, st, g, max_iter, tol)
            except (AssemblyError, NoConvergence):
                raise first
    th3, th0, th9, th4, th6, th7, th5, th8 = (float(v) for v in u)
    th10 = th3 - g.beta5
    x8, y8 = _blade_tip(th3, th4, g)
    x7, y7 = _coupler_pin(th3, th4, g)
    x12, y12 = _lift_route(s_lift, th0, th9, th10, g)
    sol = JointSolution(
        theta0=wrap_angle(th0), theta3=wrap_angle(th3), theta4=wrap_angle(th4),
        theta5=wrap_angle(th5), theta5_plus_theta8=wrap_angle(th5 + th8),
        theta6=wrap_angle(th6), theta7=wrap_angle(th7), theta8=wrap_angle(th8),
        theta9=wrap_angle(th9), theta10=wrap_angle(th10),
        p7=(x7, y7), p8=(x8, y8), p12=(x12, y12),
        extensions=CylinderExtensions(ext.s1, ext.s2, g.l17, g.l18),
    )
    return TaskTarget(sol.theta4, y8), sol


def to_body_frame(point, geom: LinkageGeometry):
    """Shift a point from the lift-cylinder-base frame to the body frame."""
    return point[0] + geom.p0[0], point[1] + geom.p0[1]
