import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loadertwin.errors import (AssemblyError, Degenerate, Inconsistent, SingularSystem,
                               StrokeError, Unsolvable, ValidationError, WorkspaceError)
from loadertwin.mechanism import (CylinderExtensions, LinkageGeometry, TaskTarget,
                                  angle_residuals, blade_height, forward_kinematics,
                                  inverse_kinematics, loop_residuals, solve_cos_sin_system,
                                  solve_linear_trig, to_body_frame, wrap_angle)

G = LinkageGeometry()

# Closed-form inverse kinematics at four targets.  Each pair of lengths was
# checked by driving the numeric forward solve with it and recovering the
# target to better than 1e-11 mm and 1e-14 rad.
IK_FROZEN = [
    ((-0.3, 150.0), (1528.0983924471864, 1302.5083431175597)),
    ((0.0, 500.0), (1573.3832432121264, 1238.5761287649136)),
    ((-0.5, -100.0), (1490.9917674142118, 1349.3052321641637)),
    ((0.2, 1200.0), (1622.9532766685977, 1208.6715524538552)),
]


def test_wrap_angle_range():
    for a in np.linspace(-20, 20, 401):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-12)
    assert wrap_angle(-math.pi) == math.pi


@given(st.floats(-3.0, 3.0), st.floats(0.1, 10.0), st.floats(-10.0, 10.0), st.booleans())
def test_linear_trig_recovers_forward_substitution(x, b, c, supp):
    a = b * math.sin(x) - c * math.cos(x)
    y = solve_linear_trig(a, b, c, supplementary=supp)
    assert b * math.sin(y) - c * math.cos(y) == pytest.approx(a, abs=1e-9)


def test_linear_trig_errors():
    with pytest.raises(Degenerate):
        solve_linear_trig(0.5, 0.0, 0.0)
    with pytest.raises(Unsolvable):
        solve_linear_trig(2.0, 1.0, 0.0)
    # within the tolerance band the argument is clamped
    assert solve_linear_trig(1.0 + 1e-14, 1.0, 0.0) == pytest.approx(math.pi / 2)


def test_cos_sin_system():
    x, resid = solve_cos_sin_system(2.0, 1.0, 3.0, -1.0, 2 * math.cos(0.7) + math.sin(0.7),
                                    3 * math.sin(0.7) - math.cos(0.7))
    assert x == pytest.approx(0.7, abs=1e-14)
    assert abs(resid) < 1e-14
    with pytest.raises(SingularSystem):
        solve_cos_sin_system(1.0, 1.0, 1.0, 1.0, 0.0, 0.0)
    with pytest.raises(Inconsistent):
        solve_cos_sin_system(1.0, 0.0, 1.0, 0.0, 2.0, 2.0)


@pytest.mark.parametrize("target,lengths", IK_FROZEN)
def test_ik_frozen_values(target, lengths):
    sol = inverse_kinematics(TaskTarget(*target), G)
    assert sol.extensions.s1 == pytest.approx(lengths[0], abs=1e-9)
    assert sol.extensions.s2 == pytest.approx(lengths[1], abs=1e-9)
    assert sol.y_p8 == pytest.approx(target[1], abs=1e-9)
    assert blade_height(sol, G) == pytest.approx(target[1], abs=1e-9)
    assert sol.target() == TaskTarget(sol.theta4, sol.p8[1])


@pytest.mark.parametrize("target,lengths", IK_FROZEN)
def test_fk_inverts_frozen_values(target, lengths):
    tgt, sol = forward_kinematics(CylinderExtensions(*lengths), G)
    assert tgt.theta4 == pytest.approx(target[0], abs=1e-9)
    assert tgt.y_p8 == pytest.approx(target[1], abs=1e-8)
    assert max(abs(v) for v in loop_residuals(sol, G).values()) < 1e-9


def test_ik_solution_closes_every_loop():
    sol = inverse_kinematics(TaskTarget(-0.2, 300.0), G)
    assert max(abs(v) for v in loop_residuals(sol, G).values()) < 1e-9
    ang = angle_residuals(sol, G)
    assert abs(ang["lift_bearing"]) < 1e-12
    assert abs(ang["angle_sum"]) < 1e-12
    assert sol.theta10 == sol.theta3 - G.beta5


def test_ik_unreachable_height_names_stage():
    with pytest.raises(WorkspaceError) as exc:
        inverse_kinematics(TaskTarget(0.0, 1e5), G)
    assert exc.value.stage == "arm angle from blade height"
    assert "arm angle" in str(exc.value)


def test_ik_non_finite_target():
    with pytest.raises(WorkspaceError) as exc:
        inverse_kinematics(TaskTarget(float("nan"), 0.0), G)
    assert exc.value.stage == "input"


def test_ik_stroke_check():
    # reachable by the linkage but beyond the lift cylinder's stroke
    target = TaskTarget(0.0, 1800.0)
    sol = inverse_kinematics(target, G, check_stroke=False)
    assert sol.extensions.s1 > G.stroke_lift[1]
    with pytest.raises(StrokeError):
        inverse_kinematics(target, G)


def test_alternate_branches_are_validated():
    t = TaskTarget(-0.3, 150.0)
    for kw in ({"supplementary": True}, {"elbow": True}):
        try:
            sol = inverse_kinematics(t, G, check_stroke=False, **kw)
        except WorkspaceError as exc:
            assert exc.stage in ("branch check", "lift cylinder loop",
                                 "bucket four-bar (law of cosines)")
        else:
            assert max(abs(v) for v in loop_residuals(sol, G).values()) < 1e-6


def test_fk_stroke_and_assembly_errors():
    with pytest.raises(StrokeError):
        forward_kinematics(CylinderExtensions(100.0, 1300.0), G)
    with pytest.raises((AssemblyError, WorkspaceError)):
        forward_kinematics(CylinderExtensions(100.0, 5000.0), G, check_stroke=False)


def test_fk_is_deterministic():
    ext = CylinderExtensions(1500.0, 1300.0)
    a = forward_kinematics(ext, G)
    b = forward_kinematics(ext, G)
    assert a == b


def test_extension_offsets():
    g = G.with_(l17=100.0, l18=50.0, stroke_lift=(1290.0, 1530.0), stroke_tilt=(1150.0, 1350.0))
    base = inverse_kinematics(TaskTarget(-0.3, 150.0), G)
    off = inverse_kinematics(TaskTarget(-0.3, 150.0), g)
    assert off.extensions.s_lift == pytest.approx(base.extensions.s_lift, abs=1e-9)
    assert off.extensions.s1 == pytest.approx(base.extensions.s1 - 100.0, abs=1e-9)
    ext = CylinderExtensions.from_lengths(1500.0, 1300.0, g)
    assert (ext.s1, ext.s2, ext.s_lift, ext.s_tilt) == (1400.0, 1250.0, 1500.0, 1300.0)


def test_geometry_validation():
    with pytest.raises(ValidationError):
        LinkageGeometry(l3=-1.0)
    with pytest.raises(ValidationError):
        LinkageGeometry(l17=-1.0)
    with pytest.raises(ValidationError):
        LinkageGeometry(stroke_lift=(10.0, 5.0))
    with pytest.raises(ValidationError):
        LinkageGeometry(beta0=float("inf"))
    with pytest.raises(ValidationError):
        LinkageGeometry(masses={"bucket": 0.0})
    assert hash(LinkageGeometry()) == hash(G) and LinkageGeometry() == G


def test_body_frame_shift():
    g = G.with_(p0=(10.0, -5.0))
    assert to_body_frame((1.0, 2.0), g) == (11.0, -3.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(G.stroke_lift[0], G.stroke_lift[1]), st.floats(G.stroke_tilt[0], G.stroke_tilt[1]))
def test_round_trip_property(s1, s2):
    tgt, sol = forward_kinematics(CylinderExtensions(s1, s2), G)
    back = inverse_kinematics(tgt, G)
    assert back.extensions.s1 == pytest.approx(s1, abs=1e-9)
    assert back.extensions.s2 == pytest.approx(s2, abs=1e-9)


def test_blade_height_rises_with_lift_stroke():
    rng = np.random.default_rng(3)
    (a, b), (c, d) = G.stroke_lift, G.stroke_tilt
    h = 1e-3
    for s1, s2 in zip(rng.uniform(a + 20, b - 20, 100), rng.uniform(c + 20, d - 20, 100)):
        lo, _ = forward_kinematics(CylinderExtensions(s1 - h, s2), G)
        hi, _ = forward_kinematics(CylinderExtensions(s1 + h, s2), G)
        assert (hi.y_p8 - lo.y_p8) / (2 * h) > 0
