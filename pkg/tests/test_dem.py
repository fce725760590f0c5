import numpy as np
import pytest

from dem_oracle import reference_forces
from loadertwin.errors import ExtentTooSmall, UnstableStep, ValidationError
from loadertwin.terrain import dem
from loadertwin.terrain.contact import POST_CALIBRATION, TerrainParams

P = POST_CALIBRATION


@pytest.fixture(scope="module")
def small_bed():
    return dem.fill_bed((1.0, 0.4), P, 2)


def _digging(bed, steps=50):
    st = bed.copy()
    st.bucket = dem.DEFAULT_BUCKET.moved((0.5, -0.15, -0.5), (0.5, 0.0, 0.2))
    dt = dem.stable_dt(P)
    for _ in range(steps):
        st = dem.step(st, dt, P)
    return st, dt


def test_kernel_matches_bruteforce_oracle(small_bed):
    st, dt = _digging(small_bed)
    f = dem.compute_forces(st, P, dt)
    force, torque, reaction, keys, springs = reference_forces(st, P, dt)
    assert np.array_equal(f.keys, keys)
    assert np.max(np.abs(f.force - force)) <= 1e-12 * np.max(np.abs(force))
    assert np.max(np.abs(f.torque - torque)) <= 1e-12 * np.max(np.abs(torque))
    assert np.max(np.abs(f.reaction - reaction)) <= 1e-12 * np.max(np.abs(force))
    assert np.max(np.abs(f.springs - springs)) <= 1e-15
    assert np.hypot(*f.reaction) > 0  # the bucket is in the bed


def test_advance_matches_repeated_step(small_bed):
    a, dt = _digging(small_bed, 0)
    b = a.copy()
    for _ in range(40):
        a = dem.step(a, dt, P)
    pose_to = tuple(np.array(b.bucket.pose) + 40 * dt * np.array(b.bucket.pose_vel))
    b, acc, done = dem.advance(b, P, dt, 40, pose_to=pose_to)
    assert done == 40
    assert np.allclose(a.pos, b.pos, rtol=0, atol=1e-12)
    assert np.allclose(a.vel, b.vel, rtol=0, atol=1e-9)
    assert np.allclose(a.bucket.pose, b.bucket.pose, atol=1e-12)
    assert np.array_equal(a.contact_keys, b.contact_keys)


def test_neighbour_list_is_sorted_and_complete(small_bed):
    st = small_bed.copy()
    i, j = dem.neighbour_pairs(st)
    assert np.all(i < j)
    assert np.all(np.diff(i * st.n + j) > 0)
    skin = dem.NEIGHBOUR_SKIN * st.radius.max()
    d = np.hypot(*(st.pos[:, None, :] - st.pos[None, :, :]).transpose(2, 0, 1))
    ii, jj = np.nonzero(np.triu(d < st.radius[:, None] + st.radius[None, :] + skin, 1))
    assert set(zip(ii.tolist(), jj.tolist())) <= set(zip(i.tolist(), j.tolist()))


def test_internal_forces_cancel(small_bed):
    st, dt = _digging(small_bed, 5)
    for _ in range(20):
        st = dem.step(st, dt, P)
        assert np.max(np.abs(st.internal_force_sum)) < 1e-9 * st.max_contact_force


def test_determinism(small_bed):
    a, _ = _digging(small_bed, 30)
    b, _ = _digging(small_bed, 30)
    assert np.array_equal(a.pos, b.pos) and np.array_equal(a.vel, b.vel)
    c = dem.fill_bed((1.0, 0.4), P, 2)
    assert np.array_equal(c.pos, small_bed.pos)


def test_fill_bed_shape(small_bed):
    st = small_bed
    assert st.n > 50
    r = P.radius
    assert np.all(st.radius >= r * 0.9 - 1e-15) and np.all(st.radius <= r * 1.1 + 1e-15)
    assert np.all(st.pos[:, 1] - st.radius >= -st.depth - 0.05 * r)  # Hertz overlap with the floor
    assert np.all(st.pos[:, 1] <= 0.0)
    assert dem.max_speed(st) < 1e-3
    other = dem.fill_bed((1.0, 0.4), P, 3)
    assert not np.array_equal(other.pos, st.pos)


def test_fill_bed_extent_too_small():
    with pytest.raises(ExtentTooSmall):
        dem.fill_bed((0.01, 0.4), P, 0)


def test_unstable_step_detected():
    p = TerrainParams(young_modulus=1e9)
    st = dem.make_state([[0.5, -0.4], [0.5 + 0.05, -0.4]], [0.03, 0.03], p, 1.0, 0.5)
    with pytest.raises(UnstableStep):
        for _ in range(50):
            st = dem.step(st, 1e-2, p)


def test_make_state_validation():
    with pytest.raises(ValidationError):
        dem.make_state([[0, 0]], [0.0], P, 1.0, 1.0)


def test_bucket_profile_validation():
    with pytest.raises(ValidationError):
        dem.BucketProfile(vertices=((0.0, 0.0),))
    with pytest.raises(ValidationError):
        dem.BucketProfile(vertices=((0.0, 0.0), (0.0, 0.0), (1.0, 0.0)))
    with pytest.raises(ValidationError):
        dem.BucketProfile(vertices=((0, 0), (1, 1), (1, 0), (0, 1)))
    b = dem.BucketProfile(vertices=((0.0, 0.0), (1.0, 0.0))).moved((1.0, 2.0, np.pi / 2))
    assert np.allclose(b.world_vertices(), [[1.0, 2.0], [1.0, 3.0]])


def test_stable_dt_scaling():
    a = dem.stable_dt(TerrainParams(young_modulus=1e6))
    b = dem.stable_dt(TerrainParams(young_modulus=4e6))
    assert b == pytest.approx(a / 2)


def test_resting_particle_carries_its_weight():
    p = TerrainParams(young_modulus=1e7)
    r = 0.03
    st = dem.make_state([[0.5, -0.5 + r]], [r], p, 1.0, 0.5)
    st = dem.settle_bed(st, p, speed=1e-6, max_steps=200000)
    f = dem.compute_forces(st, p, dem.stable_dt(p))
    assert abs(f.force[0, 1]) < 1e-3 * st.mass[0] * dem.GRAVITY
