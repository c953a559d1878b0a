# -*- coding: utf-8 -*-
# -*- mode: python -*-
import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from camsynth import geometry as g


def random_pose(rng):
    R = Rotation.random(random_state=rng).as_matrix()
    return g.CameraPose(R, rng.normal(size=3))


def yaw(deg):
    return g.axis_rotation((0, 1, 0), math.radians(deg))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_pose_rejects_non_rotation():
    with pytest.raises(g.NotARotation):
        g.CameraPose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(g.NotARotation):
        g.CameraPose(np.eye(3) * 1.01, np.zeros(3))


def test_pose_arrays_are_read_only():
    pose = g.CameraPose.identity()
    with pytest.raises(ValueError):
        pose.rotation[0, 0] = 2.0


def test_look_at_rest_convention():
    pose = g.look_at((0, 0, 0), (0, 0, -1), (0, 1, 0))
    assert np.array_equal(pose.rotation, np.eye(3))
    assert np.array_equal(pose.translation, np.zeros(3))


def test_look_at_forward_axis():
    eye = np.array([0.0, 2.0, 5.0])
    pose = g.look_at(eye, (0, 0, 0))
    expected = -eye / np.linalg.norm(eye)
    assert np.allclose(pose.forward, expected, atol=1e-12)
    assert np.max(np.abs(pose.rotation.T @ pose.rotation - np.eye(3))) < 1e-9
    assert np.allclose(pose.center, eye, atol=1e-12)


def test_look_at_degenerate():
    with pytest.raises(g.DegenerateFrame):
        g.look_at((0, 0, 0), (0, 0, -1), (0, 0, -1))
    with pytest.raises(g.DegenerateFrame):
        g.look_at((1, 2, 3), (1, 2, 3))


def test_relative_pose_identity_and_translation():
    a = g.CameraPose(yaw(30), (1.0, 2.0, 3.0))
    assert g.relative_pose(a, a) == g.CameraPose.identity()
    b = g.CameraPose(np.eye(3), (0.0, 0.0, -1.0))
    rel = g.relative_pose(g.CameraPose.identity(), b)
    assert np.array_equal(rel.rotation, np.eye(3))
    assert np.array_equal(rel.translation, [0.0, 0.0, -1.0])


def test_relative_pose_matches_homogeneous_oracle(rng):
    for _ in range(20):
        a, b = random_pose(rng), random_pose(rng)
        rel = g.relative_pose(a, b)
        oracle = b.to_matrix() @ np.linalg.inv(a.to_matrix())
        assert np.max(np.abs(rel.to_matrix() - oracle)) < 1e-12
        back = g.compose_pose(a, rel)
        assert np.max(np.abs(back.to_matrix() - b.to_matrix())) < 1e-12


def test_invert_pose(rng):
    p = random_pose(rng)
    inv = g.invert_pose(p)
    assert np.allclose(g.compose_pose(p, inv).to_matrix(), np.eye(4), atol=1e-12)
    assert np.allclose(inv.to_matrix(), np.linalg.inv(p.to_matrix()), atol=1e-12)


def test_project_pinhole():
    intr = g.Intrinsics(100.0, 32.0, 32.0, 64, 64)
    # optical (1, 0, 2) is body (1, 0, -2) for the identity pose
    assert g.project(intr, g.CameraPose.identity(), (1.0, 0.0, -2.0)) == (82.0, 32.0)
    assert g.project(intr, g.CameraPose.identity(), (0.0, 0.0, -7.5)) == (32.0, 32.0)
    # image rows grow downward
    assert g.project(intr, g.CameraPose.identity(), (0.0, 1.0, -2.0))[1] < 32.0


def test_project_behind_camera():
    intr = g.Intrinsics.centered(64, 64, 100.0)
    with pytest.raises(g.BehindCamera):
        g.project(intr, g.CameraPose.identity(), (1.0, 0.0, 0.0))
    with pytest.raises(g.BehindCamera):
        g.project(intr, g.CameraPose.identity(), (0.0, 0.0, 1.0))


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        g.Intrinsics(0.0, 1.0, 1.0, 4, 4)
    with pytest.raises(ValueError):
        g.Intrinsics(10.0, 4.0, 1.0, 4, 4)


def test_plucker_principal_point():
    intr = g.Intrinsics.centered(5, 5, 10.0)
    pm = g.plucker_map(intr, g.CameraPose.identity())
    assert pm.shape == (5, 5)
    assert np.allclose(pm.directions[2, 2], [0.0, 0.0, -1.0])
    assert np.array_equal(pm.moments, np.zeros((5, 5, 3)))
    assert pm.as_array().shape == (5, 5, 6)


def test_plucker_moment_cross_product():
    # camera at (1, 0, 0) facing +z: the central ray has d = (0, 0, 1)
    pose = g.look_at((1.0, 0.0, 0.0), (1.0, 0.0, 5.0))
    pm = g.plucker_map(g.Intrinsics.centered(3, 3, 10.0), pose)
    assert np.allclose(pm.directions[1, 1], [0.0, 0.0, 1.0], atol=1e-12)
    assert np.allclose(pm.moments[1, 1], [0.0, -1.0, 0.0], atol=1e-12)


def test_plucker_incidence(rng):
    # 40 poses of 200 x 125 rays: 10^6 rays in all
    intr = g.Intrinsics.centered(200, 125, 160.0)
    worst_norm, worst_incidence = 0.0, 0.0
    for _ in range(40):
        pm = g.plucker_map(intr, random_pose(rng))
        norms = np.linalg.norm(pm.directions, axis=-1)
        worst_norm = max(worst_norm, np.max(np.abs(norms - 1.0)))
        incidence = np.sum(pm.moments * pm.directions, axis=-1)
        worst_incidence = max(worst_incidence, np.max(np.abs(incidence)))
    assert worst_norm < 1e-9
    assert worst_incidence < 1e-9


def test_plucker_line_invariance(rng):
    intr = g.Intrinsics.centered(16, 16, 20.0)
    pose = random_pose(rng)
    pm = g.plucker_map(intr, pose)
    d = pm.directions[5, 9]
    moved = g.CameraPose.from_center(pose.rotation, pose.center + 2.5 * d)
    pm2 = g.plucker_map(intr, moved)
    assert np.allclose(pm2.directions[5, 9], d, atol=1e-12)
    assert np.allclose(pm2.moments[5, 9], pm.moments[5, 9], atol=1e-9)


def test_pool_plucker(rng):
    intr = g.Intrinsics.centered(16, 12, 20.0)
    pooled = g.pool_plucker(g.plucker_map(intr, random_pose(rng)), 4)
    assert pooled.shape == (3, 4)
    assert np.allclose(np.linalg.norm(pooled.directions, axis=-1), 1.0)
    assert np.max(np.abs(np.sum(pooled.moments * pooled.directions, axis=-1))) < 1e-9
    with pytest.raises(ValueError):
        g.pool_plucker(g.plucker_map(intr, random_pose(rng)), 0)


def test_rotation_angle_basics(rng):
    R = Rotation.random(random_state=rng).as_matrix()
    assert g.rotation_angle(R, R) == 0.0
    assert g.rotation_angle(np.eye(3), yaw(90)) == pytest.approx(math.pi / 2, abs=1e-12)
    assert g.rotation_angle(np.eye(3), yaw(180)) == pytest.approx(math.pi, abs=1e-9)
    with pytest.raises(g.NotARotation):
        g.rotation_angle(np.eye(3), 2 * np.eye(3))


def test_rotation_angle_composition(rng):
    for _ in range(50):
        R = Rotation.random(random_state=rng).as_matrix()
        axis = rng.normal(size=3)
        angle = rng.uniform(0.0, math.pi)
        Rb = R @ g.axis_rotation(axis, angle)
        assert abs(g.rotation_angle(R, Rb) - angle) < 1e-9
        assert abs(g.rotation_angle(R, Rb) - g.rotation_angle(Rb, R)) < 1e-12


def test_interpolate_pose_endpoints(rng):
    a, b = random_pose(rng), random_pose(rng)
    assert g.interpolate_pose(a, b, 0.0) == a
    assert g.interpolate_pose(a, b, 1.0) == b
    with pytest.raises(g.OutOfRange):
        g.interpolate_pose(a, b, 1.5)


def test_interpolate_pose_halfway():
    a = g.CameraPose.identity()
    b = g.CameraPose(yaw(90), np.zeros(3))
    mid = g.interpolate_pose(a, b, 0.5)
    assert np.allclose(mid.rotation, yaw(45), atol=1e-12)


def test_interpolate_pose_antipodal_is_deterministic():
    a = g.CameraPose.identity()
    b = g.CameraPose(yaw(180), np.zeros(3))
    first = g.interpolate_pose(a, b, 0.5)
    second = g.interpolate_pose(a, b, 0.5)
    assert first == second
    angle = g.rotation_angle(first.rotation, np.eye(3))
    assert angle == pytest.approx(math.pi / 2, abs=1e-9)


def test_pose_features(rng):
    a = random_pose(rng)
    assert np.array_equal(g.pose_features(a, a), np.zeros(6))
    step = g.CameraPose(g.axis_rotation((0, 0, 1), 0.25), (0.1, 0.2, 0.3))
    b = g.compose_pose(a, step)
    f = g.pose_features(a, b)
    assert np.allclose(f[:3], [0.0, 0.0, 0.25], atol=1e-9)
    assert np.allclose(f[3:], [0.1, 0.2, 0.3], atol=1e-9)


def test_pose_record(rng):
    pose = random_pose(rng)
    intr = g.Intrinsics.centered(64, 48, 55.0)
    rec = g.pose_record(pose, intr)
    assert set(rec) == {"R", "t", "f_px", "cx", "cy", "w", "h"}
    pose2, intr2 = g.pose_from_record(rec)
    assert pose2 == pose
    assert intr2 == intr
    del rec["f_px"]
    with pytest.raises(ValueError):
        g.pose_from_record(rec)
