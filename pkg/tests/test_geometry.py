import math

import numpy as np
import pytest

from splatbus import geometry as geo


def random_unit_quat(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def test_identity_pose_gs_convention():
    view = geo.client_pose_to_view(geo.Pose.identity(geo.GS_RH_YDOWN), math.radians(60), 64, 64)
    assert np.allclose(view.world_to_camera, np.eye(4), atol=1e-12)


def test_identity_pose_unity_convention():
    # conjugation by diag(1,-1,1) leaves the identity rotation unchanged, so
    # the identity client pose maps to the identity view (det(R) stays +1)
    view = geo.client_pose_to_view(geo.Pose.identity(geo.UNITY_LH_YUP), math.radians(60), 64, 64)
    R = view.world_to_camera[:3, :3]
    assert abs(np.linalg.det(R) - 1.0) < 1e-9
    assert np.allclose(view.world_to_camera, np.eye(4), atol=1e-12)


def test_unity_translation_flips_y():
    pose = geo.Pose(np.array([1.0, 2.0, 3.0]), np.array([0.0, 0.0, 0.0, 1.0]), geo.UNITY_LH_YUP)
    view = geo.client_pose_to_view(pose, math.radians(60), 64, 64)
    cam_pos = -view.world_to_camera[:3, :3].T @ view.world_to_camera[:3, 3]
    assert np.allclose(cam_pos, [1.0, -2.0, 3.0], atol=1e-12)


def test_basis_change_is_involution_and_flips_handedness():
    M = np.diag([1.0, -1.0, 1.0])
    assert np.linalg.det(M) == -1.0
    rng = np.random.default_rng(7)
    for _ in range(50):
        R = geo.quat_to_mat(random_unit_quat(rng))
        p = rng.normal(size=3)
        assert np.allclose(M @ (M @ R @ M) @ M, R, atol=1e-12)
        assert np.allclose(M @ (M @ p), p, atol=1e-12)


@pytest.mark.parametrize("convention", [geo.UNITY_LH_YUP, geo.GS_RH_YDOWN])
def test_pose_view_round_trip_1000(convention):
    rng = np.random.default_rng(42)
    for _ in range(1000):
        q = random_unit_quat(rng)
        pose = geo.Pose(rng.normal(size=3) * 10.0, q, convention)
        view = geo.client_pose_to_view(pose, math.radians(50), 320, 240)
        R = view.world_to_camera[:3, :3]
        assert abs(np.linalg.det(R) - 1.0) < 1e-9
        assert np.allclose(R.T @ R, np.eye(3), atol=1e-9)
        back = geo.view_to_client_pose(view, convention)
        assert np.allclose(back.position, pose.position, atol=1e-9)
        # double cover: q and -q describe the same rotation
        dot = abs(float(np.dot(back.rotation, q)))
        assert abs(dot - 1.0) < 1e-9


def test_quaternion_double_cover():
    rng = np.random.default_rng(3)
    q = random_unit_quat(rng)
    pose_a = geo.Pose(np.zeros(3), q, geo.GS_RH_YDOWN)
    pose_b = geo.Pose(np.zeros(3), -q, geo.GS_RH_YDOWN)
    va = geo.client_pose_to_view(pose_a, 1.0, 8, 8)
    vb = geo.client_pose_to_view(pose_b, 1.0, 8, 8)
    assert np.allclose(va.world_to_camera, vb.world_to_camera, atol=1e-12)


def test_non_unit_quaternion_rejected():
    pose = geo.Pose(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.5]), geo.GS_RH_YDOWN)
    with pytest.raises(geo.MalformedPoseError):
        geo.client_pose_to_view(pose, 1.0, 8, 8)


def test_malformed_view_rejected():
    bad = np.eye(4)
    bad[0, 0] = 2.0
    with pytest.raises(geo.MalformedViewError):
        geo.view_to_client_pose(geo.ViewState(bad, 1.0, 8, 8))


def test_invdepth_basics():
    out = geo.invdepth_to_linear(np.array([0.5, 0.0, 2.0]), far_sentinel=1e10)
    assert out[0] == 2.0
    assert out[1] == 1e10
    assert out[2] == 0.5


def test_invdepth_negative_rejected():
    with pytest.raises(geo.MalformedDepthError):
        geo.invdepth_to_linear(np.array([-0.1]))
    with pytest.raises(geo.MalformedDepthError):
        geo.linear_to_invdepth(np.array([0.0]))


def test_linear_to_invdepth_sentinel():
    out = geo.linear_to_invdepth(np.array([2.0, 1e10, 5e10]), far_sentinel=1e10)
    assert out[0] == 0.5
    assert out[1] == 0.0
    assert out[2] == 0.0


def test_depth_round_trip_log_grid():
    z = np.logspace(-3, 3, 4001)
    back = geo.invdepth_to_linear(geo.linear_to_invdepth(z))
    assert np.all(np.abs(back - z) / z < 1e-6)
    inv = np.logspace(-3, 3, 4001)
    back_inv = geo.linear_to_invdepth(geo.invdepth_to_linear(inv))
    assert np.all(np.abs(back_inv - inv) / inv < 1e-6)


def test_background_sentinel_exact():
    linear = geo.invdepth_to_linear(np.zeros((4, 4)), far_sentinel=1e10)
    assert np.all(linear == 1e10)
    assert np.all(geo.linear_to_invdepth(linear, far_sentinel=1e10) == 0.0)


def test_intrinsics_from_fov():
    intr = geo.intrinsics_for(math.radians(60), 640, 480)
    assert intr.fy == pytest.approx(480 / (2 * math.tan(math.radians(30))))
    assert intr.fx == intr.fy
    assert intr.cx == 320 and intr.cy == 240


def test_projection_on_axis():
    intr = geo.Intrinsics(fx=100.0, fy=100.0, cx=32.0, cy=24.0)
    P = geo.projection_matrix(intr, near=0.1, far=100.0)
    for z in (0.1, 1.0, 7.3, 99.0):
        clip = P @ np.array([0.0, 0.0, z, 1.0])
        assert clip[0] / clip[3] == pytest.approx(32.0)
        assert clip[1] / clip[3] == pytest.approx(24.0)
    near_clip = P @ np.array([0.0, 0.0, 0.1, 1.0])
    assert near_clip[2] / near_clip[3] == pytest.approx(0.0, abs=1e-12)
    far_clip = P @ np.array([0.0, 0.0, 100.0, 1.0])
    assert far_clip[2] / far_clip[3] == pytest.approx(1.0)


def test_projection_matches_pinhole_oracle():
    rng = np.random.default_rng(11)
    intr = geo.Intrinsics(fx=222.0, fy=222.0, cx=64.0, cy=48.0)
    P = geo.projection_matrix(intr, near=0.05, far=500.0)
    for _ in range(100):
        p = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 400.0)])
        clip = P @ np.append(p, 1.0)
        u, v = clip[0] / clip[3], clip[1] / clip[3]
        # brute-force pinhole: u = fx*x/z + cx
        assert u == pytest.approx(intr.fx * p[0] / p[2] + intr.cx, rel=1e-12)
        assert v == pytest.approx(intr.fy * p[1] / p[2] + intr.cy, rel=1e-12)


def test_projection_degenerate_bounds():
    intr = geo.Intrinsics(100, 100, 32, 32)
    with pytest.raises(ValueError):
        geo.projection_matrix(intr, near=1.0, far=1.0)
    with pytest.raises(ValueError):
        geo.projection_matrix(intr, near=-1.0, far=10.0)
