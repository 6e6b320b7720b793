"""Coordinate-convention and depth conversions between clients and the renderer.

Client frame ("unity_lh_yup"): left-handed, +X right, +Y up, +Z forward.
Renderer frame ("gs_rh_ydown"): right-handed, +X right, +Y down, +Z forward
(the COLMAP-style frame splat rasterizers use).  The two differ by the basis
change M = diag(1, -1, 1), applied to points as p' = M p and to rotations by
conjugation R' = M R M.  M has det -1: it flips handedness exactly once, and
applying it twice is the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNITY_LH_YUP = "unity_lh_yup"
GS_RH_YDOWN = "gs_rh_ydown"

DEFAULT_FAR_SENTINEL = 1e10
DEFAULT_FOV_Y = math.radians(60.0)
QUAT_NORM_TOL = 1e-4
INV_EPS = 1e-12

_FLIP_Y = np.diag([1.0, -1.0, 1.0])


class MalformedPoseError(ValueError):
    pass


class MalformedViewError(ValueError):
    pass


class MalformedDepthError(ValueError):
    pass


@dataclass
class Pose:
    """Rigid transform in a named client/renderer convention.

    rotation is a unit quaternion stored (x, y, z, w).
    """

    position: np.ndarray
    rotation: np.ndarray
    convention: str = GS_RH_YDOWN

    @classmethod
    def identity(cls, convention: str = GS_RH_YDOWN) -> "Pose":
        return cls(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]), convention)


@dataclass
class ViewState:
    """Renderer-side camera: world-to-camera transform plus image geometry."""

    world_to_camera: np.ndarray  # 4x4, last row (0,0,0,1)
    fov_y: float  # radians
    width: int
    height: int


@dataclass
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    norm = float(np.linalg.norm(q))
    if abs(norm - 1.0) > QUAT_NORM_TOL:
        raise MalformedPoseError(f"quaternion norm {norm:.6f} not within {QUAT_NORM_TOL} of 1")
    return q / norm


def quat_to_mat(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion (x, y, z, w)."""
    x, y, z, w = np.asarray(q, dtype=np.float64)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def mat_to_quat(R) -> np.ndarray:
    """Quaternion (x, y, z, w) of a rotation matrix, w >= 0."""
    R = np.asarray(R, dtype=np.float64)
    trace = R[0, 0] + R[1, 1] + R[2, 2]
    if trace > 0.0:
        s = math.sqrt(trace + 1.0) * 2.0
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        w = (R[2, 1] - R[1, 2]) / s
        x = 0.25 * s
        y = (R[0, 1] + R[1, 0]) / s
        z = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        w = (R[0, 2] - R[2, 0]) / s
        x = (R[0, 1] + R[1, 0]) / s
        y = 0.25 * s
        z = (R[1, 2] + R[2, 1]) / s
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        w = (R[1, 0] - R[0, 1]) / s
        x = (R[0, 2] + R[2, 0]) / s
        y = (R[1, 2] + R[2, 1]) / s
        z = 0.25 * s
    q = np.array([x, y, z, w])
    if q[3] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def quat_mul(a, b) -> np.ndarray:
    """Hamilton product a*b for quaternions stored (x, y, z, w)."""
    ax, ay, az, aw = np.asarray(a, dtype=np.float64)
    bx, by, bz, bw = np.asarray(b, dtype=np.float64)
    return np.array(
        [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ]
    )


def _check_convention(convention: str) -> None:
    if convention not in (UNITY_LH_YUP, GS_RH_YDOWN):
        raise MalformedPoseError(f"unknown convention '{convention}'")


def pose_to_world_rt(pose: Pose) -> tuple:
    """Rotation matrix and translation of ``pose`` expressed in the renderer frame."""
    _check_convention(pose.convention)
    q = quat_normalize(pose.rotation)
    R = quat_to_mat(q)
    t = np.asarray(pose.position, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(t)):
        raise MalformedPoseError("pose position must be finite")
    if pose.convention == UNITY_LH_YUP:
        R = _FLIP_Y @ R @ _FLIP_Y
        t = _FLIP_Y @ t
    return R, t


def client_pose_to_view(pose: Pose, fov_y: float, width: int, height: int) -> ViewState:
    """Camera pose in a client convention -> renderer ViewState.

    The pose is the camera-to-world transform; the returned matrix is its
    inverse after the basis change into the renderer frame.
    """
    R, t = pose_to_world_rt(pose)
    w2c = np.eye(4)
    w2c[:3, :3] = R.T
    w2c[:3, 3] = -R.T @ t
    return ViewState(world_to_camera=w2c, fov_y=float(fov_y), width=int(width), height=int(height))


def _check_view(view: ViewState) -> np.ndarray:
    w2c = np.asarray(view.world_to_camera, dtype=np.float64)
    if w2c.shape != (4, 4):
        raise MalformedViewError(f"world_to_camera must be 4x4, got {w2c.shape}")
    R = w2c[:3, :3]
    if not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
        raise MalformedViewError("rotation block is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > 1e-9:
        raise MalformedViewError(f"rotation block det {np.linalg.det(R):.2e} != +1")
    if not np.allclose(w2c[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12):
        raise MalformedViewError("last row must be (0,0,0,1)")
    return w2c


def view_to_client_pose(view: ViewState, convention: str = GS_RH_YDOWN) -> Pose:
    """Exact inverse of :func:`client_pose_to_view` up to quaternion sign."""
    _check_convention(convention)
    w2c = _check_view(view)
    R_c2w = w2c[:3, :3].T
    t_c2w = -R_c2w @ w2c[:3, 3]
    if convention == UNITY_LH_YUP:
        R_c2w = _FLIP_Y @ R_c2w @ _FLIP_Y
        t_c2w = _FLIP_Y @ t_c2w
    return Pose(position=t_c2w, rotation=mat_to_quat(R_c2w), convention=convention)


def invdepth_to_linear(inv, far_sentinel: float = DEFAULT_FAR_SENTINEL) -> np.ndarray:
    """Per-pixel 1/z -> linear z; zero (no splat coverage) maps to far_sentinel."""
    inv = np.asarray(inv, dtype=np.float64)
    if not np.all(np.isfinite(inv)):
        raise MalformedDepthError("inverse depth must be finite")
    if np.any(inv < 0.0):
        raise MalformedDepthError("inverse depth must be >= 0")
    out = np.full(inv.shape, float(far_sentinel))
    covered = inv > INV_EPS
    out[covered] = 1.0 / inv[covered]
    return out


def linear_to_invdepth(z, far_sentinel: float = DEFAULT_FAR_SENTINEL) -> np.ndarray:
    """Linear z -> 1/z; anything at or beyond far_sentinel maps to 0."""
    z = np.asarray(z, dtype=np.float64)
    if np.any(~np.isfinite(z)) or np.any(z <= 0.0):
        raise MalformedDepthError("linear depth must be finite and > 0")
    out = np.zeros(z.shape)
    near = z < float(far_sentinel)
    out[near] = 1.0 / z[near]
    return out


def intrinsics_for(fov_y: float, width: int, height: int) -> Intrinsics:
    """Pinhole intrinsics from a vertical field of view."""
    fy = height / (2.0 * math.tan(fov_y / 2.0))
    return Intrinsics(fx=fy, fy=fy, cx=width / 2.0, cy=height / 2.0)


def projection_matrix(intr: Intrinsics, near: float, far: float) -> np.ndarray:
    """Camera space -> (pixel_x*w, pixel_y*w, ndc_depth*w, w) with w = z.

    After the perspective divide, x/w and y/w are pixel coordinates and z/w
    runs from 0 at ``near`` to 1 at ``far``.
    """
    if not (0.0 < near < far):
        raise ValueError(f"need 0 < near < far, got near={near}, far={far}")
    P = np.zeros((4, 4))
    P[0, 0] = intr.fx
    P[0, 2] = intr.cx
    P[1, 1] = intr.fy
    P[1, 2] = intr.cy
    P[2, 2] = far / (far - near)
    P[2, 3] = -far * near / (far - near)
    P[3, 2] = 1.0
    return P
