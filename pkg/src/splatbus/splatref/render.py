"""CPU splat rasterizer: project 3D Gaussians and composite front-to-back.

Fidelity target is the compositing math, not throughput: splats are globally
sorted by camera depth (stable tie-break on input index) and accumulated in
float64, so the output is deterministic and permutation-invariant.  Pixels
are sampled at integer coordinates; a splat touches every pixel of the
tile_size-aligned box around its 3-sigma screen extent, with contributions
below alpha_threshold skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from splatbus import geometry
from splatbus.splatref.cloud import GaussianCloud

COV_DILATION = 0.3  # low-pass bias added to the 2D covariance diagonal
ALPHA_CLAMP = 0.99
TRANSMITTANCE_FLOOR = 1e-4


@dataclass
class RenderSettings:
    width: int
    height: int
    fov_y: float = geometry.DEFAULT_FOV_Y
    near: float = 0.01
    far: float = 1000.0
    alpha_threshold: float = 1.0 / 255.0
    tile_size: int = 16
    background: tuple = (0.0, 0.0, 0.0)

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"bad image size {self.width}x{self.height}")
        if not (0.0 < self.near < self.far):
            raise ValueError(f"need 0 < near < far, got {self.near}, {self.far}")
        t = self.tile_size
        if t <= 0 or (t & (t - 1)) != 0:
            raise ValueError(f"tile_size must be a power of two, got {t}")


@dataclass
class RenderOutput:
    color: np.ndarray  # (H, W, 4) float32; premultiplied RGB over background, alpha = coverage
    invdepth: np.ndarray  # (H, W) float32, 0 where nothing contributed


@dataclass
class ProjectedSplat:
    center: np.ndarray  # (2,) pixel coordinates
    cov2d: np.ndarray  # (2, 2) screen covariance
    depth: float  # camera-space z


def _quat_to_mats(quats: np.ndarray) -> np.ndarray:
    """(N,4) xyzw quaternions -> (N,3,3) rotation matrices."""
    q = quats / np.linalg.norm(quats, axis=1, keepdims=True)
    x, y, z, w = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((q.shape[0], 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def _project_batch(
    means: np.ndarray,
    scales: np.ndarray,
    rotations: np.ndarray,
    view: geometry.ViewState,
    intr: geometry.Intrinsics,
    near: float,
):
    """Project all Gaussians; returns (centers, cov2d, depths, keep mask)."""
    w2c = np.asarray(view.world_to_camera, dtype=np.float64)
    W = w2c[:3, :3]
    t = w2c[:3, 3]
    cam = means @ W.T + t
    z = cam[:, 2]
    keep = z > near

    # screen covariance: J W Sigma3D W^T J^T + dilation
    R = _quat_to_mats(rotations)
    M = R * scales[:, None, :]
    sigma_world = np.einsum("nij,nkj->nik", M, M)
    sigma_cam = np.einsum("ij,njk,lk->nil", W, sigma_world, W)

    zs = np.where(keep, z, 1.0)  # dummy for culled rows
    J = np.zeros((means.shape[0], 2, 3))
    J[:, 0, 0] = intr.fx / zs
    J[:, 0, 2] = -intr.fx * cam[:, 0] / (zs * zs)
    J[:, 1, 1] = intr.fy / zs
    J[:, 1, 2] = -intr.fy * cam[:, 1] / (zs * zs)
    cov2d = np.einsum("nij,njk,nlk->nil", J, sigma_cam, J)
    cov2d[:, 0, 0] += COV_DILATION
    cov2d[:, 1, 1] += COV_DILATION

    centers = np.stack(
        [intr.fx * cam[:, 0] / zs + intr.cx, intr.fy * cam[:, 1] / zs + intr.cy], axis=1
    )

    # viewport cull on the 3-sigma extent
    rx = 3.0 * np.sqrt(cov2d[:, 0, 0])
    ry = 3.0 * np.sqrt(cov2d[:, 1, 1])
    keep &= centers[:, 0] + rx >= 0.0
    keep &= centers[:, 0] - rx <= view.width - 1.0
    keep &= centers[:, 1] + ry >= 0.0
    keep &= centers[:, 1] - ry <= view.height - 1.0
    return centers, cov2d, z, keep


def project_gaussian(
    mean,
    scale,
    rotation,
    view: geometry.ViewState,
    intr: geometry.Intrinsics,
    near: float = 0.01,
) -> Optional[ProjectedSplat]:
    """Project one Gaussian to (pixel center, 2x2 covariance, depth); None if culled."""
    centers, cov2d, z, keep = _project_batch(
        np.asarray(mean, dtype=np.float64).reshape(1, 3),
        np.asarray(scale, dtype=np.float64).reshape(1, 3),
        np.asarray(rotation, dtype=np.float64).reshape(1, 4),
        view,
        intr,
        near,
    )
    if not keep[0]:
        return None
    return ProjectedSplat(center=centers[0], cov2d=cov2d[0], depth=float(z[0]))


def rasterize(cloud: GaussianCloud, view: geometry.ViewState, settings: RenderSettings) -> RenderOutput:
    """Render the cloud front-to-back into premultiplied color and inverse depth.

    Image geometry (width/height) comes from settings and must match the
    view; the field of view comes from the view (the camera is authoritative
    once clients start streaming poses).
    """
    settings.validate()
    cloud.validate()
    if (view.width, view.height) != (settings.width, settings.height):
        raise ValueError(
            f"view {view.width}x{view.height} != settings {settings.width}x{settings.height}"
        )
    H, W = settings.height, settings.width
    bg = np.asarray(settings.background, dtype=np.float64).reshape(3)

    C = np.zeros((H, W, 3))
    A = np.zeros((H, W))
    D = np.zeros((H, W))
    T = np.ones((H, W))

    if cloud.count > 0:
        fov_y = view.fov_y if view.fov_y else settings.fov_y
        intr = geometry.intrinsics_for(fov_y, W, H)
        centers, cov2d, depths, keep = _project_batch(
            np.asarray(cloud.means, dtype=np.float64),
            np.asarray(cloud.scales, dtype=np.float64),
            np.asarray(cloud.rotations, dtype=np.float64),
            view,
            intr,
            settings.near,
        )
        idx = np.nonzero(keep)[0]
        order = idx[np.lexsort((idx, depths[idx]))]  # front-to-back, ties by input index

        tile = settings.tile_size
        thr = settings.alpha_threshold
        for i in order:
            u, v = centers[i]
            a2, b2, c2 = cov2d[i, 0, 0], cov2d[i, 0, 1], cov2d[i, 1, 1]
            rx = 3.0 * math.sqrt(a2)
            ry = 3.0 * math.sqrt(c2)
            x0 = max(0, int(math.floor((u - rx) / tile)) * tile)
            x1 = min(W, int(math.ceil((u + rx + 1) / tile)) * tile)
            y0 = max(0, int(math.floor((v - ry) / tile)) * tile)
            y1 = min(H, int(math.ceil((v + ry + 1) / tile)) * tile)
            if x0 >= x1 or y0 >= y1:
                continue
            det = a2 * c2 - b2 * b2
            if det <= 0.0:
                continue  # numerically degenerate; dilation makes this unreachable
            ia = c2 / det
            ib = -b2 / det
            ic = a2 / det

            dx = np.arange(x0, x1, dtype=np.float64) - u
            dy = np.arange(y0, y1, dtype=np.float64) - v
            q = (
                ia * dx[None, :] ** 2
                + 2.0 * ib * dy[:, None] * dx[None, :]
                + ic * dy[:, None] ** 2
            )
            alpha = np.minimum(ALPHA_CLAMP, cloud.opacities[i] * np.exp(-0.5 * q))
            Tbb = T[y0:y1, x0:x1]
            m = (alpha >= thr) & (Tbb > TRANSMITTANCE_FLOOR)
            if not m.any():
                continue
            alpha = np.where(m, alpha, 0.0)
            w = alpha * Tbb
            C[y0:y1, x0:x1] += w[:, :, None] * cloud.colors[i]
            A[y0:y1, x0:x1] += w
            D[y0:y1, x0:x1] += w / depths[i]
            Tbb *= 1.0 - alpha

    rgb = C + (1.0 - A)[:, :, None] * bg
    color = np.empty((H, W, 4), dtype=np.float32)
    color[:, :, :3] = rgb
    color[:, :, 3] = A
    return RenderOutput(color=color, invdepth=D.astype(np.float32))
