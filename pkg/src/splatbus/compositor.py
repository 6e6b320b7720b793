"""Depth-aware blending of a splat layer with a mesh layer.

Each layer is premultiplied RGBA color plus linear depth (far sentinel where
the layer is empty).  Per pixel, the nearer layer is composited in front of
the farther one resolved over the background; ties go to the splat layer.
With both layers fully opaque this reduces to a plain per-pixel depth test,
and an empty layer degrades to ordinary over-compositing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LayerImage:
    color: np.ndarray  # (H, W, 4) float32, premultiplied alpha
    depth: np.ndarray  # (H, W) float32 linear depth, far sentinel where empty

    def validate(self) -> None:
        if self.color.ndim != 3 or self.color.shape[2] != 4:
            raise ValueError(f"color must be (H, W, 4), got {self.color.shape}")
        if self.depth.shape != self.color.shape[:2]:
            raise ValueError(f"depth shape {self.depth.shape} != color {self.color.shape[:2]}")


@dataclass
class CompositeCheckReport:
    total_pixels: int
    opaque_pixels: int
    flagged_pixels: int
    max_deviation: float

    @property
    def ok(self) -> bool:
        return self.flagged_pixels == 0


def composite_depth_aware(splat: LayerImage, mesh: LayerImage, background=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Blend two layers by per-pixel depth; returns an opaque (H, W, 4) image.

    Where the splat layer is at or in front of the mesh depth:
        out = splat.color over (mesh.color over background)
    otherwise:
        out = mesh.color over (splat.color over background)
    """
    splat.validate()
    mesh.validate()
    if splat.color.shape != mesh.color.shape:
        raise ValueError(f"layer shapes differ: {splat.color.shape} vs {mesh.color.shape}")
    bg = np.asarray(background, dtype=np.float64).reshape(3)

    s_rgb = np.asarray(splat.color[:, :, :3], dtype=np.float64)
    s_a = np.asarray(splat.color[:, :, 3:4], dtype=np.float64)
    m_rgb = np.asarray(mesh.color[:, :, :3], dtype=np.float64)
    m_a = np.asarray(mesh.color[:, :, 3:4], dtype=np.float64)

    mesh_resolved = m_rgb + (1.0 - m_a) * bg
    splat_in_front = s_rgb + (1.0 - s_a) * mesh_resolved
    splat_resolved = s_rgb + (1.0 - s_a) * bg
    mesh_in_front = m_rgb + (1.0 - m_a) * splat_resolved

    splat_wins = (splat.depth <= mesh.depth)[:, :, None]
    out = np.empty(splat.color.shape, dtype=np.float32)
    out[:, :, :3] = np.where(splat_wins, splat_in_front, mesh_in_front)
    out[:, :, 3] = 1.0
    return out


def composite_commutes_check(splat: LayerImage, mesh: LayerImage, tol: float = 1e-6) -> CompositeCheckReport:
    """Verify the opaque limit: alpha=1 everywhere must equal a pure z-test.

    Only pixels where both layers are fully opaque are checked; any of them
    deviating from the winner-takes-all depth test by more than ``tol`` is
    flagged.
    """
    splat.validate()
    mesh.validate()
    out = composite_depth_aware(splat, mesh, background=(0.0, 0.0, 0.0))
    splat_wins = (splat.depth <= mesh.depth)[:, :, None]
    ztest = np.where(splat_wins, splat.color[:, :, :3], mesh.color[:, :, :3])
    opaque = (splat.color[:, :, 3] >= 1.0) & (mesh.color[:, :, 3] >= 1.0)
    deviation = np.abs(out[:, :, :3].astype(np.float64) - ztest).max(axis=2)
    deviation = np.where(opaque, deviation, 0.0)
    flagged = int(np.count_nonzero(deviation > tol))
    return CompositeCheckReport(
        total_pixels=int(opaque.size),
        opaque_pixels=int(np.count_nonzero(opaque)),
        flagged_pixels=flagged,
        max_deviation=float(deviation.max(initial=0.0)),
    )
