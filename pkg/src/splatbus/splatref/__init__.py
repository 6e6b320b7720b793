"""Deterministic CPU reference rasterizer for 3D Gaussian clouds."""

from splatbus.splatref.cloud import (
    GaussianCloud,
    PlyParseError,
    UnsupportedAssetError,
    load_ply,
    transform_cloud,
    write_ply,
)
from splatbus.splatref.render import (
    ProjectedSplat,
    RenderOutput,
    RenderSettings,
    project_gaussian,
    rasterize,
)

__all__ = [
    "GaussianCloud",
    "PlyParseError",
    "UnsupportedAssetError",
    "load_ply",
    "write_ply",
    "transform_cloud",
    "ProjectedSplat",
    "RenderOutput",
    "RenderSettings",
    "project_gaussian",
    "rasterize",
]
