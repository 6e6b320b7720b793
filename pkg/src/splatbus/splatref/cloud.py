"""Gaussian cloud container, PLY ingestion, and rigid transforms.

The on-disk layout follows the de-facto splat asset format: binary
little-endian PLY, one vertex per Gaussian with fields x,y,z, f_dc_0..2,
opacity, scale_0..2, rot_0..3.  Stored values are the optimizer's raw
parameters: opacity is a logit, scales are logs, the quaternion is
unnormalized and scalar-first (w,x,y,z).  Loading maps everything into
plain units (opacity in [0,1], positive scales, unit xyzw quaternions).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from splatbus import geometry

SH_C0 = 0.28209479177387814  # DC spherical-harmonic basis constant

_REQUIRED_FIELDS = (
    "x",
    "y",
    "z",
    "f_dc_0",
    "f_dc_1",
    "f_dc_2",
    "opacity",
    "scale_0",
    "scale_1",
    "scale_2",
    "rot_0",
    "rot_1",
    "rot_2",
    "rot_3",
)

_PLY_TYPES = {
    "float": "<f4",
    "float32": "<f4",
    "double": "<f8",
    "float64": "<f8",
    "char": "<i1",
    "int8": "<i1",
    "uchar": "<u1",
    "uint8": "<u1",
    "short": "<i2",
    "int16": "<i2",
    "ushort": "<u2",
    "uint16": "<u2",
    "int": "<i4",
    "int32": "<i4",
    "uint": "<u4",
    "uint32": "<u4",
}


class PlyParseError(ValueError):
    pass


class UnsupportedAssetError(ValueError):
    pass


@dataclass
class GaussianCloud:
    means: np.ndarray  # (N, 3)
    scales: np.ndarray  # (N, 3), > 0
    rotations: np.ndarray  # (N, 4) unit quaternions (x, y, z, w)
    opacities: np.ndarray  # (N,), in [0, 1]
    colors: np.ndarray  # (N, 3) linear RGB in [0, 1]

    @property
    def count(self) -> int:
        return self.means.shape[0]

    def validate(self) -> None:
        n = self.count
        shapes = {
            "means": (self.means.shape, (n, 3)),
            "scales": (self.scales.shape, (n, 3)),
            "rotations": (self.rotations.shape, (n, 4)),
            "opacities": (self.opacities.shape, (n,)),
            "colors": (self.colors.shape, (n, 3)),
        }
        for name, (got, want) in shapes.items():
            if got != want:
                raise ValueError(f"{name} shape {got} != {want}")
        if n == 0:
            return
        if np.any(self.scales <= 0):
            raise ValueError("scales must be > 0")
        if np.any(self.opacities < 0) or np.any(self.opacities > 1):
            raise ValueError("opacities must be in [0, 1]")
        norms = np.linalg.norm(self.rotations, axis=1)
        if np.any(np.abs(norms - 1.0) > geometry.QUAT_NORM_TOL):
            raise ValueError("rotations must be unit quaternions")

    @classmethod
    def empty(cls) -> "GaussianCloud":
        return cls(
            means=np.zeros((0, 3)),
            scales=np.zeros((0, 3)),
            rotations=np.zeros((0, 4)),
            opacities=np.zeros(0),
            colors=np.zeros((0, 3)),
        )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _logit(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 1e-7, 1.0 - 1e-7)
    return np.log(p / (1.0 - p))


def _parse_header(f) -> tuple:
    line = f.readline()
    if line.strip() != b"ply":
        raise PlyParseError("not a PLY file")
    fmt = None
    count = None
    props = []
    element = None
    while True:
        line = f.readline()
        if not line:
            raise PlyParseError("unexpected EOF in header")
        tokens = line.decode("ascii", "replace").strip().split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            fmt = tokens[1]
        elif tokens[0] == "element":
            element = tokens[1]
            if element == "vertex":
                if count is not None:
                    raise PlyParseError("duplicate vertex element")
                count = int(tokens[2])
            elif count is None:
                raise UnsupportedAssetError("vertex must be the first element")
        elif tokens[0] == "property":
            if element != "vertex":
                continue
            if tokens[1] == "list":
                raise UnsupportedAssetError("list properties are not supported")
            if tokens[1] not in _PLY_TYPES:
                raise PlyParseError(f"unknown property type '{tokens[1]}'")
            props.append((tokens[2], _PLY_TYPES[tokens[1]]))
        elif tokens[0] == "end_header":
            break
    if fmt != "binary_little_endian":
        raise UnsupportedAssetError(f"unsupported PLY format '{fmt}'")
    if count is None or not props:
        raise PlyParseError("header has no vertex element")
    return count, props


def load_ply(path) -> GaussianCloud:
    """Load a splat PLY; raises UnsupportedAssetError when fields are missing."""
    with open(path, "rb") as f:
        count, props = _parse_header(f)
        names = [name for name, _ in props]
        missing = [name for name in _REQUIRED_FIELDS if name not in names]
        if missing:
            raise UnsupportedAssetError(f"PLY is missing fields: {', '.join(missing)}")
        dtype = np.dtype(props)
        data = np.frombuffer(f.read(count * dtype.itemsize), dtype=dtype, count=count)
        if data.shape[0] != count:
            raise PlyParseError(f"expected {count} vertices, file truncated")

    means = np.stack([data["x"], data["y"], data["z"]], axis=1).astype(np.float64)
    colors = np.clip(
        0.5 + SH_C0 * np.stack([data["f_dc_0"], data["f_dc_1"], data["f_dc_2"]], axis=1), 0.0, 1.0
    )
    opacities = _sigmoid(np.asarray(data["opacity"], dtype=np.float64))
    scales = np.exp(
        np.stack([data["scale_0"], data["scale_1"], data["scale_2"]], axis=1).astype(np.float64)
    )
    # stored scalar-first (w,x,y,z); internal order is (x,y,z,w)
    quats_wxyz = np.stack([data["rot_0"], data["rot_1"], data["rot_2"], data["rot_3"]], axis=1).astype(
        np.float64
    )
    norms = np.linalg.norm(quats_wxyz, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise PlyParseError("zero-norm rotation quaternion")
    quats_wxyz = quats_wxyz / norms
    rotations = quats_wxyz[:, [1, 2, 3, 0]]

    cloud = GaussianCloud(
        means=means, scales=scales, rotations=rotations, opacities=opacities, colors=colors
    )
    cloud.validate()
    return cloud


def write_ply(path, cloud: GaussianCloud) -> None:
    """Write a cloud back to the splat PLY layout (inverse of load_ply)."""
    cloud.validate()
    n = cloud.count
    fields = [
        ("x", "<f4"),
        ("y", "<f4"),
        ("z", "<f4"),
        ("f_dc_0", "<f4"),
        ("f_dc_1", "<f4"),
        ("f_dc_2", "<f4"),
        ("opacity", "<f4"),
        ("scale_0", "<f4"),
        ("scale_1", "<f4"),
        ("scale_2", "<f4"),
        ("rot_0", "<f4"),
        ("rot_1", "<f4"),
        ("rot_2", "<f4"),
        ("rot_3", "<f4"),
    ]
    data = np.zeros(n, dtype=np.dtype(fields))
    data["x"], data["y"], data["z"] = cloud.means.T
    f_dc = (cloud.colors - 0.5) / SH_C0
    data["f_dc_0"], data["f_dc_1"], data["f_dc_2"] = f_dc.T
    data["opacity"] = _logit(np.asarray(cloud.opacities, dtype=np.float64))
    log_scales = np.log(cloud.scales)
    data["scale_0"], data["scale_1"], data["scale_2"] = log_scales.T
    quats_wxyz = cloud.rotations[:, [3, 0, 1, 2]]
    data["rot_0"], data["rot_1"], data["rot_2"], data["rot_3"] = quats_wxyz.T

    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {name}" for name, _ in fields]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(data.tobytes())


def transform_cloud(cloud: GaussianCloud, object_pose: geometry.Pose, scale: float = 1.0) -> GaussianCloud:
    """Apply a rigid transform plus uniform scale to every Gaussian.

    Means are rotated, scaled, and translated; per-Gaussian rotations are
    left-multiplied by the pose rotation; scales multiply by the uniform
    factor, so full covariances transform consistently.
    """
    if scale <= 0.0:
        raise ValueError(f"scale must be > 0, got {scale}")
    R, t = geometry.pose_to_world_rt(object_pose)
    q_pose = geometry.mat_to_quat(R)
    means = scale * (cloud.means @ R.T) + t
    rotations = np.empty_like(cloud.rotations)
    for i in range(cloud.count):
        rotations[i] = geometry.quat_mul(q_pose, cloud.rotations[i])
    return GaussianCloud(
        means=means,
        scales=scale * cloud.scales,
        rotations=rotations,
        opacities=cloud.opacities.copy(),
        colors=cloud.colors.copy(),
    )
