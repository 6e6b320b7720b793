"""Debug image export: PPM/PNG for color, 16-bit PGM for depth."""

from __future__ import annotations

import numpy as np
from PIL import Image

DEPTH_VIS_MAX = 100.0


def write_ppm(path, rgb8: np.ndarray) -> None:
    """Binary P6 PPM from a (H, W, 3) uint8 array."""
    rgb8 = np.asarray(rgb8, dtype=np.uint8)
    h, w = rgb8.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(rgb8[:, :, :3].tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.readline().strip() != b"P6":
            raise ValueError("not a binary PPM")
        dims = f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        maxval = int(f.readline())
        if maxval != 255:
            raise ValueError(f"unsupported maxval {maxval}")
        data = np.frombuffer(f.read(w * h * 3), dtype=np.uint8)
    return data.reshape(h, w, 3)


def write_png(path, arr8: np.ndarray) -> None:
    Image.fromarray(np.asarray(arr8, dtype=np.uint8)).save(path, format="PNG")


def depth_to_pgm16_values(depth: np.ndarray, vis_max: float = DEPTH_VIS_MAX) -> np.ndarray:
    """Linear depth -> 16-bit values: round(65535 * clamp(z / vis_max, 0, 1))."""
    scaled = np.clip(np.asarray(depth, dtype=np.float64) / vis_max, 0.0, 1.0)
    return np.floor(scaled * 65535.0 + 0.5).astype(np.uint16)


def write_pgm16(path, depth: np.ndarray, vis_max: float = DEPTH_VIS_MAX) -> None:
    """Binary P5 PGM, maxval 65535 (big-endian samples per the Netpbm spec)."""
    values = depth_to_pgm16_values(depth, vis_max)
    h, w = values.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(values.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.readline().strip() != b"P5":
            raise ValueError("not a binary PGM")
        dims = f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        maxval = int(f.readline())
        if maxval != 65535:
            raise ValueError(f"expected 16-bit PGM, maxval {maxval}")
        data = np.frombuffer(f.read(w * h * 2), dtype=">u2")
    return data.reshape(h, w).astype(np.uint16)
