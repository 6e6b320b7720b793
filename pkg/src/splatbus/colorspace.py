"""Linear-light to display conversions shared by the client and the gateway."""

from __future__ import annotations

import numpy as np


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    """sRGB transfer function on linear values already clamped to [0, 1]."""
    linear = np.asarray(linear, dtype=np.float64)
    low = linear <= 0.0031308
    out = np.empty_like(linear)
    out[low] = 12.92 * linear[low]
    out[~low] = 1.055 * np.power(linear[~low], 1.0 / 2.4) - 0.055
    return out


def quantize8(values: np.ndarray) -> np.ndarray:
    """[0,1] floats -> uint8 with round-half-up."""
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def tonemap_to_rgba8(color: np.ndarray, background=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Premultiplied linear RGBA32F frame -> display RGBA8.

    Resolves the premultiplied color over an opaque background
    (rgb + (1-alpha)*bg), clamps, sRGB-encodes, and quantizes round-half-up.
    The output alpha channel is 255 everywhere.
    """
    color = np.asarray(color, dtype=np.float64)
    if color.ndim != 3 or color.shape[2] != 4:
        raise ValueError(f"expected (H, W, 4) image, got {color.shape}")
    bg = np.asarray(background, dtype=np.float64).reshape(3)
    alpha = color[:, :, 3:4]
    resolved = np.clip(color[:, :, :3] + (1.0 - alpha) * bg, 0.0, 1.0)
    out = np.empty(color.shape[:2] + (4,), dtype=np.uint8)
    out[:, :, :3] = quantize8(srgb_encode(resolved))
    out[:, :, 3] = 255
    return out
