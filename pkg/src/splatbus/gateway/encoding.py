"""Browser frame packets: 8-bit tonemapping and the binary wire layout.

Binary layout (little-endian), normative for the viewer:

    [u32 frame_index][u64 timestamp_ns][u16 width][u16 height][u8 encoding][payload]

The encoding byte's low 7 bits select the color payload (0 = rgba8_raw,
1 = png); bit 0x80 flags an appended 8-bit depth preview of width*height
bytes.  The preview is only supported with rgba8_raw, where the color
payload length (4*width*height) is known without parsing.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np
from PIL import Image

from splatbus.colorspace import tonemap_to_rgba8  # noqa: F401  (gateway op, shared impl)

_HDR = struct.Struct("<IQHHB")

ENC_RGBA8_RAW = 0
ENC_PNG = 1
_FLAG_DEPTH = 0x80

_ENC_NAMES = {ENC_RGBA8_RAW: "rgba8_raw", ENC_PNG: "png"}
_ENC_CODES = {v: k for k, v in _ENC_NAMES.items()}


class PacketError(ValueError):
    pass


@dataclass
class WebFramePacket:
    frame_index: int
    timestamp_ns: int
    width: int
    height: int
    encoding: str
    payload: bytes
    depth_preview: Optional[bytes] = None


def depth_preview8(depth: np.ndarray, vis_max: float = 100.0) -> bytes:
    """Linear depth -> normalized 8-bit preview bytes (0 near, 255 at vis_max)."""
    scaled = np.clip(np.asarray(depth, dtype=np.float64) / vis_max, 0.0, 1.0)
    return np.floor(scaled * 255.0 + 0.5).astype(np.uint8).tobytes()


def encode_packet(
    frame_index: int,
    timestamp_ns: int,
    rgba8: np.ndarray,
    encoding: str = "rgba8_raw",
    depth8: Optional[bytes] = None,
) -> bytes:
    """Pack a tonemapped frame into the binary viewer layout."""
    if encoding not in _ENC_CODES:
        raise PacketError(f"unknown encoding '{encoding}'")
    h, w = rgba8.shape[:2]
    code = _ENC_CODES[encoding]
    if encoding == "rgba8_raw":
        payload = np.ascontiguousarray(rgba8, dtype=np.uint8).tobytes()
    else:
        if depth8 is not None:
            raise PacketError("depth preview requires rgba8_raw encoding")
        buf = io.BytesIO()
        Image.fromarray(np.ascontiguousarray(rgba8, dtype=np.uint8)).save(buf, format="PNG")
        payload = buf.getvalue()
    if depth8 is not None:
        if len(depth8) != w * h:
            raise PacketError(f"depth preview is {len(depth8)} bytes, expected {w * h}")
        code |= _FLAG_DEPTH
        payload += depth8
    return _HDR.pack(frame_index & 0xFFFFFFFF, timestamp_ns, w, h, code) + payload


def decode_packet(data: bytes) -> WebFramePacket:
    """Inverse of encode_packet; used by tests and scripted viewers."""
    if len(data) < _HDR.size:
        raise PacketError(f"packet too short: {len(data)} bytes")
    frame_index, timestamp_ns, w, h, code = _HDR.unpack_from(data, 0)
    has_depth = bool(code & _FLAG_DEPTH)
    enc = _ENC_NAMES.get(code & 0x7F)
    if enc is None:
        raise PacketError(f"unknown encoding byte {code:#x}")
    body = data[_HDR.size :]
    depth = None
    if enc == "rgba8_raw":
        color_len = 4 * w * h
        expected = color_len + (w * h if has_depth else 0)
        if len(body) != expected:
            raise PacketError(f"payload is {len(body)} bytes, expected {expected}")
        payload = body[:color_len]
        if has_depth:
            depth = body[color_len:]
    else:
        if has_depth:
            raise PacketError("depth preview flag is invalid for png packets")
        payload = body
        image = Image.open(io.BytesIO(payload))
        if image.size != (w, h):
            raise PacketError(f"png decodes to {image.size}, header says {(w, h)}")
    return WebFramePacket(
        frame_index=frame_index,
        timestamp_ns=timestamp_ns,
        width=w,
        height=h,
        encoding=enc,
        payload=payload,
        depth_preview=depth,
    )
