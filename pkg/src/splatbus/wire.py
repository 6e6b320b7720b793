"""Control-channel codec: length-prefixed JSON envelopes and message schemas.

The byte format is normative for interoperability with third-party clients:

    [4-byte big-endian unsigned payload length][UTF-8 JSON object]

Every JSON object carries a string field ``"type"`` naming one of the six
message schemas below.  All operations here are stateless; socket plumbing
lives in :mod:`splatbus.netio`.
"""

from __future__ import annotations

import base64
import binascii
import json
import math
import struct
from dataclasses import dataclass
from typing import Optional, Union

MAX_PAYLOAD = 16 * 1024 * 1024  # bounds memory for hostile input
PROTOCOL_VERSION = 1
QUAT_NORM_TOL = 1e-4

CONVENTIONS = ("unity_lh_yup", "gs_rh_ydown")
COLOR_FORMATS = ("rgba32f",)
DEPTH_FORMATS = ("r32f",)
TRANSPORTS = ("shared_memory", "inprocess")
ERROR_CODES = ("version_mismatch", "malformed", "oversize", "unsupported")

_LEN = struct.Struct(">I")


class WireError(Exception):
    """Base protocol violation; ``code`` matches the ErrorMsg code enum."""

    code = "malformed"


class OversizeError(WireError):
    code = "oversize"


class IncompleteFrameError(WireError):
    """Byte source ended mid-envelope."""

    code = "malformed"


class MalformedError(WireError):
    code = "malformed"


class UnsupportedError(WireError):
    code = "unsupported"


class VersionMismatchError(WireError):
    code = "version_mismatch"


@dataclass
class Envelope:
    length: int
    payload: bytes


def encode_envelope(payload: bytes) -> bytes:
    """Frame ``payload`` verbatim behind a 4-byte big-endian length."""
    if len(payload) > MAX_PAYLOAD:
        raise OversizeError(f"payload is {len(payload)} bytes, cap is {MAX_PAYLOAD}")
    return _LEN.pack(len(payload)) + bytes(payload)


def read_exact(stream, n: int) -> bytes:
    """Read exactly ``n`` bytes from a ``read(n)``-style source.

    Raises IncompleteFrameError if the source is exhausted first.
    """
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = stream.read(remaining)
        if not chunk:
            raise IncompleteFrameError(f"stream ended, {remaining} of {n} bytes missing")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def decode_envelope(stream) -> Envelope:
    """Read one envelope, consuming exactly 4 + length bytes.

    A declared length above the cap raises OversizeError; the caller must
    close the connection since the stream position is no longer trustworthy.
    """
    header = read_exact(stream, 4)
    (length,) = _LEN.unpack(header)
    if length > MAX_PAYLOAD:
        raise OversizeError(f"declared length {length} exceeds cap {MAX_PAYLOAD}")
    payload = read_exact(stream, length) if length else b""
    return Envelope(length=length, payload=payload)


# ---------------------------------------------------------------------------
# Message schemas


@dataclass
class Hello:
    protocol_version: int = PROTOCOL_VERSION
    client_name: str = ""

    type = "hello"


@dataclass
class InitPacket:
    width: int
    height: int
    color_format: str
    depth_format: str
    color_pitch: int
    depth_pitch: int
    transport: str
    attachment_token: str
    frame_region_bytes: int

    type = "init"


@dataclass
class CameraPoseMsg:
    position: tuple
    rotation: tuple  # unit quaternion, (x, y, z, w)
    convention: str
    fov_y_deg: Optional[float] = None

    type = "camera_pose"


@dataclass
class ObjectPoseMsg:
    object_id: str
    position: tuple
    rotation: tuple
    scale: float
    convention: str

    type = "object_pose"


@dataclass
class TelemetryMsg:
    series: str
    t: float
    value: float

    type = "telemetry"


@dataclass
class ErrorMsg:
    code: str
    detail: str = ""

    type = "error"


ControlMessage = Union[Hello, InitPacket, CameraPoseMsg, ObjectPoseMsg, TelemetryMsg, ErrorMsg]


# ---------------------------------------------------------------------------
# Field validators


def _require(obj: dict, key: str):
    if key not in obj:
        raise MalformedError(f"missing required field '{key}'")
    return obj[key]


def _as_int(value, key: str) -> int:
    if type(value) is not int:
        raise MalformedError(f"field '{key}' must be an integer")
    return value


def _as_str(value, key: str) -> str:
    if not isinstance(value, str):
        raise MalformedError(f"field '{key}' must be a string")
    return value


def _as_float(value, key: str) -> float:
    if type(value) is bool or not isinstance(value, (int, float)):
        raise MalformedError(f"field '{key}' must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise MalformedError(f"field '{key}' must be finite")
    return value


def _as_vec3(value, key: str) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise MalformedError(f"field '{key}' must be a 3-vector")
    return tuple(_as_float(v, key) for v in value)


def _as_quat(value, key: str) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise MalformedError(f"field '{key}' must be a quaternion (x,y,z,w)")
    q = tuple(_as_float(v, key) for v in value)
    norm = math.sqrt(sum(v * v for v in q))
    if abs(norm - 1.0) > QUAT_NORM_TOL:
        raise MalformedError(f"field '{key}' has norm {norm:.6f}, expected 1 within {QUAT_NORM_TOL}")
    return q


def _as_enum(value, key: str, allowed: tuple) -> str:
    value = _as_str(value, key)
    if value not in allowed:
        raise MalformedError(f"field '{key}' must be one of {allowed}, got '{value}'")
    return value


def _parse_hello(obj: dict) -> Hello:
    version = _as_int(_require(obj, "protocol_version"), "protocol_version")
    if version < 1:
        raise MalformedError("protocol_version must be >= 1")
    name = _as_str(obj.get("client_name", ""), "client_name")
    return Hello(protocol_version=version, client_name=name)


def _parse_init(obj: dict) -> InitPacket:
    width = _as_int(_require(obj, "width"), "width")
    height = _as_int(_require(obj, "height"), "height")
    if width <= 0 or height <= 0:
        raise MalformedError("width and height must be positive")
    color_format = _as_enum(_require(obj, "color_format"), "color_format", COLOR_FORMATS)
    depth_format = _as_enum(_require(obj, "depth_format"), "depth_format", DEPTH_FORMATS)
    color_pitch = _as_int(_require(obj, "color_pitch"), "color_pitch")
    depth_pitch = _as_int(_require(obj, "depth_pitch"), "depth_pitch")
    if color_pitch < width * 16:
        raise MalformedError(f"color_pitch {color_pitch} < width*16")
    if depth_pitch < width * 4:
        raise MalformedError(f"depth_pitch {depth_pitch} < width*4")
    transport = _as_enum(_require(obj, "transport"), "transport", TRANSPORTS)
    token = _as_str(_require(obj, "attachment_token"), "attachment_token")
    try:
        base64.b64decode(token, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise MalformedError(f"attachment_token is not valid base64: {exc}") from exc
    region_bytes = _as_int(_require(obj, "frame_region_bytes"), "frame_region_bytes")
    if region_bytes <= 0:
        raise MalformedError("frame_region_bytes must be positive")
    return InitPacket(
        width=width,
        height=height,
        color_format=color_format,
        depth_format=depth_format,
        color_pitch=color_pitch,
        depth_pitch=depth_pitch,
        transport=transport,
        attachment_token=token,
        frame_region_bytes=region_bytes,
    )


def _parse_camera_pose(obj: dict) -> CameraPoseMsg:
    position = _as_vec3(_require(obj, "position"), "position")
    rotation = _as_quat(_require(obj, "rotation"), "rotation")
    convention = _as_enum(_require(obj, "convention"), "convention", CONVENTIONS)
    fov = obj.get("fov_y_deg")
    if fov is not None:
        fov = _as_float(fov, "fov_y_deg")
        if not 0.0 < fov < 180.0:
            raise MalformedError(f"fov_y_deg must be in (0, 180), got {fov}")
    return CameraPoseMsg(position=position, rotation=rotation, convention=convention, fov_y_deg=fov)


def _parse_object_pose(obj: dict) -> ObjectPoseMsg:
    object_id = _as_str(_require(obj, "object_id"), "object_id")
    position = _as_vec3(_require(obj, "position"), "position")
    rotation = _as_quat(_require(obj, "rotation"), "rotation")
    scale = _as_float(_require(obj, "scale"), "scale")
    if scale <= 0.0:
        raise MalformedError(f"scale must be > 0, got {scale}")
    convention = _as_enum(_require(obj, "convention"), "convention", CONVENTIONS)
    return ObjectPoseMsg(
        object_id=object_id, position=position, rotation=rotation, scale=scale, convention=convention
    )


def _parse_telemetry(obj: dict) -> TelemetryMsg:
    series = _as_str(_require(obj, "series"), "series")
    t = _as_float(_require(obj, "t"), "t")
    value = _as_float(_require(obj, "value"), "value")
    return TelemetryMsg(series=series, t=t, value=value)


def _parse_error(obj: dict) -> ErrorMsg:
    code = _as_enum(_require(obj, "code"), "code", ERROR_CODES)
    detail = _as_str(obj.get("detail", ""), "detail")
    return ErrorMsg(code=code, detail=detail)


_PARSERS = {
    "hello": _parse_hello,
    "init": _parse_init,
    "camera_pose": _parse_camera_pose,
    "object_pose": _parse_object_pose,
    "telemetry": _parse_telemetry,
    "error": _parse_error,
}


def parse_message(payload) -> ControlMessage:
    """Parse a JSON payload (str or bytes) into a typed control message.

    Unknown ``"type"`` tags raise UnsupportedError; every other defect raises
    MalformedError.  Never aborts on arbitrary input.
    """
    if isinstance(payload, (bytes, bytearray, memoryview)):
        try:
            payload = bytes(payload).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedError(f"payload is not UTF-8: {exc}") from exc
    try:
        obj = json.loads(payload)
    except (ValueError, RecursionError) as exc:
        raise MalformedError(f"payload is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedError("payload must be a JSON object")
    tag = obj.get("type")
    if not isinstance(tag, str):
        raise MalformedError("missing string field 'type'")
    parser = _PARSERS.get(tag)
    if parser is None:
        raise UnsupportedError(f"unknown message type '{tag}'")
    try:
        return parser(obj)
    except RecursionError as exc:  # pathological nesting inside fields
        raise MalformedError("payload nesting too deep") from exc


def _finite(value: float, key: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise MalformedError(f"field '{key}' is not finite")
    return value


def serialize_message(msg: ControlMessage) -> str:
    """Serialize a control message to its JSON wire text.

    Floats are rendered with repr precision, so parse(serialize(m)) is exact.
    Non-finite numeric fields raise MalformedError.
    """
    if isinstance(msg, Hello):
        obj = {"type": "hello", "protocol_version": int(msg.protocol_version), "client_name": str(msg.client_name)}
    elif isinstance(msg, InitPacket):
        obj = {
            "type": "init",
            "width": int(msg.width),
            "height": int(msg.height),
            "color_format": msg.color_format,
            "depth_format": msg.depth_format,
            "color_pitch": int(msg.color_pitch),
            "depth_pitch": int(msg.depth_pitch),
            "transport": msg.transport,
            "attachment_token": msg.attachment_token,
            "frame_region_bytes": int(msg.frame_region_bytes),
        }
    elif isinstance(msg, CameraPoseMsg):
        obj = {
            "type": "camera_pose",
            "position": [_finite(v, "position") for v in msg.position],
            "rotation": [_finite(v, "rotation") for v in msg.rotation],
            "convention": msg.convention,
        }
        if msg.fov_y_deg is not None:
            obj["fov_y_deg"] = _finite(msg.fov_y_deg, "fov_y_deg")
    elif isinstance(msg, ObjectPoseMsg):
        obj = {
            "type": "object_pose",
            "object_id": str(msg.object_id),
            "position": [_finite(v, "position") for v in msg.position],
            "rotation": [_finite(v, "rotation") for v in msg.rotation],
            "scale": _finite(msg.scale, "scale"),
            "convention": msg.convention,
        }
    elif isinstance(msg, TelemetryMsg):
        obj = {
            "type": "telemetry",
            "series": str(msg.series),
            "t": _finite(msg.t, "t"),
            "value": _finite(msg.value, "value"),
        }
    elif isinstance(msg, ErrorMsg):
        if msg.code not in ERROR_CODES:
            raise MalformedError(f"error code '{msg.code}' not in {ERROR_CODES}")
        obj = {"type": "error", "code": msg.code, "detail": str(msg.detail)}
    else:
        raise UnsupportedError(f"cannot serialize {type(msg).__name__}")
    # allow_nan=False is a backstop; _finite should have caught everything
    return json.dumps(obj, allow_nan=False)


def error_for(exc: WireError, detail: str = "") -> ErrorMsg:
    """Build the on-wire ErrorMsg for a codec exception."""
    return ErrorMsg(code=exc.code, detail=detail or str(exc))
