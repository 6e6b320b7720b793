import io
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splatbus import wire


class CountingSource:
    """Byte source that records exactly how many bytes were consumed."""

    def __init__(self, data: bytes):
        self._stream = io.BytesIO(data)
        self.consumed = 0

    def read(self, n):
        chunk = self._stream.read(n)
        self.consumed += len(chunk)
        return chunk


def test_encode_envelope_known_bytes():
    assert wire.encode_envelope(b"{}") == bytes([0, 0, 0, 2, 0x7B, 0x7D])


def test_encode_envelope_empty():
    assert wire.encode_envelope(b"") == b"\x00\x00\x00\x00"


def test_encode_envelope_oversize():
    with pytest.raises(wire.OversizeError):
        wire.encode_envelope(b"x" * (wire.MAX_PAYLOAD + 1))


def test_decode_envelope_known_bytes():
    env = wire.decode_envelope(io.BytesIO(bytes([0, 0, 0, 2, 0x7B, 0x7D])))
    assert env.length == 2
    assert env.payload == b"{}"


def test_decode_envelope_oversize_declared_length():
    with pytest.raises(wire.OversizeError):
        wire.decode_envelope(io.BytesIO(b"\xff\xff\xff\xff" + b"x" * 16))


def test_decode_envelope_truncated():
    with pytest.raises(wire.IncompleteFrameError):
        wire.decode_envelope(io.BytesIO(b"\x00\x00\x00\x05ab"))
    with pytest.raises(wire.IncompleteFrameError):
        wire.decode_envelope(io.BytesIO(b"\x00\x00"))


@given(st.binary(max_size=64 * 1024))
@settings(max_examples=1000, deadline=None)
def test_envelope_round_trip(payload):
    env = wire.decode_envelope(io.BytesIO(wire.encode_envelope(payload)))
    assert env.payload == payload
    assert env.length == len(payload)


@given(st.binary(max_size=4096), st.binary(max_size=64))
@settings(max_examples=300, deadline=None)
def test_decode_consumes_exact_prefix(payload, trailing):
    src = CountingSource(wire.encode_envelope(payload) + trailing)
    env = wire.decode_envelope(src)
    assert env.payload == payload
    assert src.consumed == 4 + len(payload)


def test_parse_camera_pose_identity():
    msg = wire.parse_message(
        '{"type":"camera_pose","position":[0,0,0],"rotation":[0,0,0,1],"convention":"unity_lh_yup"}'
    )
    assert isinstance(msg, wire.CameraPoseMsg)
    assert msg.rotation == (0.0, 0.0, 0.0, 1.0)
    assert msg.position == (0.0, 0.0, 0.0)
    assert msg.fov_y_deg is None


def test_parse_unknown_type_is_unsupported():
    with pytest.raises(wire.UnsupportedError):
        wire.parse_message('{"type":"frobnicate"}')


@pytest.mark.parametrize(
    "payload",
    [
        "not json at all",
        "[1,2,3]",
        '"string"',
        "{}",
        '{"type": 7}',
        '{"type":"camera_pose"}',
        '{"type":"camera_pose","position":[0,0],"rotation":[0,0,0,1],"convention":"unity_lh_yup"}',
        '{"type":"camera_pose","position":[0,0,0],"rotation":[0,0,0,2],"convention":"unity_lh_yup"}',
        '{"type":"camera_pose","position":[0,0,0],"rotation":[0,0,0,1],"convention":"weird"}',
        '{"type":"camera_pose","position":[0,0,0],"rotation":[0,0,0,1],"convention":"unity_lh_yup","fov_y_deg":180}',
        '{"type":"object_pose","object_id":"a","position":[0,0,0],"rotation":[0,0,0,1],"scale":0,"convention":"gs_rh_ydown"}',
        '{"type":"telemetry","series":"fps","t":0.0,"value":"high"}',
        '{"type":"telemetry","series":"fps","t":0.0,"value":NaN}',
        '{"type":"error","code":"weird_code","detail":""}',
        '{"type":"hello","protocol_version":0}',
        '{"type":"init","width":0,"height":64,"color_format":"rgba32f","depth_format":"r32f",'
        '"color_pitch":1024,"depth_pitch":256,"transport":"inprocess","attachment_token":"aGk=",'
        '"frame_region_bytes":4096}',
        '{"type":"init","width":64,"height":64,"color_format":"rgba32f","depth_format":"r32f",'
        '"color_pitch":1023,"depth_pitch":256,"transport":"inprocess","attachment_token":"aGk=",'
        '"frame_region_bytes":4096}',
        '{"type":"init","width":64,"height":64,"color_format":"rgba32f","depth_format":"r32f",'
        '"color_pitch":1024,"depth_pitch":256,"transport":"inprocess","attachment_token":"!!!",'
        '"frame_region_bytes":4096}',
    ],
)
def test_parse_malformed_variants(payload):
    with pytest.raises(wire.MalformedError):
        wire.parse_message(payload)


def test_parse_quaternion_norm_tolerance():
    # within 1e-4 of unit: accepted
    q = [0.0, 0.0, 0.0, 1.00005]
    msg = wire.parse_message(
        json.dumps(
            {"type": "camera_pose", "position": [1, 2, 3], "rotation": q, "convention": "gs_rh_ydown"}
        )
    )
    assert isinstance(msg, wire.CameraPoseMsg)


def test_serialize_telemetry_contains_tag():
    text = wire.serialize_message(wire.TelemetryMsg(series="fps", t=0.0, value=60.0))
    assert '"type": "telemetry"' in text or '"type":"telemetry"' in text


def test_serialize_nan_raises():
    with pytest.raises(wire.MalformedError):
        wire.serialize_message(wire.TelemetryMsg(series="fps", t=0.0, value=math.nan))
    with pytest.raises(wire.MalformedError):
        wire.serialize_message(
            wire.CameraPoseMsg(
                position=(math.inf, 0, 0), rotation=(0, 0, 0, 1), convention="gs_rh_ydown"
            )
        )


# -- generated corpus round trip ---------------------------------------------

_floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
_names = st.text(
    alphabet=st.characters(min_codepoint=32, max_codepoint=0x2FF), min_size=0, max_size=24
)


@st.composite
def quaternions(draw):
    import numpy as np

    v = np.array([draw(st.floats(-1, 1)) for _ in range(4)])
    n = np.linalg.norm(v)
    if n < 1e-3:
        v = np.array([0.0, 0.0, 0.0, 1.0])
        n = 1.0
    return tuple(float(x) for x in v / n)


@st.composite
def messages(draw):
    kind = draw(st.sampled_from(["hello", "init", "camera_pose", "object_pose", "telemetry", "error"]))
    if kind == "hello":
        return wire.Hello(protocol_version=draw(st.integers(1, 100)), client_name=draw(_names))
    if kind == "init":
        width = draw(st.integers(1, 512))
        height = draw(st.integers(1, 512))
        return wire.InitPacket(
            width=width,
            height=height,
            color_format="rgba32f",
            depth_format="r32f",
            color_pitch=((width * 16 + 63) // 64) * 64,
            depth_pitch=((width * 4 + 63) // 64) * 64,
            transport=draw(st.sampled_from(wire.TRANSPORTS)),
            attachment_token="eyJuYW1lIjoidGVzdCJ9",
            frame_region_bytes=draw(st.integers(4096, 1 << 30)),
        )
    if kind == "camera_pose":
        return wire.CameraPoseMsg(
            position=tuple(draw(_floats) for _ in range(3)),
            rotation=draw(quaternions()),
            convention=draw(st.sampled_from(wire.CONVENTIONS)),
            fov_y_deg=draw(st.one_of(st.none(), st.floats(1.0, 179.0))),
        )
    if kind == "object_pose":
        return wire.ObjectPoseMsg(
            object_id=draw(_names),
            position=tuple(draw(_floats) for _ in range(3)),
            rotation=draw(quaternions()),
            scale=draw(st.floats(1e-6, 1e6)),
            convention=draw(st.sampled_from(wire.CONVENTIONS)),
        )
    if kind == "telemetry":
        return wire.TelemetryMsg(series=draw(_names), t=draw(st.floats(0, 1e9)), value=draw(_floats))
    return wire.ErrorMsg(code=draw(st.sampled_from(wire.ERROR_CODES)), detail=draw(_names))


@given(messages())
@settings(max_examples=1000, deadline=None)
def test_message_round_trip(msg):
    text = wire.serialize_message(msg)
    back = wire.parse_message(text)
    # re-serializing the parsed form must parse equal again (fixed point)
    assert wire.parse_message(wire.serialize_message(back)) == back
    assert type(back) is type(msg)
    # numeric fields survive exactly (json repr round-trips floats)
    if isinstance(msg, wire.CameraPoseMsg):
        assert back.position == tuple(float(v) for v in msg.position)
        assert back.rotation == tuple(float(v) for v in msg.rotation)
    if isinstance(msg, wire.TelemetryMsg):
        assert back.t == float(msg.t) and back.value == float(msg.value)


def test_fuzz_decode_and_parse_total():
    import numpy as np

    rng = np.random.default_rng(1234)
    blob = rng.integers(0, 256, size=1 << 20, dtype=np.uint8).tobytes()
    for _ in range(20_000):
        start = int(rng.integers(0, len(blob) - 128))
        length = int(rng.integers(0, 128))
        chunk = blob[start : start + length]
        try:
            wire.decode_envelope(io.BytesIO(chunk))
        except wire.WireError:
            pass
        try:
            wire.parse_message(chunk)
        except wire.WireError:
            pass
