"""Single-writer, multi-reader shared frame region with seqlock publication.

The region is one contiguous block: a 4096-byte little-endian header followed
by the color plane (RGBA32F, row-padded to ``color_pitch``) and the depth
plane (R32F, padded to ``depth_pitch``).  The writer brackets each publish
with sequence-counter increments (odd while writing, even when stable);
readers copy the planes and retry if the counter moved.  The byte-exact
header layout is documented in LAYOUT.md and fixed by layout_version 1.

Two transport backends are provided: ``shared_memory`` (a named file in
/dev/shm, mmap on both sides) and ``inprocess`` (a plain buffer handed around
through a process-local registry).  Device-memory transports are out of
scope; they would implement the same create/attach/token contract.
"""

from __future__ import annotations

import base64
import json
import mmap
import os
import secrets
import struct
import tempfile
import threading
import time
import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

HEADER_SIZE = 4096
MAGIC = b"SPLATBUS"
LAYOUT_VERSION = 1
ROW_ALIGN = 64

COLOR_BPP = 16  # rgba32f
DEPTH_BPP = 4  # r32f

_FORMAT_CODES = {"rgba32f": 1, "r32f": 2}

# header field offsets (little-endian within the region)
_OFF_MAGIC = 0  # 8s
_OFF_LAYOUT_VERSION = 8  # u32
_OFF_HEADER_SIZE = 12  # u32
_OFF_SEQ = 16  # u64
_OFF_FRAME_INDEX = 24  # u64
_OFF_TIMESTAMP_NS = 32  # u64
_OFF_CHECKSUM = 40  # u64
_OFF_WRITER_STATE = 48  # u32
_OFF_CHECKSUM_ON = 52  # u32
_OFF_WIDTH = 56  # u32
_OFF_HEIGHT = 60  # u32
_OFF_COLOR_FORMAT = 64  # u32
_OFF_DEPTH_FORMAT = 68  # u32
_OFF_COLOR_PITCH = 72  # u32
_OFF_DEPTH_PITCH = 76  # u32

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")

WRITER_INIT = 0
WRITER_LIVE = 1
WRITER_CLOSED = 2


class RegionError(Exception):
    pass


class InvalidDescriptorError(RegionError):
    pass


class RegionExistsError(RegionError):
    pass


class AttachError(RegionError):
    pass


class IncompatibleLayoutError(AttachError):
    pass


class DisconnectedError(RegionError):
    pass


def compute_pitch(width: int, bytes_per_pixel: int) -> int:
    """Smallest multiple of 64 >= width * bytes_per_pixel."""
    if width <= 0:
        raise InvalidDescriptorError(f"width must be > 0, got {width}")
    return ((width * bytes_per_pixel + ROW_ALIGN - 1) // ROW_ALIGN) * ROW_ALIGN


@dataclass
class FrameDescriptor:
    width: int
    height: int
    color_format: str = "rgba32f"
    depth_format: str = "r32f"
    color_pitch: int = 0
    depth_pitch: int = 0

    @classmethod
    def for_size(cls, width: int, height: int) -> "FrameDescriptor":
        return cls(
            width=width,
            height=height,
            color_pitch=compute_pitch(width, COLOR_BPP),
            depth_pitch=compute_pitch(width, DEPTH_BPP),
        )

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise InvalidDescriptorError(f"bad dimensions {self.width}x{self.height}")
        if self.color_format not in _FORMAT_CODES or self.depth_format not in _FORMAT_CODES:
            raise InvalidDescriptorError(
                f"unknown formats {self.color_format}/{self.depth_format}"
            )
        if self.color_pitch < self.width * COLOR_BPP or self.color_pitch % ROW_ALIGN:
            raise InvalidDescriptorError(f"bad color_pitch {self.color_pitch}")
        if self.depth_pitch < self.width * DEPTH_BPP or self.depth_pitch % ROW_ALIGN:
            raise InvalidDescriptorError(f"bad depth_pitch {self.depth_pitch}")

    @property
    def color_plane_bytes(self) -> int:
        return self.height * self.color_pitch

    @property
    def depth_plane_bytes(self) -> int:
        return self.height * self.depth_pitch

    @property
    def region_bytes(self) -> int:
        return HEADER_SIZE + self.color_plane_bytes + self.depth_plane_bytes


@dataclass
class FrameSnapshot:
    frame_index: int
    timestamp_ns: int
    color: np.ndarray  # (height, width, 4) float32
    depth: np.ndarray  # (height, width) float32
    checksum: int = 0  # header checksum field (0 unless the writer stamps)

    def compute_checksum(self) -> int:
        return plane_checksum(self.color, self.depth)


def plane_checksum(color: np.ndarray, depth: np.ndarray) -> int:
    """CRC32 over the tight color rows then the tight depth rows."""
    c = zlib.crc32(np.ascontiguousarray(color, dtype=np.float32).data)
    return zlib.crc32(np.ascontiguousarray(depth, dtype=np.float32).data, c)


# ---------------------------------------------------------------------------
# Transport backends


def _shm_dir() -> str:
    if os.path.isdir("/dev/shm"):
        return "/dev/shm"
    return tempfile.gettempdir()


_INPROC_REGISTRY: dict = {}  # name -> memoryview (inprocess transport buffers)
_INPROC_LOCK = threading.Lock()

# Readiness notification for readers living in the writer's process: the
# writer registers a condition variable per region and signals it on publish
# and close.  Cross-process readers cannot see it and fall back to polling.
_NOTIFIERS: dict = {}
_NOTIFIERS_LOCK = threading.Lock()


def _reset_after_fork() -> None:
    # inherited buffers/conds are copy-on-write ghosts, not shared state
    _INPROC_REGISTRY.clear()
    _NOTIFIERS.clear()


if hasattr(os, "register_at_fork"):
    os.register_at_fork(after_in_child=_reset_after_fork)


def make_token(transport: str, name: str, size: int) -> str:
    doc = {"transport": transport, "name": name, "layout_version": LAYOUT_VERSION, "size": size}
    return base64.b64encode(json.dumps(doc).encode("utf-8")).decode("ascii")


def parse_token(token: str) -> dict:
    try:
        doc = json.loads(base64.b64decode(token, validate=True).decode("utf-8"))
    except Exception as exc:
        raise AttachError(f"attachment token is corrupt: {exc}") from exc
    for key in ("transport", "name", "layout_version", "size"):
        if key not in doc:
            raise AttachError(f"attachment token missing '{key}'")
    if doc["layout_version"] != LAYOUT_VERSION:
        raise IncompatibleLayoutError(
            f"layout_version {doc['layout_version']} != supported {LAYOUT_VERSION}"
        )
    return doc


# ---------------------------------------------------------------------------
# Header accessors (operate on any writable/readable buffer)


def _put_u32(buf, off: int, value: int) -> None:
    _U32.pack_into(buf, off, value)


def _put_u64(buf, off: int, value: int) -> None:
    _U64.pack_into(buf, off, value)


def _get_u32(buf, off: int) -> int:
    return _U32.unpack_from(buf, off)[0]


def _get_u64(buf, off: int) -> int:
    return _U64.unpack_from(buf, off)[0]


def read_descriptor(buf) -> FrameDescriptor:
    codes = {v: k for k, v in _FORMAT_CODES.items()}
    return FrameDescriptor(
        width=_get_u32(buf, _OFF_WIDTH),
        height=_get_u32(buf, _OFF_HEIGHT),
        color_format=codes.get(_get_u32(buf, _OFF_COLOR_FORMAT), "?"),
        depth_format=codes.get(_get_u32(buf, _OFF_DEPTH_FORMAT), "?"),
        color_pitch=_get_u32(buf, _OFF_COLOR_PITCH),
        depth_pitch=_get_u32(buf, _OFF_DEPTH_PITCH),
    )


class RegionWriter:
    """Owning side of the frame region.  Single writer; not thread-safe."""

    def __init__(self, desc: FrameDescriptor, transport: str, name: str, stamp_checksums: bool = False):
        desc.validate()
        if transport not in ("shared_memory", "inprocess"):
            raise InvalidDescriptorError(f"unknown transport '{transport}'")
        self.desc = desc
        self.transport = transport
        self.name = name
        self.stamp_checksums = stamp_checksums
        self._closed = False
        self._last_index = 0
        self._fd = None
        self._mmap = None

        size = desc.region_bytes
        if transport == "shared_memory":
            path = os.path.join(_shm_dir(), name)
            try:
                fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_RDWR, 0o600)
            except FileExistsError:
                raise RegionExistsError(f"region '{name}' already exists at {path}") from None
            os.ftruncate(fd, size)
            self._fd = fd
            self._path = path
            self._mmap = mmap.mmap(fd, size)
            self._buf = memoryview(self._mmap)
        else:
            with _INPROC_LOCK:
                if name in _INPROC_REGISTRY:
                    raise RegionExistsError(f"inprocess region '{name}' already exists")
                self._buf = memoryview(bytearray(size))
                _INPROC_REGISTRY[name] = self._buf
        self._cond = threading.Condition()
        with _NOTIFIERS_LOCK:
            _NOTIFIERS[name] = self._cond

        buf = self._buf
        buf[_OFF_MAGIC : _OFF_MAGIC + 8] = MAGIC
        _put_u32(buf, _OFF_LAYOUT_VERSION, LAYOUT_VERSION)
        _put_u32(buf, _OFF_HEADER_SIZE, HEADER_SIZE)
        _put_u64(buf, _OFF_SEQ, 0)
        _put_u64(buf, _OFF_FRAME_INDEX, 0)
        _put_u64(buf, _OFF_TIMESTAMP_NS, 0)
        _put_u64(buf, _OFF_CHECKSUM, 0)
        _put_u32(buf, _OFF_WRITER_STATE, WRITER_LIVE)
        _put_u32(buf, _OFF_CHECKSUM_ON, 1 if stamp_checksums else 0)
        _put_u32(buf, _OFF_WIDTH, desc.width)
        _put_u32(buf, _OFF_HEIGHT, desc.height)
        _put_u32(buf, _OFF_COLOR_FORMAT, _FORMAT_CODES[desc.color_format])
        _put_u32(buf, _OFF_DEPTH_FORMAT, _FORMAT_CODES[desc.depth_format])
        _put_u32(buf, _OFF_COLOR_PITCH, desc.color_pitch)
        _put_u32(buf, _OFF_DEPTH_PITCH, desc.depth_pitch)

        self._color_rows = np.frombuffer(
            buf, dtype=np.uint8, count=desc.color_plane_bytes, offset=HEADER_SIZE
        ).reshape(desc.height, desc.color_pitch)
        self._depth_rows = np.frombuffer(
            buf, dtype=np.uint8, count=desc.depth_plane_bytes, offset=HEADER_SIZE + desc.color_plane_bytes
        ).reshape(desc.height, desc.depth_pitch)

    @property
    def attachment_token(self) -> str:
        return make_token(self.transport, self.name, self.desc.region_bytes)

    def publish(
        self,
        color: np.ndarray,
        depth: np.ndarray,
        frame_index: Optional[int] = None,
        timestamp_ns: Optional[int] = None,
    ) -> int:
        """Publish one frame; returns the frame index written.

        color: (height, width, 4) float32.  depth: (height, width) float32.
        frame_index must strictly increase; None auto-increments.
        """
        if self._closed:
            raise RegionError("writer is closed")
        desc = self.desc
        color = np.ascontiguousarray(color, dtype=np.float32)
        depth = np.ascontiguousarray(depth, dtype=np.float32)
        if color.shape != (desc.height, desc.width, 4):
            raise ValueError(f"color shape {color.shape} != {(desc.height, desc.width, 4)}")
        if depth.shape != (desc.height, desc.width):
            raise ValueError(f"depth shape {depth.shape} != {(desc.height, desc.width)}")
        if frame_index is None:
            frame_index = self._last_index + 1
        if frame_index <= self._last_index:
            raise ValueError(f"frame_index {frame_index} not greater than {self._last_index}")
        if timestamp_ns is None:
            timestamp_ns = time.monotonic_ns()

        buf = self._buf
        seq = _get_u64(buf, _OFF_SEQ)
        _put_u64(buf, _OFF_SEQ, seq + 1)  # odd: write in progress
        self._color_rows[:, : desc.width * COLOR_BPP] = color.reshape(desc.height, -1).view(np.uint8)
        self._depth_rows[:, : desc.width * DEPTH_BPP] = depth.reshape(desc.height, -1).view(np.uint8)
        _put_u64(buf, _OFF_FRAME_INDEX, frame_index)
        _put_u64(buf, _OFF_TIMESTAMP_NS, timestamp_ns)
        _put_u64(buf, _OFF_CHECKSUM, plane_checksum(color, depth) if self.stamp_checksums else 0)
        _put_u64(buf, _OFF_SEQ, seq + 2)  # even: stable
        self._last_index = frame_index
        with self._cond:
            self._cond.notify_all()
        return frame_index

    def close(self) -> None:
        """Tear the region down; attached readers see a disconnect."""
        if self._closed:
            return
        self._closed = True
        try:
            _put_u32(self._buf, _OFF_WRITER_STATE, WRITER_CLOSED)
        except (ValueError, TypeError):
            pass
        with self._cond:
            self._cond.notify_all()
        with _NOTIFIERS_LOCK:
            if _NOTIFIERS.get(self.name) is self._cond:
                del _NOTIFIERS[self.name]
        if self.transport == "inprocess":
            with _INPROC_LOCK:
                _INPROC_REGISTRY.pop(self.name, None)
        else:
            self._buf.release()
            self._color_rows = None
            self._depth_rows = None
            self._mmap.close()
            os.close(self._fd)
            try:
                os.unlink(self._path)
            except FileNotFoundError:
                pass

    def __enter__(self) -> "RegionWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def create_region(
    desc: FrameDescriptor,
    transport: str = "shared_memory",
    name: Optional[str] = None,
    stamp_checksums: bool = False,
) -> RegionWriter:
    """Create the frame region; the writer's attachment_token opens it elsewhere."""
    if name is None:
        name = f"splatbus-{secrets.token_hex(6)}"
    return RegionWriter(desc, transport, name, stamp_checksums=stamp_checksums)


class RegionReader:
    """Reading side; one reader handle per consumer context."""

    # blocking acquire: spin briefly, then sleep-poll (shared_memory transport)
    _SPIN_NS = 200_000
    _POLL_S = 0.0002

    def __init__(self, token: str):
        doc = parse_token(token)
        self.transport = doc["transport"]
        self.name = doc["name"]
        size = doc["size"]
        self._mmap = None
        self.retries = 0
        self._last_index = 0

        if self.transport == "shared_memory":
            path = os.path.join(_shm_dir(), self.name)
            try:
                fd = os.open(path, os.O_RDONLY)
            except FileNotFoundError:
                raise AttachError(f"region '{self.name}' is gone (stale token)") from None
            try:
                actual = os.fstat(fd).st_size
                if actual != size:
                    raise IncompatibleLayoutError(f"region size {actual} != token size {size}")
                self._mmap = mmap.mmap(fd, size, prot=mmap.PROT_READ)
            finally:
                os.close(fd)
            self._buf = memoryview(self._mmap)
        elif self.transport == "inprocess":
            with _INPROC_LOCK:
                buf = _INPROC_REGISTRY.get(self.name)
            if buf is None:
                raise AttachError(f"inprocess region '{self.name}' is gone (stale token)")
            self._buf = buf
        else:
            raise AttachError(f"unknown transport '{self.transport}'")
        # same-process readers get woken by the writer; others poll
        with _NOTIFIERS_LOCK:
            self._cond = _NOTIFIERS.get(self.name)

        buf = self._buf
        if bytes(buf[_OFF_MAGIC : _OFF_MAGIC + 8]) != MAGIC:
            raise IncompatibleLayoutError("bad region magic")
        if _get_u32(buf, _OFF_LAYOUT_VERSION) != LAYOUT_VERSION:
            raise IncompatibleLayoutError("layout_version mismatch")
        if _get_u32(buf, _OFF_HEADER_SIZE) != HEADER_SIZE:
            raise IncompatibleLayoutError("header size mismatch")
        if _get_u32(buf, _OFF_WRITER_STATE) == WRITER_CLOSED:
            raise AttachError(f"region '{self.name}' writer already closed")
        self.desc = read_descriptor(buf)
        self.desc.validate()
        d = self.desc
        self._color_rows = np.frombuffer(
            buf, dtype=np.uint8, count=d.color_plane_bytes, offset=HEADER_SIZE
        ).reshape(d.height, d.color_pitch)
        self._depth_rows = np.frombuffer(
            buf, dtype=np.uint8, count=d.depth_plane_bytes, offset=HEADER_SIZE + d.color_plane_bytes
        ).reshape(d.height, d.depth_pitch)

    @property
    def last_frame_index(self) -> int:
        return self._last_index

    def writer_alive(self) -> bool:
        return _get_u32(self._buf, _OFF_WRITER_STATE) != WRITER_CLOSED

    def _copy_planes(self) -> tuple:
        d = self.desc
        color = (
            self._color_rows[:, : d.width * COLOR_BPP]
            .copy()
            .view(np.float32)
            .reshape(d.height, d.width, 4)
        )
        depth = (
            self._depth_rows[:, : d.width * DEPTH_BPP]
            .copy()
            .view(np.float32)
            .reshape(d.height, d.width)
        )
        return color, depth

    def acquire_latest(self, wait: str = "nonblocking", timeout: float = 5.0) -> Optional[FrameSnapshot]:
        """Copy the newest stable frame, or None (nonblocking, nothing new).

        wait="block_until_new" returns only once frame_index exceeds the last
        one this reader returned; raises DisconnectedError if the writer goes
        away or publishes nothing within ``timeout`` seconds.
        """
        if wait not in ("nonblocking", "block_until_new"):
            raise ValueError(f"bad wait mode '{wait}'")
        buf = self._buf
        deadline = time.monotonic() + timeout
        spin_until = time.monotonic_ns() + self._SPIN_NS
        while True:
            seq1 = _get_u64(buf, _OFF_SEQ)
            if seq1 % 2 == 0:
                frame_index = _get_u64(buf, _OFF_FRAME_INDEX)
                if frame_index > self._last_index:
                    timestamp_ns = _get_u64(buf, _OFF_TIMESTAMP_NS)
                    checksum = _get_u64(buf, _OFF_CHECKSUM)
                    color, depth = self._copy_planes()
                    if _get_u64(buf, _OFF_SEQ) == seq1:
                        self._last_index = frame_index
                        return FrameSnapshot(
                            frame_index=frame_index,
                            timestamp_ns=timestamp_ns,
                            color=color,
                            depth=depth,
                            checksum=checksum,
                        )
                    self.retries += 1
                    continue
                if not self.writer_alive():
                    raise DisconnectedError(f"writer of region '{self.name}' closed")
            # write in progress or no new frame yet
            if wait == "nonblocking":
                return None
            now = time.monotonic()
            if now >= deadline:
                raise DisconnectedError(
                    f"no new frame within {timeout}s (writer "
                    f"{'alive' if self.writer_alive() else 'gone'})"
                )
            if self._cond is not None:
                with self._cond:
                    self._cond.wait(min(0.05, deadline - now))
            elif time.monotonic_ns() > spin_until:
                time.sleep(self._POLL_S)

    def close(self) -> None:
        if self._mmap is not None:
            self._buf.release()
            self._color_rows = None
            self._depth_rows = None
            self._mmap.close()
            self._mmap = None
        self._cond = None

    def __enter__(self) -> "RegionReader":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def attach_region(token: str) -> RegionReader:
    """Open the frame region named by an attachment token."""
    return RegionReader(token)
