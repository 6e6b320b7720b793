"""Client session: the two-step connect workflow and runtime operations.

Step one connects to the init channel, sends a hello, and receives the init
packet describing the frame region; step two attaches the region and opens
the message channel for pose streaming and telemetry.
"""

from __future__ import annotations

import csv
import logging
import socket
import time
from dataclasses import dataclass, field
from typing import Optional

from splatbus import framebus, geometry, netio, wire

log = logging.getLogger("splatbus.client")


class HandshakeError(ConnectionError):
    """Init channel reachable but the handshake was refused."""


class AttachFailure(RuntimeError):
    """Init succeeded but the frame region could not be attached."""


@dataclass
class SessionStats:
    frames_received: int = 0
    last_frame_index: int = 0
    reader_retries: int = 0
    messages_sent: int = 0
    telemetry_received: int = 0


@dataclass
class ClientSession:
    init: wire.InitPacket
    reader: framebus.RegionReader
    init_sock: socket.socket
    msg_sock: socket.socket
    stats: SessionStats = field(default_factory=SessionStats)

    def grab_frame(self, wait: str = "block_until_new", timeout: float = 5.0) -> Optional[framebus.FrameSnapshot]:
        snap = self.reader.acquire_latest(wait, timeout=timeout)
        if snap is not None:
            self.stats.frames_received += 1
            self.stats.last_frame_index = snap.frame_index
        self.stats.reader_retries = self.reader.retries
        return snap

    def send_camera(
        self,
        position,
        rotation,
        convention: str = geometry.UNITY_LH_YUP,
        fov_y_deg: Optional[float] = None,
    ) -> None:
        msg = wire.CameraPoseMsg(
            position=tuple(float(v) for v in position),
            rotation=tuple(float(v) for v in rotation),
            convention=convention,
            fov_y_deg=fov_y_deg,
        )
        self._send(msg)

    def send_object(
        self,
        object_id: str,
        position,
        rotation,
        scale: float = 1.0,
        convention: str = geometry.UNITY_LH_YUP,
    ) -> None:
        msg = wire.ObjectPoseMsg(
            object_id=object_id,
            position=tuple(float(v) for v in position),
            rotation=tuple(float(v) for v in rotation),
            scale=float(scale),
            convention=convention,
        )
        self._send(msg)

    def send_raw(self, payload: bytes) -> None:
        """Forward an already-serialized message payload verbatim."""
        netio.send_payload(self.msg_sock, payload)
        self.stats.messages_sent += 1

    def _send(self, msg: wire.ControlMessage) -> None:
        # serialize first: local validation failures must send nothing
        text = wire.serialize_message(msg)
        netio.send_payload(self.msg_sock, text.encode("utf-8"))
        self.stats.messages_sent += 1

    def recv_message(self, timeout: Optional[float] = None) -> wire.ControlMessage:
        """Read one server->client message from the message channel."""
        self.msg_sock.settimeout(timeout)
        try:
            msg = netio.recv_message(self.msg_sock)
        finally:
            self.msg_sock.settimeout(None)
        if isinstance(msg, wire.TelemetryMsg):
            self.stats.telemetry_received += 1
        return msg

    def record_telemetry(self, output_path, duration: float) -> int:
        """Append telemetry as CSV rows (series,t,value) for ``duration`` seconds."""
        deadline = time.monotonic() + duration
        rows = 0
        with open(output_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["series", "t", "value"])
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                try:
                    msg = self.recv_message(timeout=remaining)
                except (socket.timeout, TimeoutError):
                    break
                except wire.WireError as exc:
                    log.warning("skipping undecodable message: %s", exc)
                    continue
                except OSError:
                    break
                if isinstance(msg, wire.TelemetryMsg):
                    writer.writerow([msg.series, repr(msg.t), repr(msg.value)])
                    rows += 1
        return rows

    def close(self) -> None:
        for sock in (self.msg_sock, self.init_sock):
            try:
                sock.close()
            except OSError:
                pass
        self.reader.close()


def connect(
    host: str = "127.0.0.1",
    init_port: int = 7420,
    message_port: int = 7421,
    client_name: str = "splatbus-client",
    timeout: float = 5.0,
) -> ClientSession:
    """Run the two-step workflow; on any failure no partial session remains."""
    init_sock = socket.create_connection((host, init_port), timeout=timeout)
    reader = None
    msg_sock = None
    try:
        netio.send_message(init_sock, wire.Hello(protocol_version=wire.PROTOCOL_VERSION, client_name=client_name))
        reply = netio.recv_message(init_sock)
        if isinstance(reply, wire.ErrorMsg):
            raise HandshakeError(f"server refused: {reply.code}: {reply.detail}")
        if not isinstance(reply, wire.InitPacket):
            raise HandshakeError(f"expected init packet, got {type(reply).__name__}")
        try:
            reader = framebus.attach_region(reply.attachment_token)
        except framebus.RegionError as exc:
            raise AttachFailure(f"init ok but frame region attach failed: {exc}") from exc
        if (reader.desc.width, reader.desc.height) != (reply.width, reply.height):
            raise AttachFailure(
                f"region is {reader.desc.width}x{reader.desc.height}, init said {reply.width}x{reply.height}"
            )
        msg_sock = socket.create_connection((host, message_port), timeout=timeout)
        msg_sock.settimeout(None)
        init_sock.settimeout(None)
        return ClientSession(init=reply, reader=reader, init_sock=init_sock, msg_sock=msg_sock)
    except BaseException:
        init_sock.close()
        if msg_sock is not None:
            msg_sock.close()
        if reader is not None:
            reader.close()
        raise
