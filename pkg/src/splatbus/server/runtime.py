"""Server runtime: frame region ownership, control channels, message application.

Embedding contract: ``start`` / ``poll_messages`` / ``publish`` are called
from one render-loop context.  Network accept/read happens on internal
threads; the only shared state is a single-consumer inbox queue drained by
``poll_messages`` and the single-writer frame region.
"""

from __future__ import annotations

import logging
import math
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from splatbus import framebus, geometry, netio, wire
from splatbus.server.config import ServerConfig

log = logging.getLogger("splatbus.server")


@dataclass
class PollSummary:
    camera_updates: int = 0
    object_updates: int = 0
    ignored: int = 0
    malformed: int = 0
    clients: int = 0


@dataclass
class SceneState:
    camera: geometry.ViewState
    camera_pose: geometry.Pose
    fov_y: float
    object_poses: Dict[str, Tuple[geometry.Pose, float]] = field(default_factory=dict)


class _ClientConn:
    """One message-channel client: blocking reader thread plus a send queue."""

    SEND_QUEUE_MAX = 256

    def __init__(self, conn_id: int, sock: socket.socket, inbox: queue.SimpleQueue):
        self.id = conn_id
        self.sock = sock
        self.inbox = inbox
        self.last_activity = time.monotonic()
        self.alive = True
        self._send_queue: queue.Queue = queue.Queue(maxsize=self.SEND_QUEUE_MAX)
        self._reader = threading.Thread(target=self._read_loop, daemon=True, name=f"msg-recv-{conn_id}")
        self._sender = threading.Thread(target=self._send_loop, daemon=True, name=f"msg-send-{conn_id}")
        self._reader.start()
        self._sender.start()

    def _read_loop(self) -> None:
        src = netio.SocketSource(self.sock)
        while self.alive:
            try:
                envelope = wire.decode_envelope(src)
            except wire.OversizeError as exc:
                self.enqueue(wire.error_for(exc))
                self.inbox.put(("malformed", self.id, None))
                break  # framing is unrecoverable; drop the connection
            except wire.IncompleteFrameError:
                break  # peer closed
            except OSError:
                break
            self.last_activity = time.monotonic()
            try:
                msg = wire.parse_message(envelope.payload)
            except wire.WireError as exc:
                self.inbox.put(("malformed", self.id, None))
                self.enqueue(wire.error_for(exc))
                continue  # envelope boundary held; keep reading
            self.inbox.put(("msg", self.id, msg))
        # sentinel lets the sender flush queued replies before the close
        try:
            self._send_queue.put_nowait(None)
        except queue.Full:
            self.close()

    def _send_loop(self) -> None:
        while True:
            item = self._send_queue.get()
            if item is None or not self.alive:
                break
            try:
                self.sock.sendall(item)
                self.last_activity = time.monotonic()
            except OSError:
                break
        self.close()

    def enqueue(self, msg: wire.ControlMessage) -> bool:
        """Queue a message for this client; False if the client is too slow."""
        if not self.alive:
            return False
        try:
            data = wire.encode_envelope(wire.serialize_message(msg).encode("utf-8"))
            self._send_queue.put_nowait(data)
            return True
        except queue.Full:
            log.warning("client %d send queue full, dropping client", self.id)
            self.close()
            return False

    def close(self) -> None:
        if not self.alive:
            return
        self.alive = False
        try:
            self._send_queue.put_nowait(None)
        except queue.Full:
            pass
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class ServerRuntime:
    """Owns the frame region and the two control channels."""

    def __init__(self, config: ServerConfig):
        config.validate()
        self.config = config
        self.writer: Optional[framebus.RegionWriter] = None
        self.scene = self._default_scene()
        self._inbox: queue.SimpleQueue = queue.SimpleQueue()
        self._init_sock: Optional[socket.socket] = None
        self._msg_sock: Optional[socket.socket] = None
        self._init_conns: list = []
        self._msg_conns: Dict[int, _ClientConn] = {}
        self._conn_lock = threading.Lock()
        self._next_conn_id = 1
        self._frame_index = 0
        self._stopping = threading.Event()
        self._threads: list = []
        self._t0 = time.monotonic()
        self.malformed_total = 0

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "ServerRuntime":
        cfg = self.config
        desc = framebus.FrameDescriptor.for_size(cfg.width, cfg.height)
        self.writer = framebus.create_region(
            desc, cfg.transport, name=cfg.region_name, stamp_checksums=cfg.stamp_checksums
        )
        try:
            self._init_sock = self._listen(cfg.init_port)
            self._msg_sock = self._listen(cfg.message_port)
        except OSError:
            self.stop()
            raise
        for target, name in (
            (self._init_accept_loop, "init-accept"),
            (self._msg_accept_loop, "msg-accept"),
        ):
            t = threading.Thread(target=target, daemon=True, name=name)
            t.start()
            self._threads.append(t)
        log.info(
            "server up: %dx%d, init :%d, messages :%d, transport %s",
            cfg.width, cfg.height, cfg.init_port, cfg.message_port, cfg.transport,
        )
        return self

    def _listen(self, port: int) -> socket.socket:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self.config.host, port))
        sock.listen(16)
        return sock

    def stop(self) -> None:
        self._stopping.set()
        for sock in (self._init_sock, self._msg_sock):
            if sock is not None:
                try:
                    sock.close()
                except OSError:
                    pass
        with self._conn_lock:
            init_conns = list(self._init_conns)
            msg_conns = list(self._msg_conns.values())
            self._init_conns.clear()
            self._msg_conns.clear()
        for sock in init_conns:
            try:
                sock.close()
            except OSError:
                pass
        for conn in msg_conns:
            conn.close()
        if self.writer is not None:
            self.writer.close()
            self.writer = None

    def __enter__(self) -> "ServerRuntime":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- init channel --------------------------------------------------------

    def _session_count(self) -> int:
        with self._conn_lock:
            return len(self._init_conns)

    def _init_accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, addr = self._init_sock.accept()
            except OSError:
                return
            threading.Thread(
                target=self._handle_init_conn, args=(conn, addr), daemon=True, name="init-conn"
            ).start()

    def _handle_init_conn(self, conn: socket.socket, addr) -> None:
        try:
            conn.settimeout(5.0)
            try:
                msg = netio.recv_message(conn)
            except wire.WireError as exc:
                netio.send_message(conn, wire.error_for(exc))
                conn.close()
                return
            if not isinstance(msg, wire.Hello):
                netio.send_message(conn, wire.ErrorMsg("malformed", "expected hello"))
                conn.close()
                return
            if msg.protocol_version != wire.PROTOCOL_VERSION:
                netio.send_message(
                    conn,
                    wire.ErrorMsg(
                        "version_mismatch",
                        f"server speaks version {wire.PROTOCOL_VERSION}, client sent {msg.protocol_version}",
                    ),
                )
                conn.close()
                return
            if self._session_count() >= self.config.max_clients:
                netio.send_message(conn, wire.ErrorMsg("unsupported", "max_clients reached"))
                conn.close()
                return
            desc = self.writer.desc
            netio.send_message(
                conn,
                wire.InitPacket(
                    width=desc.width,
                    height=desc.height,
                    color_format=desc.color_format,
                    depth_format=desc.depth_format,
                    color_pitch=desc.color_pitch,
                    depth_pitch=desc.depth_pitch,
                    transport=self.writer.transport,
                    attachment_token=self.writer.attachment_token,
                    frame_region_bytes=desc.region_bytes,
                ),
            )
            log.info("client %s completed init handshake (%s)", addr, msg.client_name or "unnamed")
        except OSError:
            try:
                conn.close()
            except OSError:
                pass
            return
        # keep the connection open for error notifications; park until EOF
        with self._conn_lock:
            self._init_conns.append(conn)
        try:
            conn.settimeout(None)
            while conn.recv(1):
                pass
        except OSError:
            pass
        with self._conn_lock:
            if conn in self._init_conns:
                self._init_conns.remove(conn)
        try:
            conn.close()
        except OSError:
            pass

    # -- message channel -----------------------------------------------------

    def _msg_accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, addr = self._msg_sock.accept()
            except OSError:
                return
            with self._conn_lock:
                if len(self._msg_conns) >= self.config.max_clients:
                    try:
                        netio.send_message(conn, wire.ErrorMsg("unsupported", "max_clients reached"))
                        conn.close()
                    except OSError:
                        pass
                    continue
                conn_id = self._next_conn_id
                self._next_conn_id += 1
                self._msg_conns[conn_id] = _ClientConn(conn_id, conn, self._inbox)
            log.info("message client %d connected from %s", conn_id, addr)

    def _reap_clients(self) -> None:
        now = time.monotonic()
        with self._conn_lock:
            stale = [
                (cid, c)
                for cid, c in self._msg_conns.items()
                if not c.alive or now - c.last_activity > self.config.client_timeout
            ]
            for cid, _ in stale:
                del self._msg_conns[cid]
        for cid, conn in stale:
            conn.close()
            log.info("reaped message client %d", cid)

    # -- render-loop API -------------------------------------------------------

    def poll_messages(self) -> PollSummary:
        """Drain queued messages; apply camera/object updates latest-wins."""
        summary = PollSummary()
        last_camera: Optional[wire.CameraPoseMsg] = None
        last_objects: Dict[str, wire.ObjectPoseMsg] = {}
        while True:
            try:
                kind, conn_id, msg = self._inbox.get_nowait()
            except queue.Empty:
                break
            if kind == "malformed":
                summary.malformed += 1
                continue
            if isinstance(msg, wire.CameraPoseMsg):
                last_camera = msg
            elif isinstance(msg, wire.ObjectPoseMsg):
                last_objects[msg.object_id] = msg
            else:
                summary.ignored += 1

        if last_camera is not None:
            try:
                self._apply_camera(last_camera)
                summary.camera_updates = 1
            except geometry.MalformedPoseError as exc:
                log.warning("dropping camera pose: %s", exc)
                summary.malformed += 1
        for msg in last_objects.values():
            try:
                pose = geometry.Pose(
                    position=np.asarray(msg.position, dtype=np.float64),
                    rotation=np.asarray(msg.rotation, dtype=np.float64),
                    convention=msg.convention,
                )
                geometry.pose_to_world_rt(pose)  # validates
                self.scene.object_poses[msg.object_id] = (pose, float(msg.scale))
                summary.object_updates += 1
            except geometry.MalformedPoseError as exc:
                log.warning("dropping object pose for '%s': %s", msg.object_id, exc)
                summary.malformed += 1

        self.malformed_total += summary.malformed
        self._reap_clients()
        with self._conn_lock:
            summary.clients = len(self._msg_conns)
        return summary

    def _apply_camera(self, msg: wire.CameraPoseMsg) -> None:
        pose = geometry.Pose(
            position=np.asarray(msg.position, dtype=np.float64),
            rotation=np.asarray(msg.rotation, dtype=np.float64),
            convention=msg.convention,
        )
        fov = math.radians(msg.fov_y_deg) if msg.fov_y_deg else self.config.default_fov_y
        view = geometry.client_pose_to_view(pose, fov, self.config.width, self.config.height)
        self.scene.camera = view
        self.scene.camera_pose = pose
        self.scene.fov_y = fov

    def publish(self, color: np.ndarray, invdepth: np.ndarray) -> int:
        """Convert inverse depth to linear and publish the next frame."""
        linear = geometry.invdepth_to_linear(invdepth, self.config.far_sentinel).astype(np.float32)
        self._frame_index += 1
        return self.writer.publish(
            color, linear, frame_index=self._frame_index, timestamp_ns=time.monotonic_ns()
        )

    def broadcast_telemetry(self, series: str, value: float) -> None:
        msg = wire.TelemetryMsg(series=series, t=self.session_time(), value=float(value))
        with self._conn_lock:
            conns = list(self._msg_conns.values())
        for conn in conns:
            conn.enqueue(msg)

    def session_time(self) -> float:
        return time.monotonic() - self._t0

    @property
    def frame_index(self) -> int:
        return self._frame_index

    def _default_scene(self) -> SceneState:
        pose = geometry.Pose.identity()
        fov = self.config.default_fov_y
        view = geometry.client_pose_to_view(pose, fov, self.config.width, self.config.height)
        return SceneState(camera=view, camera_pose=pose, fov_y=fov)
