"""Gateway relay: attaches to the frame bus as a reader and bridges messages.

One thread owns the server connection lifecycle (with reconnect backoff),
one reads frames rate-capped latest-wins, one reads server->client messages
(telemetry).  Viewer fan-out lives in the app layer; the relay only invokes
the callbacks it was given.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

from splatbus import framebus, wire
from splatbus.client import connect
from splatbus.gateway import encoding

log = logging.getLogger("splatbus.gateway")


@dataclass
class GatewayConfig:
    listen_port: int = 7422
    server_host: str = "127.0.0.1"
    init_port: int = 7420
    message_port: int = 7421
    target_fps_cap: float = 30.0
    encoding: str = "rgba8_raw"
    depth_preview: bool = False
    depth_vis_max: float = 100.0
    background: tuple = (0.0, 0.0, 0.0)
    object_ids: tuple = ("scene",)
    static_dir: Optional[str] = None
    reconnect_backoff: float = 0.5
    reconnect_backoff_max: float = 5.0


class GatewayRelay:
    """Bridges one server to any number of viewer callbacks."""

    def __init__(self, config: GatewayConfig):
        self.config = config
        self.on_frame: Callable[[bytes], None] = lambda data: None
        self.on_text: Callable[[str], None] = lambda text: None
        self._session = None
        self._session_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list = []
        self.connected = threading.Event()
        self.frames_relayed = 0
        self._seen_objects = set(config.object_ids)

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        t = threading.Thread(target=self._supervise, daemon=True, name="gateway-supervisor")
        t.start()
        self._threads.append(t)

    def stop(self) -> None:
        self._stop.set()
        self._drop_session()
        for t in self._threads:
            t.join(timeout=5)

    def _drop_session(self) -> None:
        with self._session_lock:
            session, self._session = self._session, None
        self.connected.clear()
        if session is not None:
            session.close()

    def _supervise(self) -> None:
        backoff = self.config.reconnect_backoff
        while not self._stop.is_set():
            try:
                session = connect(
                    self.config.server_host,
                    self.config.init_port,
                    self.config.message_port,
                    client_name="splatbus-gateway",
                )
            except (OSError, ConnectionError, framebus.RegionError) as exc:
                self._emit_status("connecting", error=str(exc))
                if self._stop.wait(backoff):
                    return
                backoff = min(backoff * 2, self.config.reconnect_backoff_max)
                continue
            backoff = self.config.reconnect_backoff
            with self._session_lock:
                self._session = session
            self.connected.set()
            log.info("connected to server %s:%d", self.config.server_host, self.config.init_port)
            self._emit_status("connected")
            frame_thread = threading.Thread(target=self._frame_loop, args=(session,), daemon=True)
            msg_thread = threading.Thread(target=self._message_loop, args=(session,), daemon=True)
            frame_thread.start()
            msg_thread.start()
            frame_thread.join()
            msg_thread.join()
            self._drop_session()
            if not self._stop.is_set():
                self._emit_status("retrying")

    # -- frame path ------------------------------------------------------------

    def _frame_loop(self, session) -> None:
        interval = 1.0 / self.config.target_fps_cap if self.config.target_fps_cap > 0 else 0.0
        next_emit = time.monotonic()
        while not self._stop.is_set() and self._session is session:
            try:
                snap = session.grab_frame("block_until_new", timeout=1.0)
            except framebus.DisconnectedError as exc:
                if not session.reader.writer_alive():
                    log.info("frame region writer gone: %s", exc)
                    return
                continue  # idle server; keep waiting
            except (OSError, ValueError):
                return
            # rate cap with supersede: keep soaking up frames until the slot opens
            now = time.monotonic()
            while now < next_emit and not self._stop.is_set():
                newer = session.grab_frame("nonblocking")
                if newer is not None:
                    snap = newer
                time.sleep(min(0.004, max(0.0, next_emit - now)))
                now = time.monotonic()
            self._emit_frame(snap)
            next_emit = max(now, next_emit) + interval

    def _emit_frame(self, snap: framebus.FrameSnapshot) -> None:
        rgba8 = encoding.tonemap_to_rgba8(snap.color, self.config.background)
        depth8 = None
        if self.config.depth_preview and self.config.encoding == "rgba8_raw":
            depth8 = encoding.depth_preview8(snap.depth, self.config.depth_vis_max)
        packet = encoding.encode_packet(
            snap.frame_index, snap.timestamp_ns, rgba8, self.config.encoding, depth8
        )
        self.frames_relayed += 1
        self.on_frame(packet)

    # -- message path ------------------------------------------------------------

    def _message_loop(self, session) -> None:
        while not self._stop.is_set() and self._session is session:
            try:
                msg = session.recv_message(timeout=1.0)
            except TimeoutError:
                continue
            except OSError:
                return
            except wire.WireError as exc:
                log.warning("undecodable server message: %s", exc)
                continue
            if isinstance(msg, (wire.TelemetryMsg, wire.ErrorMsg)):
                self.on_text(wire.serialize_message(msg))

    def forward_text(self, text: str) -> None:
        """Validate a viewer's JSON message and forward it byte-identically."""
        msg = wire.parse_message(text)
        if not isinstance(msg, (wire.CameraPoseMsg, wire.ObjectPoseMsg)):
            raise wire.UnsupportedError(f"viewers may not send '{msg.type}' messages")
        if isinstance(msg, wire.ObjectPoseMsg):
            self._seen_objects.add(msg.object_id)
        with self._session_lock:
            session = self._session
        if session is None:
            raise ConnectionError("gateway is not connected to a server")
        session.send_raw(text.encode("utf-8"))

    # -- status ------------------------------------------------------------------

    def status_message(self, state: Optional[str] = None) -> str:
        doc = {
            "type": "status",
            "state": state or ("connected" if self.connected.is_set() else "connecting"),
            "object_ids": sorted(self._seen_objects),
            "server": f"{self.config.server_host}:{self.config.init_port}",
            "fps_cap": self.config.target_fps_cap,
            "encoding": self.config.encoding,
            # lets same-host viewers convert frame timestamps to wall clock
            "clock_offset_ns": time.time_ns() - time.monotonic_ns(),
        }
        with self._session_lock:
            if self._session is not None:
                doc["width"] = self._session.init.width
                doc["height"] = self._session.init.height
        return json.dumps(doc)

    def _emit_status(self, state: str, error: Optional[str] = None) -> None:
        text = json.loads(self.status_message(state))
        if error:
            text["error"] = error
        self.on_text(json.dumps(text))

    def frame_size(self):
        with self._session_lock:
            if self._session is None:
                return None
            return (self._session.init.width, self._session.init.height)
