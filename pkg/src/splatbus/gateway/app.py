"""FastAPI service exposing the /ws viewer endpoint and gateway status.

Binary frames and JSON control share the one websocket, discriminated by
message type.  Each viewer holds a single-slot latest-frame cell: newer
frames supersede an unsent one, and a viewer whose send stays blocked while
more than ``BUFFER_LIMIT`` frames supersede it is dropped.
"""

from __future__ import annotations

import asyncio
import itertools
import logging
import os
from collections import deque
from typing import List, Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel
from starlette.concurrency import run_in_threadpool

from splatbus import wire
from splatbus.gateway.relay import GatewayConfig, GatewayRelay

log = logging.getLogger("splatbus.gateway")

BUFFER_LIMIT = 3  # frames a blocked viewer may fall behind before being dropped


class Viewer:
    _ids = itertools.count(1)

    def __init__(self):
        self.id = next(self._ids)
        self.latest_frame: Optional[bytes] = None
        self.texts: deque = deque(maxlen=256)
        self.wakeup = asyncio.Event()
        self.superseded = 0
        self.sending = False
        self.dropped = False
        self.frames_sent = 0


class ViewerHub:
    """Fan-out of relay events into per-viewer cells; lives on the event loop."""

    def __init__(self, loop: asyncio.AbstractEventLoop):
        self.loop = loop
        self.viewers: set = set()

    # called from relay threads
    def frame_threadsafe(self, data: bytes) -> None:
        self.loop.call_soon_threadsafe(self.push_frame, data)

    def text_threadsafe(self, text: str) -> None:
        self.loop.call_soon_threadsafe(self.push_text, text)

    # loop context
    def push_frame(self, data: bytes) -> None:
        for viewer in list(self.viewers):
            if viewer.dropped:
                continue
            if viewer.latest_frame is not None or viewer.sending:
                viewer.superseded += 1
                if viewer.sending and viewer.superseded > BUFFER_LIMIT:
                    log.warning("viewer %d stalled, dropping", viewer.id)
                    viewer.dropped = True
                    viewer.wakeup.set()
                    continue
            viewer.latest_frame = data
            viewer.wakeup.set()

    def push_text(self, text: str) -> None:
        for viewer in list(self.viewers):
            if not viewer.dropped:
                viewer.texts.append(text)
                viewer.wakeup.set()


class StatusResponse(BaseModel):
    server_connected: bool
    viewers: int
    frames_relayed: int
    fps_cap: float
    encoding: str
    object_ids: List[str]
    width: Optional[int] = None
    height: Optional[int] = None


class HealthResponse(BaseModel):
    ok: bool


async def _viewer_outbox(ws: WebSocket, viewer: Viewer) -> None:
    while True:
        await viewer.wakeup.wait()
        viewer.wakeup.clear()
        if viewer.dropped:
            await ws.close(code=1013)  # try again later
            return
        while viewer.texts:
            await ws.send_text(viewer.texts.popleft())
        frame = viewer.latest_frame
        if frame is not None:
            viewer.latest_frame = None
            viewer.sending = True
            try:
                await ws.send_bytes(frame)
            finally:
                viewer.sending = False
            if viewer.dropped:
                await ws.close(code=1013)
                return
            viewer.superseded = 0
            viewer.frames_sent += 1


async def _viewer_inbox(ws: WebSocket, viewer: Viewer, relay: GatewayRelay) -> None:
    while True:
        message = await ws.receive()
        if message["type"] == "websocket.disconnect":
            return
        text = message.get("text")
        if text is None:
            continue  # binary uploads from viewers are not part of the protocol
        try:
            await run_in_threadpool(relay.forward_text, text)
        except wire.WireError as exc:
            viewer.texts.append(f'{{"type":"status","state":"rejected","error":"{exc.code}"}}')
            viewer.wakeup.set()
        except ConnectionError:
            viewer.texts.append('{"type":"status","state":"connecting"}')
            viewer.wakeup.set()


def create_app(config: GatewayConfig, relay: Optional[GatewayRelay] = None) -> FastAPI:
    relay = relay or GatewayRelay(config)

    async def lifespan(app: FastAPI):
        hub = ViewerHub(asyncio.get_running_loop())
        app.state.hub = hub
        relay.on_frame = hub.frame_threadsafe
        relay.on_text = hub.text_threadsafe
        relay.start()
        yield
        relay.stop()

    app = FastAPI(title="splatbus gateway", lifespan=lifespan)
    app.state.relay = relay
    app.state.config = config

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        return HealthResponse(ok=True)

    @app.get("/status", response_model=StatusResponse)
    def status():
        size = relay.frame_size()
        return StatusResponse(
            server_connected=relay.connected.is_set(),
            viewers=len(app.state.hub.viewers),
            frames_relayed=relay.frames_relayed,
            fps_cap=config.target_fps_cap,
            encoding=config.encoding,
            object_ids=sorted(relay._seen_objects),
            width=size[0] if size else None,
            height=size[1] if size else None,
        )

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        viewer = Viewer()
        hub: ViewerHub = app.state.hub
        hub.viewers.add(viewer)
        log.info("viewer %d connected (%d total)", viewer.id, len(hub.viewers))
        try:
            await ws.send_text(relay.status_message())
            inbox = asyncio.create_task(_viewer_inbox(ws, viewer, relay))
            outbox = asyncio.create_task(_viewer_outbox(ws, viewer))
            done, pending = await asyncio.wait({inbox, outbox}, return_when=asyncio.FIRST_COMPLETED)
            for task in pending:
                task.cancel()
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(exc, (WebSocketDisconnect, RuntimeError, OSError)):
                    raise exc
        except WebSocketDisconnect:
            pass
        finally:
            hub.viewers.discard(viewer)
            log.info("viewer %d gone (%d left)", viewer.id, len(hub.viewers))

    static_dir = config.static_dir
    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="viewer")

    return app


def serve_web(config: GatewayConfig, host: str = "0.0.0.0") -> None:
    """Run the gateway under uvicorn until interrupted."""
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=config.listen_port, log_level="warning")
