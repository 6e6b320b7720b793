"""Demo executable: the canonical integration of the server runtime.

Renders a PLY asset (or a built-in three-splat scene) with the reference
rasterizer, applies streamed poses each iteration, publishes every frame,
and emits "fps" / "render_ms" telemetry to connected message clients.
"""

from __future__ import annotations

import logging
import threading
import time
from typing import Dict, Optional

import numpy as np

from splatbus.server.config import ServerConfig
from splatbus.server.runtime import ServerRuntime
from splatbus.splatref import GaussianCloud, RenderSettings, load_ply, rasterize, transform_cloud

log = logging.getLogger("splatbus.server")

SCENE_OBJECT_ID = "scene"


def procedural_scene() -> GaussianCloud:
    """Three colored splats in front of the default camera."""
    return GaussianCloud(
        means=np.array([[0.0, 0.0, 3.0], [0.7, 0.25, 3.6], [-0.6, -0.3, 4.2]]),
        scales=np.array([[0.30, 0.22, 0.25], [0.25, 0.35, 0.2], [0.4, 0.25, 0.3]]),
        rotations=np.array(
            [[0.0, 0.0, 0.0, 1.0], [0.0, 0.3826834, 0.0, 0.9238795], [0.1830127, 0.1830127, 0.0, 0.9659258]]
        ),
        opacities=np.array([0.9, 0.8, 0.7]),
        colors=np.array([[0.9, 0.15, 0.1], [0.1, 0.8, 0.2], [0.15, 0.25, 0.95]]),
    )


class DemoRenderer:
    """Per-frame render step shared by run_demo and the integration tests."""

    def __init__(self, config: ServerConfig):
        self.config = config
        if config.asset_path:
            self.base_clouds: Dict[str, GaussianCloud] = {SCENE_OBJECT_ID: load_ply(config.asset_path)}
            log.info("loaded %d gaussians from %s", self.base_clouds[SCENE_OBJECT_ID].count, config.asset_path)
        else:
            self.base_clouds = {SCENE_OBJECT_ID: procedural_scene()}
        self.settings = RenderSettings(
            width=config.width,
            height=config.height,
            fov_y=config.default_fov_y,
            background=config.background,
        )

    @property
    def object_ids(self) -> list:
        return sorted(self.base_clouds)

    def render(self, runtime: ServerRuntime):
        scene = runtime.scene
        parts = []
        for object_id, base in self.base_clouds.items():
            posed = scene.object_poses.get(object_id)
            if posed is None:
                parts.append(base)
            else:
                pose, scale = posed
                parts.append(transform_cloud(base, pose, scale))
        cloud = parts[0] if len(parts) == 1 else _concat_clouds(parts)
        return rasterize(cloud, scene.camera, self.settings)


def _concat_clouds(parts) -> GaussianCloud:
    return GaussianCloud(
        means=np.vstack([p.means for p in parts]),
        scales=np.vstack([p.scales for p in parts]),
        rotations=np.vstack([p.rotations for p in parts]),
        opacities=np.concatenate([p.opacities for p in parts]),
        colors=np.vstack([p.colors for p in parts]),
    )


def run_demo(config: ServerConfig, stop_event: Optional[threading.Event] = None) -> None:
    """Render loop: poll messages, rasterize, publish; runs until interrupted."""
    renderer = DemoRenderer(config)
    runtime = ServerRuntime(config)
    runtime.start()
    stop_event = stop_event or threading.Event()
    frame_interval = 1.0 / config.target_fps if config.target_fps > 0 else 0.0
    fps_smoothed = 0.0
    try:
        next_deadline = time.monotonic()
        while not stop_event.is_set():
            loop_start = time.monotonic()
            runtime.poll_messages()
            out = renderer.render(runtime)
            render_ms = (time.monotonic() - loop_start) * 1e3
            runtime.publish(out.color, out.invdepth)
            frame_time = time.monotonic() - loop_start
            inst_fps = 1.0 / max(frame_time, 1e-6)
            fps_smoothed = inst_fps if fps_smoothed == 0 else 0.9 * fps_smoothed + 0.1 * inst_fps
            runtime.broadcast_telemetry("fps", fps_smoothed)
            runtime.broadcast_telemetry("render_ms", render_ms)
            if frame_interval:
                next_deadline += frame_interval
                delay = next_deadline - time.monotonic()
                if delay > 0:
                    stop_event.wait(delay)
                else:
                    next_deadline = time.monotonic()
    except KeyboardInterrupt:
        log.info("interrupted, shutting down")
    finally:
        runtime.stop()
