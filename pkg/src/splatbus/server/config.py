"""Server configuration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from splatbus import geometry

DEFAULT_INIT_PORT = 7420
DEFAULT_MESSAGE_PORT = 7421


@dataclass
class ServerConfig:
    width: int = 512
    height: int = 512
    init_port: int = DEFAULT_INIT_PORT
    message_port: int = DEFAULT_MESSAGE_PORT
    transport: str = "shared_memory"
    far_sentinel: float = geometry.DEFAULT_FAR_SENTINEL
    default_fov_y: float = geometry.DEFAULT_FOV_Y  # radians
    max_clients: int = 8
    asset_path: Optional[str] = None
    host: str = "127.0.0.1"
    region_name: Optional[str] = None
    stamp_checksums: bool = False  # reserved header field; tests turn it on
    background: tuple = (0.0, 0.0, 0.0)
    target_fps: float = 60.0
    client_timeout: float = 10.0  # reap message-channel clients idle this long

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"bad frame size {self.width}x{self.height}")
        if self.init_port == self.message_port:
            raise ValueError("init_port and message_port must differ")
        if self.max_clients < 1:
            raise ValueError("max_clients must be >= 1")
        if self.transport not in ("shared_memory", "inprocess"):
            raise ValueError(f"unknown transport '{self.transport}'")
        if not 0.0 < self.default_fov_y < 3.14159:
            raise ValueError("default_fov_y must be in (0, pi)")
