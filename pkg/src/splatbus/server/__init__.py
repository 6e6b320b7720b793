"""Embeddable render server: frame region ownership, control channels, demo loop."""

from splatbus.server.config import ServerConfig
from splatbus.server.runtime import PollSummary, SceneState, ServerRuntime
from splatbus.server.demo import procedural_scene, run_demo

__all__ = [
    "ServerConfig",
    "ServerRuntime",
    "SceneState",
    "PollSummary",
    "run_demo",
    "procedural_scene",
]
