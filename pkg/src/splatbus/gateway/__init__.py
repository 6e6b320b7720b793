"""Web gateway: bridges the frame bus and message channel to browser viewers."""

from splatbus.gateway.encoding import (
    ENC_PNG,
    ENC_RGBA8_RAW,
    WebFramePacket,
    decode_packet,
    depth_preview8,
    encode_packet,
    tonemap_to_rgba8,
)
from splatbus.gateway.relay import GatewayConfig, GatewayRelay
from splatbus.gateway.app import create_app, serve_web

__all__ = [
    "WebFramePacket",
    "encode_packet",
    "decode_packet",
    "tonemap_to_rgba8",
    "depth_preview8",
    "ENC_RGBA8_RAW",
    "ENC_PNG",
    "GatewayConfig",
    "GatewayRelay",
    "create_app",
    "serve_web",
]
