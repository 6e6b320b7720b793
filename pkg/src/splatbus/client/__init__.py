"""Headless client SDK: handshake, frame snapshots, pose streaming, telemetry capture."""

from splatbus.client.session import (
    AttachFailure,
    ClientSession,
    HandshakeError,
    SessionStats,
    connect,
)

__all__ = ["ClientSession", "SessionStats", "connect", "HandshakeError", "AttachFailure"]
