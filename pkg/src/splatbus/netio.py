"""Socket helpers for the envelope protocol (blocking, stream sockets)."""

from __future__ import annotations

import socket

from splatbus import wire


def send_payload(sock: socket.socket, payload: bytes) -> None:
    sock.sendall(wire.encode_envelope(payload))


def send_message(sock: socket.socket, msg: wire.ControlMessage) -> None:
    send_payload(sock, wire.serialize_message(msg).encode("utf-8"))


class SocketSource:
    """Adapts a socket to the read(n) interface decode_envelope expects."""

    def __init__(self, sock: socket.socket):
        self._sock = sock

    def read(self, n: int) -> bytes:
        try:
            return self._sock.recv(n)
        except (ConnectionResetError, BrokenPipeError):
            return b""


def recv_envelope(sock: socket.socket) -> wire.Envelope:
    return wire.decode_envelope(SocketSource(sock))


def recv_message(sock: socket.socket) -> wire.ControlMessage:
    return wire.parse_message(recv_envelope(sock).payload)
