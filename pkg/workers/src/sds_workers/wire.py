"""Standalone implementation of the harness wire protocol, worker side.

Frames: [u32 little-endian total_len][u8 kind][payload]; kind 0 is one UTF-8
JSON header object, kind 1 is raw s16le PCM. A message is a header frame plus
one audio frame when the header's "audio" key declares rate and sample count.
Headers are canonical JSON (sorted keys, compact separators) so responses are
byte-identical to any other conforming implementation.

This module deliberately does not import the harness package: the protocol
bytes are the only contract.
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass
from typing import Any

KIND_HEADER = 0
KIND_AUDIO = 1

_LEN = struct.Struct("<I")


class WireError(Exception):
    pass


def encode_header(obj: dict[str, Any]) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def encode_frame(kind: int, payload: bytes) -> bytes:
    if kind not in (KIND_HEADER, KIND_AUDIO):
        raise WireError(f"bad frame kind {kind}")
    return _LEN.pack(1 + len(payload)) + bytes([kind]) + payload


def encode_message(header: dict[str, Any], audio: bytes | None = None, audio_rate: int | None = None) -> bytes:
    header = dict(header)
    if audio is not None:
        if audio_rate is None:
            raise WireError("audio requires a sample rate")
        header["audio"] = {"sample_rate_hz": audio_rate, "sample_count": len(audio) // 2}
    else:
        header.pop("audio", None)
    out = encode_frame(KIND_HEADER, encode_header(header))
    if audio is not None:
        out += encode_frame(KIND_AUDIO, audio)
    return out


@dataclass
class Message:
    header: dict[str, Any]
    audio: bytes | None = None

    @property
    def audio_rate(self) -> int | None:
        meta = self.header.get("audio")
        return meta["sample_rate_hz"] if meta else None


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = sock.recv(remaining)
        if not chunk:
            raise WireError("connection closed")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> tuple[int, bytes]:
    (total_len,) = _LEN.unpack(_recv_exact(sock, 4))
    body = _recv_exact(sock, total_len)
    kind = body[0]
    if kind not in (KIND_HEADER, KIND_AUDIO):
        raise WireError(f"bad frame kind {kind}")
    return kind, body[1:]


def read_message(sock: socket.socket) -> Message:
    kind, payload = read_frame(sock)
    if kind != KIND_HEADER:
        raise WireError("message must start with a header frame")
    header = json.loads(payload.decode("utf-8"))
    audio = None
    if header.get("audio"):
        audio_kind, audio_payload = read_frame(sock)
        if audio_kind != KIND_AUDIO:
            raise WireError("declared audio frame missing")
        audio = audio_payload
    return Message(header=header, audio=audio)
