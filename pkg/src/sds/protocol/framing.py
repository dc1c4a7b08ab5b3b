"""Length-prefixed wire framing shared by the harness and all workers.

Layout per frame: [u32 little-endian total_len][u8 kind][payload], where
total_len = 1 + len(payload). Kind 0 carries one UTF-8 JSON header object;
kind 1 carries raw little-endian signed 16-bit PCM. A logical message is one
header frame, followed by exactly one audio frame when the header's "audio"
key declares sample rate and count. Headers are serialized canonically
(sorted keys, no whitespace) so independent implementations produce
byte-identical frames for the same logical content.
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass
from typing import Any

KIND_HEADER = 0
KIND_AUDIO = 1

MAX_PAYLOAD = 2**31 - 1

_LEN = struct.Struct("<I")


class ProtocolError(Exception):
    pass


class Truncated(ProtocolError):
    """Fewer bytes available than the frame's declared total length."""


class BadKind(ProtocolError):
    """Frame kind byte outside {0, 1}."""


class MalformedHeader(ProtocolError):
    """Header payload is not a single JSON object."""


@dataclass(frozen=True)
class Frame:
    kind: int
    payload: bytes

    @property
    def total_len(self) -> int:
        return 1 + len(self.payload)


def encode_frame(kind: int, payload: bytes) -> bytes:
    if kind not in (KIND_HEADER, KIND_AUDIO):
        raise BadKind(f"kind must be 0 or 1, got {kind}")
    if len(payload) >= MAX_PAYLOAD:
        raise ProtocolError(f"payload too large: {len(payload)} bytes")
    return _LEN.pack(1 + len(payload)) + bytes([kind]) + payload


def decode_frame(data: bytes, offset: int = 0) -> tuple[Frame, int]:
    """Decode one frame starting at `offset`; returns (frame, next offset).

    Consumes exactly total_len + 4 bytes.
    """
    if len(data) - offset < 4:
        raise Truncated("missing length prefix")
    (total_len,) = _LEN.unpack_from(data, offset)
    if total_len < 1:
        raise ProtocolError(f"total_len must be >= 1, got {total_len}")
    end = offset + 4 + total_len
    if len(data) < end:
        raise Truncated(f"frame declares {total_len} bytes, {len(data) - offset - 4} available")
    kind = data[offset + 4]
    if kind not in (KIND_HEADER, KIND_AUDIO):
        raise BadKind(f"kind must be 0 or 1, got {kind}")
    return Frame(kind=kind, payload=bytes(data[offset + 5 : end])), end


def encode_header(obj: dict[str, Any]) -> bytes:
    """Canonical JSON bytes: sorted keys, compact separators, UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def decode_header(payload: bytes) -> dict[str, Any]:
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedHeader(str(exc)) from exc
    if not isinstance(obj, dict):
        raise MalformedHeader(f"header must be a JSON object, got {type(obj).__name__}")
    return obj


@dataclass
class Message:
    """One logical protocol message: a header and optional PCM payload."""

    header: dict[str, Any]
    audio: bytes | None = None

    @property
    def audio_rate(self) -> int | None:
        meta = self.header.get("audio")
        return meta["sample_rate_hz"] if meta else None


def encode_message(header: dict[str, Any], audio: bytes | None = None, audio_rate: int | None = None) -> bytes:
    """Serialize a message; declares the audio frame in the header."""
    header = dict(header)
    if audio is not None:
        if audio_rate is None:
            raise ValueError("audio_rate is required when audio is attached")
        if len(audio) % 2 != 0:
            raise ProtocolError("PCM payload must be an even number of bytes")
        header["audio"] = {"sample_rate_hz": audio_rate, "sample_count": len(audio) // 2}
    else:
        header.pop("audio", None)
    out = encode_frame(KIND_HEADER, encode_header(header))
    if audio is not None:
        out += encode_frame(KIND_AUDIO, audio)
    return out


def decode_message(data: bytes, offset: int = 0) -> tuple[Message, int]:
    frame, offset = decode_frame(data, offset)
    if frame.kind != KIND_HEADER:
        raise ProtocolError("message must start with a header frame")
    header = decode_header(frame.payload)
    audio = None
    meta = header.get("audio")
    if meta:
        audio_frame, offset = decode_frame(data, offset)
        if audio_frame.kind != KIND_AUDIO:
            raise ProtocolError("header declared audio but next frame is not audio")
        if len(audio_frame.payload) != 2 * meta["sample_count"]:
            raise ProtocolError("audio frame length does not match declared sample count")
        audio = audio_frame.payload
    return Message(header=header, audio=audio), offset


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = sock.recv(remaining)
        if not chunk:
            raise Truncated(f"connection closed with {remaining} bytes outstanding")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> Frame:
    prefix = _recv_exact(sock, 4)
    (total_len,) = _LEN.unpack(prefix)
    if total_len < 1:
        raise ProtocolError(f"total_len must be >= 1, got {total_len}")
    body = _recv_exact(sock, total_len)
    kind = body[0]
    if kind not in (KIND_HEADER, KIND_AUDIO):
        raise BadKind(f"kind must be 0 or 1, got {kind}")
    return Frame(kind=kind, payload=body[1:])


def read_message(sock: socket.socket) -> Message:
    frame = read_frame(sock)
    if frame.kind != KIND_HEADER:
        raise ProtocolError("message must start with a header frame")
    header = decode_header(frame.payload)
    audio = None
    meta = header.get("audio")
    if meta:
        audio_frame = read_frame(sock)
        if audio_frame.kind != KIND_AUDIO:
            raise ProtocolError("header declared audio but next frame is not audio")
        audio = audio_frame.payload
    return Message(header=header, audio=audio)
