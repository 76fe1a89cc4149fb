"""Framed wire protocol for remote task models.

Frame layout: 4-byte big-endian length prefix, then a protocol version
byte, then a UTF-8 JSON body of length-1 bytes.  Requests carry
request_id, capability, a base64 P6 pixmap image payload, and optional
box / points / params.  Each request gets exactly one response with the
matching request_id.

Response payloads by capability:
  detect   -> boxes: [[x0, y0, w, h, confidence], ...]
  segment  -> mask (run-length encoded) or masks when params.candidates
  depth    -> base64 little-endian float32 grid + dims
  classify -> class_id
  pose     -> 17 [x, y] keypoints
  caption  -> caption string

Binary mask RLE: row-major run lengths of alternating values starting
with False.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

VERSION = 1
_LENGTH = struct.Struct(">I")

# Frames larger than this get a structured "payload too large" error
# (connection preserved); parsing never materializes them as JSON.
MAX_FRAME_BYTES = 8 * 1024 * 1024


class ProtocolError(Exception):
    """Malformed frame or wire-contract violation; connection is reset."""


class PayloadTooLarge(Exception):
    """Frame exceeds MAX_FRAME_BYTES; report and keep the connection."""


@dataclass(frozen=True)
class Frame:
    body: dict


def encode_frame(body: dict) -> bytes:
    payload = json.dumps(body, separators=(",", ":"), sort_keys=True).encode("utf-8")
    return _LENGTH.pack(len(payload) + 1) + bytes([VERSION]) + payload


def read_exact(stream: BinaryIO, count: int) -> bytes:
    chunks = []
    remaining = count
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            raise EOFError(f"stream closed with {remaining} bytes pending")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(stream: BinaryIO) -> dict:
    """Read one frame; EOFError at a clean boundary means the peer closed."""
    length = _LENGTH.unpack(read_exact(stream, 4))[0]
    if length < 1:
        raise ProtocolError("frame length must cover the version byte")
    if length > MAX_FRAME_BYTES:
        discarded = 0
        while discarded < length:
            chunk = stream.read(min(65536, length - discarded))
            if not chunk:
                raise EOFError("stream closed while discarding oversized frame")
            discarded += len(chunk)
        raise PayloadTooLarge(f"{length} byte frame exceeds {MAX_FRAME_BYTES}")
    raw = read_exact(stream, length)
    if raw[0] != VERSION:
        raise ProtocolError(f"unsupported protocol version {raw[0]}")
    try:
        body = json.loads(raw[1:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"undecodable frame body: {exc}") from exc
    if not isinstance(body, dict):
        raise ProtocolError("frame body must be a JSON object")
    return body


# --- image / array codecs ---------------------------------------------------


def encode_image(frame: np.ndarray) -> str:
    if frame.ndim != 3 or frame.shape[2] != 3 or frame.dtype != np.uint8:
        raise ValueError(f"image payload needs (H, W, 3) uint8, got {frame.shape} {frame.dtype}")
    h, w = frame.shape[:2]
    raw = f"P6\n{w} {h}\n255\n".encode() + frame.tobytes()
    return base64.b64encode(raw).decode("ascii")


def decode_image(payload: str) -> np.ndarray:
    raw = base64.b64decode(payload.encode("ascii"), validate=True)
    if not raw.startswith(b"P6"):
        raise ProtocolError("image payload is not a P6 pixmap")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ProtocolError("truncated P6 header")
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise ProtocolError("P6 maxval must be 255")
    data = raw[pos : pos + w * h * 3]
    if len(data) != w * h * 3:
        raise ProtocolError("truncated P6 payload")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3)


def encode_mask(mask: np.ndarray) -> dict:
    flat = np.asarray(mask, dtype=bool).reshape(-1)
    runs = []
    current = False
    count = 0
    for value in flat:
        if value == current:
            count += 1
        else:
            runs.append(count)
            current = not current
            count = 1
    runs.append(count)
    return {"h": int(mask.shape[0]), "w": int(mask.shape[1]), "runs": runs}


def decode_mask(payload: dict) -> np.ndarray:
    h, w, runs = payload["h"], payload["w"], payload["runs"]
    flat = np.empty(h * w, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        flat[pos : pos + run] = value
        pos += run
        value = not value
    if pos != h * w:
        raise ProtocolError(f"mask runs cover {pos} pixels, expected {h * w}")
    return flat.reshape(h, w)


def encode_depth(depth: np.ndarray) -> dict:
    grid = np.asarray(depth, dtype="<f4")
    return {
        "h": int(grid.shape[0]),
        "w": int(grid.shape[1]),
        "f32": base64.b64encode(grid.tobytes()).decode("ascii"),
    }


def decode_depth(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["f32"].encode("ascii"), validate=True)
    grid = np.frombuffer(raw, dtype="<f4")
    if grid.size != payload["h"] * payload["w"]:
        raise ProtocolError("depth grid size mismatch")
    return grid.reshape(payload["h"], payload["w"]).astype(np.float32)
