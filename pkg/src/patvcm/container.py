"""Bit-exact layered bitstream container (the ``.patv`` format).

Byte layout, all integers big-endian:

    magic b"PATV" | version u8 | frames u16 | height u16 | width u16
    | profile_id u8 | stream_count u8 | baseline_bits u32
    | baseline payload bytes | auxiliary records ...

Each auxiliary record:

    type_tag u8 | task_id u8 | payload_bits u32 | payload bytes

Payloads are MSB-first bit strings stored in ceil(payload_bits / 8) bytes,
zero-padded to the byte boundary.  Records are byte-aligned; their interiors
are not.  Header bytes are excluded from rate accounting by convention:
rate = baseline_bits + sum of record payload_bits.

Unknown type tags are carried opaquely so new token types can be added
without container changes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from typing import Iterable, Sequence

from patvcm.errors import StructuralError

MAGIC = b"PATV"
VERSION = 1

_HEADER = struct.Struct(">4sBHHHBBI")
_RECORD_HEAD = struct.Struct(">BBI")


class StreamType(IntEnum):
    VISUAL_RESIDUAL = 1
    PROMPT = 2
    TEXT = 3
    CLASS_LABEL = 4
    SKELETON = 5


def _payload_len(payload_bits: int) -> int:
    return (payload_bits + 7) // 8


@dataclass(frozen=True)
class ClipHeader:
    frames: int
    height: int
    width: int
    profile_id: int
    stream_count: int
    baseline_bits: int
    version: int = VERSION

    def validate(self) -> None:
        if self.frames < 1:
            raise ValueError(f"frames must be >= 1, got {self.frames}")
        if self.height % 8 or self.width % 8 or self.height < 8 or self.width < 8:
            raise ValueError(
                f"height/width must be positive multiples of 8, got "
                f"{self.height}x{self.width}"
            )
        if not 0 <= self.profile_id <= 255:
            raise ValueError(f"profile_id out of range: {self.profile_id}")
        if not 0 <= self.stream_count <= 255:
            raise ValueError(f"stream_count out of range: {self.stream_count}")
        if self.baseline_bits < 0:
            raise ValueError("baseline_bits must be non-negative")


@dataclass(frozen=True)
class AuxStreamRecord:
    type_tag: int
    task_id: int
    payload_bits: int
    payload: bytes

    def __post_init__(self) -> None:
        if not 0 <= self.type_tag <= 255:
            raise ValueError(f"type_tag out of range: {self.type_tag}")
        if not 0 <= self.task_id <= 255:
            raise ValueError(f"task_id out of range: {self.task_id}")
        if self.payload_bits < 0:
            raise ValueError("payload_bits must be non-negative")
        if len(self.payload) != _payload_len(self.payload_bits):
            raise ValueError(
                f"payload holds {len(self.payload)} bytes, expected "
                f"{_payload_len(self.payload_bits)} for {self.payload_bits} bits"
            )

    @property
    def is_known(self) -> bool:
        return self.type_tag in StreamType._value2member_map_

    @property
    def type_name(self) -> str:
        if self.is_known:
            return StreamType(self.type_tag).name
        return f"UNKNOWN({self.type_tag})"


@dataclass(frozen=True)
class Bitstream:
    header: ClipHeader
    baseline_payload: bytes
    aux_records: tuple[AuxStreamRecord, ...]

    def total_bits(self) -> int:
        return self.header.baseline_bits + sum(r.payload_bits for r in self.aux_records)

    def bpp(self) -> Fraction:
        h = self.header
        return bits_per_pixel(self.total_bits(), h.frames, h.height, h.width)


def _check_padding(payload: bytes, payload_bits: int, where: str) -> None:
    pad = len(payload) * 8 - payload_bits
    if pad == 0:
        return
    if payload and payload[-1] & ((1 << pad) - 1):
        raise StructuralError(f"nonzero padding bits in {where}")


def mux(header: ClipHeader, baseline: bytes, records: Sequence[AuxStreamRecord]) -> bytes:
    """Serialize header + baseline payload + auxiliary records.

    demux(mux(header, baseline, records)) reproduces all inputs exactly.
    """
    header.validate()
    if header.stream_count != len(records):
        raise StructuralError(
            f"header stream_count {header.stream_count} != {len(records)} records"
        )
    if len(baseline) != _payload_len(header.baseline_bits):
        raise StructuralError(
            f"baseline payload holds {len(baseline)} bytes, expected "
            f"{_payload_len(header.baseline_bits)} for {header.baseline_bits} bits"
        )
    _check_padding(baseline, header.baseline_bits, "baseline payload")
    out = bytearray()
    out += _HEADER.pack(
        MAGIC,
        header.version,
        header.frames,
        header.height,
        header.width,
        header.profile_id,
        header.stream_count,
        header.baseline_bits,
    )
    out += baseline
    for i, rec in enumerate(records):
        _check_padding(rec.payload, rec.payload_bits, f"record {i}")
        out += _RECORD_HEAD.pack(rec.type_tag, rec.task_id, rec.payload_bits)
        out += rec.payload
    return bytes(out)


def demux(data: bytes) -> tuple[ClipHeader, bytes, tuple[AuxStreamRecord, ...]]:
    """Parse a serialized stream back into (header, baseline, records).

    Unknown type tags are preserved opaquely.  Truncation, a corrupt magic,
    or nonzero padding raise StructuralError; no partial output is returned.
    """
    if len(data) < _HEADER.size:
        raise StructuralError(f"stream truncated: {len(data)} bytes < header size")
    magic, version, frames, height, width, profile_id, stream_count, baseline_bits = (
        _HEADER.unpack_from(data, 0)
    )
    if magic != MAGIC:
        raise StructuralError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise StructuralError(f"unsupported version {version}")
    header = ClipHeader(
        frames=frames,
        height=height,
        width=width,
        profile_id=profile_id,
        stream_count=stream_count,
        baseline_bits=baseline_bits,
        version=version,
    )
    try:
        header.validate()
    except ValueError as exc:
        raise StructuralError(f"invalid header: {exc}") from exc
    pos = _HEADER.size
    blen = _payload_len(baseline_bits)
    if pos + blen > len(data):
        raise StructuralError("truncated baseline payload")
    baseline = data[pos : pos + blen]
    _check_padding(baseline, baseline_bits, "baseline payload")
    pos += blen
    records = []
    for i in range(stream_count):
        if pos + _RECORD_HEAD.size > len(data):
            raise StructuralError(f"truncated record header at record {i}")
        type_tag, task_id, payload_bits = _RECORD_HEAD.unpack_from(data, pos)
        pos += _RECORD_HEAD.size
        plen = _payload_len(payload_bits)
        if pos + plen > len(data):
            raise StructuralError(f"truncated payload at record {i}")
        payload = data[pos : pos + plen]
        _check_padding(payload, payload_bits, f"record {i}")
        pos += plen
        records.append(AuxStreamRecord(type_tag, task_id, payload_bits, payload))
    if pos != len(data):
        raise StructuralError(f"{len(data) - pos} trailing bytes after last record")
    return header, baseline, tuple(records)


def bits_per_pixel(total_bits: int, frames: int, height: int, width: int) -> Fraction:
    """Exact rate per pixel: total_bits / (frames * height * width)."""
    denom = frames * height * width
    if denom <= 0:
        raise ValueError(f"non-positive pixel count {denom}")
    if total_bits < 0:
        raise ValueError("total_bits must be non-negative")
    return Fraction(total_bits, denom)


def format_bpp(value: Fraction | float, places: int = 6) -> str:
    """Render a rate as a decimal string with `places` digits (round half up)."""
    frac = value if isinstance(value, Fraction) else Fraction(value)
    scaled = frac * 10**places + Fraction(1, 2)
    units = scaled.numerator // scaled.denominator
    whole, rem = divmod(units, 10**places)
    return f"{whole}.{rem:0{places}d}"


def pack_bits(fields: Iterable[tuple[int, int]]) -> tuple[bytes, int]:
    """MSB-first concatenation of (value, bit_width) fields.

    Returns (payload bytes zero-padded to the byte boundary, total bit count).
    """
    acc = 0
    nbits = 0
    for value, width in fields:
        if width <= 0:
            raise ValueError(f"bit width must be positive, got {width}")
        if not 0 <= value < (1 << width):
            raise ValueError(f"value {value} does not fit in {width} bits")
        acc = (acc << width) | value
        nbits += width
    pad = (-nbits) % 8
    acc <<= pad
    return acc.to_bytes((nbits + pad) // 8, "big"), nbits


def unpack_bits(payload: bytes, widths: Sequence[int]) -> list[int]:
    """Inverse of pack_bits for a known width sequence."""
    total = sum(widths)
    if total > len(payload) * 8:
        raise ValueError(f"{total} bits requested from {len(payload) * 8}-bit payload")
    acc = int.from_bytes(payload, "big")
    avail = len(payload) * 8
    out = []
    pos = 0
    for width in widths:
        if width <= 0:
            raise ValueError(f"bit width must be positive, got {width}")
        shift = avail - pos - width
        out.append((acc >> shift) & ((1 << width) - 1))
        pos += width
    return out
