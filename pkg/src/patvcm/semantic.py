"""Semantic token streams: class labels, quantized skeletons, captions.

All bit costs are content-independent: 7 bits per class label, 102 bits
per skeleton (17 keypoints on an 8x8 grid inside the ROI box), and 1
presence bit plus 152 caption bits (19 symbols x 8 bits) for text.  The
decoder interprets these tokens directly; no task-model call is needed to
materialize them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from patvcm.container import pack_bits, unpack_bits
from patvcm.errors import StructuralError
from patvcm.roi import Box

CLASS_COUNT = 80
CLASS_BITS = 7

SKELETON_KEYPOINTS = 17
SKELETON_GRID = 8
SKELETON_AXIS_BITS = 3
SKELETON_BITS = SKELETON_KEYPOINTS * 2 * SKELETON_AXIS_BITS  # 102

TEXT_SYMBOLS = 19
TEXT_SYMBOL_BITS = 8
TEXT_CONTENT_BITS = TEXT_SYMBOLS * TEXT_SYMBOL_BITS  # 152
UNKNOWN_SYMBOL = "?"
PAD_SYMBOL = " "

HARD_IOU_THRESHOLD = 0.30
POLICY_MODES = ("none", "uniform", "adaptive")


@dataclass(frozen=True)
class ClassToken:
    class_id: int

    def __post_init__(self) -> None:
        if not 0 <= self.class_id < CLASS_COUNT:
            raise ValueError(f"class id {self.class_id} out of [0, {CLASS_COUNT})")


def encode_class(class_id: int) -> ClassToken:
    return ClassToken(class_id)


def decode_class(token: ClassToken) -> int:
    return token.class_id


@dataclass(frozen=True)
class SkeletonToken:
    codes: tuple[tuple[int, int], ...]  # (row_code, col_code) per keypoint

    def __post_init__(self) -> None:
        if len(self.codes) != SKELETON_KEYPOINTS:
            raise ValueError(f"skeleton needs {SKELETON_KEYPOINTS} keypoints")
        for r, c in self.codes:
            if not (0 <= r < SKELETON_GRID and 0 <= c < SKELETON_GRID):
                raise ValueError(f"skeleton code ({r}, {c}) out of grid")

    @property
    def bits(self) -> int:
        return SKELETON_BITS


def quantize_skeleton(keypoints: np.ndarray, box: Box) -> SkeletonToken:
    """Quantize 17 (x, y) points onto the 8x8 grid of a ROI box.

    Points are clamped into the box first; per-axis dequantization error is
    at most box_dim / 16.
    """
    pts = np.asarray(keypoints, dtype=np.float64)
    if pts.shape != (SKELETON_KEYPOINTS, 2):
        raise ValueError(f"expected ({SKELETON_KEYPOINTS}, 2) keypoints, got {pts.shape}")
    if box.w < 1 or box.h < 1:
        raise ValueError("degenerate box")
    x = np.clip(pts[:, 0], box.x0, box.x0 + box.w)
    y = np.clip(pts[:, 1], box.y0, box.y0 + box.h)
    col = np.clip(np.floor(SKELETON_GRID * (x - box.x0) / box.w), 0, SKELETON_GRID - 1)
    row = np.clip(np.floor(SKELETON_GRID * (y - box.y0) / box.h), 0, SKELETON_GRID - 1)
    return SkeletonToken(tuple((int(r), int(c)) for r, c in zip(row, col)))


def dequantize_skeleton(token: SkeletonToken, box: Box) -> np.ndarray:
    """Grid-cell centers mapped back into box coordinates, as (17, 2) (x, y)."""
    out = np.empty((SKELETON_KEYPOINTS, 2), dtype=np.float64)
    for k, (r, c) in enumerate(token.codes):
        out[k, 0] = box.x0 + (c + 0.5) * box.w / SKELETON_GRID
        out[k, 1] = box.y0 + (r + 0.5) * box.h / SKELETON_GRID
    return out


@dataclass(frozen=True)
class TextToken:
    present: bool
    symbols: str = ""
    flagged: bool = False

    def __post_init__(self) -> None:
        if self.present and len(self.symbols) != TEXT_SYMBOLS:
            raise ValueError(f"text token needs exactly {TEXT_SYMBOLS} symbols")
        if not self.present and self.symbols:
            raise ValueError("absent text token carries no symbols")

    @property
    def bits(self) -> int:
        return 1 + (TEXT_CONTENT_BITS if self.present else 0)


def encode_text(caption: str | None) -> TextToken:
    """Truncate/pad to 19 symbols of the 256-symbol (latin-1) charset.

    None encodes absence (presence bit only).  Symbols outside the charset
    are substituted with '?' and the token is flagged.
    """
    if caption is None:
        return TextToken(False)
    flagged = False
    chars = []
    for ch in caption[:TEXT_SYMBOLS]:
        if ord(ch) < 256:
            chars.append(ch)
        else:
            chars.append(UNKNOWN_SYMBOL)
            flagged = True
    symbols = "".join(chars).ljust(TEXT_SYMBOLS, PAD_SYMBOL)
    return TextToken(True, symbols, flagged)


def decode_text(token: TextToken) -> str | None:
    return token.symbols if token.present else None


@dataclass(frozen=True)
class AdaptivePolicy:
    mode: str
    hard_threshold: float = HARD_IOU_THRESHOLD

    def __post_init__(self) -> None:
        if self.mode not in POLICY_MODES:
            raise ValueError(f"policy mode must be one of {POLICY_MODES}")


def policy_decide(encoder_iou_estimate: float, policy: AdaptivePolicy) -> bool:
    """Transmit caption content?  Adaptive: only below the hard threshold."""
    if policy.mode == "none":
        return False
    if policy.mode == "uniform":
        return True
    return encoder_iou_estimate < policy.hard_threshold


def expected_bits(policy: AdaptivePolicy, hard_fraction):
    """Expected text bits per ROI under the 1-bit presence flag scheme."""
    if not 0 <= hard_fraction <= 1:
        raise ValueError("hard fraction must be in [0, 1]")
    if policy.mode == "none":
        return 1
    if policy.mode == "uniform":
        return 1 + TEXT_CONTENT_BITS
    return 1 + TEXT_CONTENT_BITS * hard_fraction


# --- payload builders (per-ROI tokens concatenated in RoiSet order) ---

def class_payload(tokens: Sequence[ClassToken]) -> tuple[bytes, int]:
    return pack_bits((t.class_id, CLASS_BITS) for t in tokens)


def parse_class_payload(payload: bytes, payload_bits: int, roi_count: int) -> list[ClassToken]:
    if payload_bits != roi_count * CLASS_BITS:
        raise StructuralError(
            f"class payload has {payload_bits} bits, expected {roi_count * CLASS_BITS}"
        )
    return [ClassToken(v) for v in unpack_bits(payload, [CLASS_BITS] * roi_count)]


def skeleton_payload(tokens: Sequence[SkeletonToken]) -> tuple[bytes, int]:
    fields = []
    for tok in tokens:
        for r, c in tok.codes:
            fields.append((r, SKELETON_AXIS_BITS))
            fields.append((c, SKELETON_AXIS_BITS))
    return pack_bits(fields)


def parse_skeleton_payload(
    payload: bytes, payload_bits: int, roi_count: int
) -> list[SkeletonToken]:
    if payload_bits != roi_count * SKELETON_BITS:
        raise StructuralError(
            f"skeleton payload has {payload_bits} bits, expected {roi_count * SKELETON_BITS}"
        )
    values = unpack_bits(payload, [SKELETON_AXIS_BITS] * (roi_count * SKELETON_KEYPOINTS * 2))
    tokens = []
    for n in range(roi_count):
        base = n * SKELETON_KEYPOINTS * 2
        codes = tuple(
            (values[base + 2 * k], values[base + 2 * k + 1])
            for k in range(SKELETON_KEYPOINTS)
        )
        tokens.append(SkeletonToken(codes))
    return tokens


def text_payload(tokens: Sequence[TextToken]) -> tuple[bytes, int]:
    fields = []
    for tok in tokens:
        fields.append((int(tok.present), 1))
        if tok.present:
            for ch in tok.symbols:
                fields.append((ord(ch), TEXT_SYMBOL_BITS))
    return pack_bits(fields)


def parse_text_payload(payload: bytes, payload_bits: int, roi_count: int) -> list[TextToken]:
    acc = int.from_bytes(payload, "big")
    avail = len(payload) * 8
    pos = 0

    def take(width: int) -> int:
        nonlocal pos
        if pos + width > payload_bits:
            raise StructuralError("text payload exhausted mid-token")
        value = (acc >> (avail - pos - width)) & ((1 << width) - 1)
        pos += width
        return value

    tokens = []
    for _ in range(roi_count):
        if take(1):
            symbols = "".join(chr(take(TEXT_SYMBOL_BITS)) for _ in range(TEXT_SYMBOLS))
            tokens.append(TextToken(True, symbols))
        else:
            tokens.append(TextToken(False))
    if pos != payload_bits:
        raise StructuralError(
            f"text payload has {payload_bits - pos} unread bits for {roi_count} ROIs"
        )
    return tokens
