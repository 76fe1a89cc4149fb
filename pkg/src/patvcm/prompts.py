"""32-entry point-prompt codebook with encoder-side exhaustive search.

Candidates live on a 6x6 grid of cell centers with the four corner cells
removed, enumerated row-major (index 0 is cell (0, 1)).  A single point
costs 5 content bits, a foreground+background pair 10.  Serialized PROMPT
payloads carry one leading format bit per ROI (0 = single, 1 = pair).

The search is exhaustive by construction; selection ties break toward the
lower index so encoder and decoder agree bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from patvcm.container import pack_bits
from patvcm.errors import StructuralError
from patvcm.metrics import mask_iou
from patvcm.roi import Box

GRID_SIZE = 6
_CORNERS = {(0, 0), (0, GRID_SIZE - 1), (GRID_SIZE - 1, 0), (GRID_SIZE - 1, GRID_SIZE - 1)}
GRID_CELLS: tuple[tuple[int, int], ...] = tuple(
    (r, c)
    for r in range(GRID_SIZE)
    for c in range(GRID_SIZE)
    if (r, c) not in _CORNERS
)
CODEBOOK_SIZE = len(GRID_CELLS)
INDEX_BITS = 5

# Segmentor signature shared by toy and bridged models.
Segmentor = Callable[[np.ndarray, Box, Sequence[tuple[int, int]], Sequence[tuple[int, int]]], np.ndarray]


@dataclass(frozen=True)
class PromptToken:
    index: int
    bg_index: int | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.index < CODEBOOK_SIZE:
            raise ValueError(f"prompt index {self.index} out of [0, {CODEBOOK_SIZE})")
        if self.bg_index is not None:
            if not 0 <= self.bg_index < CODEBOOK_SIZE:
                raise ValueError(f"bg index {self.bg_index} out of range")
            if self.bg_index == self.index:
                raise ValueError("bg index may not equal fg index")

    @property
    def content_bits(self) -> int:
        return INDEX_BITS if self.bg_index is None else 2 * INDEX_BITS


@dataclass(frozen=True)
class PromptSelection:
    token: PromptToken
    iou: float
    degenerate: bool = False


def codebook_uv(index: int) -> tuple[float, float]:
    if not 0 <= index < CODEBOOK_SIZE:
        raise ValueError(f"prompt index {index} out of [0, {CODEBOOK_SIZE})")
    r, c = GRID_CELLS[index]
    return (c + 0.5) / GRID_SIZE, (r + 0.5) / GRID_SIZE


def point_of(index: int, box: Box) -> tuple[int, int]:
    """Pixel location of a codebook entry inside a box (always interior)."""
    u, v = codebook_uv(index)
    x = int(np.floor(box.x0 + u * box.w + 0.5))
    y = int(np.floor(box.y0 + v * box.h + 0.5))
    x = min(max(x, box.x0), box.x1 - 1)
    y = min(max(y, box.y0), box.y1 - 1)
    return x, y


def _center_nearest_index() -> int:
    # Lowest index among candidates nearest the box center in (u, v) space.
    best = None
    for i in range(CODEBOOK_SIZE):
        u, v = codebook_uv(i)
        d = (u - 0.5) ** 2 + (v - 0.5) ** 2
        if best is None or d < best[0] - 1e-12:
            best = (d, i)
    return best[1]


CENTER_FALLBACK_INDEX = _center_nearest_index()


def select_fg(
    orig_frame: np.ndarray,
    refined_frame: np.ndarray,
    box: Box,
    oracle_segment: Callable[[np.ndarray, Box], np.ndarray],
    test_segment: Segmentor,
) -> PromptSelection:
    """Index maximizing IoU(test mask on refined frame, oracle target on orig)."""
    target = oracle_segment(orig_frame, box)
    if not target.any():
        return PromptSelection(PromptToken(CENTER_FALLBACK_INDEX), 0.0, degenerate=True)
    best_iou = -1.0
    best_idx = 0
    for i in range(CODEBOOK_SIZE):
        mask = test_segment(refined_frame, box, [point_of(i, box)], [])
        iou = mask_iou(mask, target)
        if iou > best_iou:
            best_iou, best_idx = iou, i
    return PromptSelection(PromptToken(best_idx), best_iou)


def select_bg(
    orig_frame: np.ndarray,
    refined_frame: np.ndarray,
    box: Box,
    oracle_segment: Callable[[np.ndarray, Box], np.ndarray],
    test_segment: Segmentor,
    fg: PromptToken,
) -> PromptSelection:
    """Second index maximizing IoU of the (fg positive, bg negative) query."""
    target = oracle_segment(orig_frame, box)
    fg_point = point_of(fg.index, box)
    if not target.any():
        bg = next(i for i in range(CODEBOOK_SIZE) if i != fg.index)
        return PromptSelection(PromptToken(fg.index, bg), 0.0, degenerate=True)
    best_iou = -1.0
    best_idx = None
    for i in range(CODEBOOK_SIZE):
        if i == fg.index:
            continue
        mask = test_segment(refined_frame, box, [fg_point], [point_of(i, box)])
        iou = mask_iou(mask, target)
        if iou > best_iou:
            best_iou, best_idx = iou, i
    return PromptSelection(PromptToken(fg.index, best_idx), best_iou)


def prompt_payload(tokens: Sequence[PromptToken]) -> tuple[bytes, int]:
    """1 format bit + 5/10 content bits per ROI, in RoiSet order."""
    fields = []
    for tok in tokens:
        if tok.bg_index is None:
            fields.append((0, 1))
            fields.append((tok.index, INDEX_BITS))
        else:
            fields.append((1, 1))
            fields.append((tok.index, INDEX_BITS))
            fields.append((tok.bg_index, INDEX_BITS))
    return pack_bits(fields)


def parse_prompt_payload(payload: bytes, payload_bits: int, roi_count: int) -> list[PromptToken]:
    """Inverse of prompt_payload given the decoder-derived ROI count."""
    acc = int.from_bytes(payload, "big")
    avail = len(payload) * 8
    pos = 0

    def take(width: int) -> int:
        nonlocal pos
        if pos + width > payload_bits:
            raise StructuralError("prompt payload exhausted mid-token")
        value = (acc >> (avail - pos - width)) & ((1 << width) - 1)
        pos += width
        return value

    tokens = []
    for _ in range(roi_count):
        if take(1):
            fg = take(INDEX_BITS)
            bg = take(INDEX_BITS)
            tokens.append(PromptToken(fg, bg))
        else:
            tokens.append(PromptToken(take(INDEX_BITS)))
    if pos != payload_bits:
        raise StructuralError(
            f"prompt payload has {payload_bits - pos} unread bits for {roi_count} ROIs"
        )
    return tokens
