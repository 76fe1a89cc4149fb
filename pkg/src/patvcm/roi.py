"""Deterministic two-stage ROI derivation and ROI -> latent-cell mapping.

Both encoder and decoder run the same detector on identical reconstructed
bytes and apply these rules, so ROI sets agree exactly without ever being
transmitted.  Stage 1 keeps detector boxes with confidence in [0.05, 0.5)
and expands by 1.3; stage 2 keeps confidence >= 0.3 and expands by 2.0.
Both keep at most 3 boxes per frame, sorted by confidence descending then
(y0, x0, w, h) ascending, and round expanded boxes outward to pixels.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

from patvcm.baseline import CodecProfile, group_of_frame

STAGE1_CONF = (0.05, 0.5)   # half-open [lo, hi)
STAGE1_EXPAND = 1.3
STAGE2_CONF_MIN = 0.3
STAGE2_EXPAND = 2.0
MAX_BOXES_PER_FRAME = 3


@dataclass(frozen=True, order=False)
class Box:
    x0: int
    y0: int
    w: int
    h: int
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise ValueError(f"box needs w, h >= 1, got {self.w}x{self.h}")

    @property
    def x1(self) -> int:
        return self.x0 + self.w

    @property
    def y1(self) -> int:
        return self.y0 + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def iou(self, other: "Box") -> float:
        ix = min(self.x1, other.x1) - max(self.x0, other.x0)
        iy = min(self.y1, other.y1) - max(self.y0, other.y0)
        if ix <= 0 or iy <= 0:
            return 0.0
        inter = ix * iy
        return inter / (self.area + other.area - inter)


@dataclass(frozen=True)
class RoiSet:
    stage: int
    frames: tuple[tuple[Box, ...], ...]

    @property
    def box_count(self) -> int:
        return sum(len(f) for f in self.frames)

    def flat(self) -> list[tuple[int, Box]]:
        """(frame, box) pairs in canonical frame-major order."""
        return [(t, box) for t, boxes in enumerate(self.frames) for box in boxes]

    def canonical_bytes(self) -> bytes:
        """Byte-exact fingerprint used by encoder/decoder agreement checks."""
        out = bytearray(struct.pack(">BH", self.stage, len(self.frames)))
        for boxes in self.frames:
            out += struct.pack(">H", len(boxes))
            for b in boxes:
                out += struct.pack(">iiiid", b.x0, b.y0, b.w, b.h, b.confidence)
        return bytes(out)


def _sort_key(box: Box):
    return (-box.confidence, box.y0, box.x0, box.w, box.h)


def expand_box(box: Box, factor: float, height: int, width: int) -> Box:
    """Expand about the center, round outward, clamp to the frame."""
    cx = box.x0 + box.w / 2.0
    cy = box.y0 + box.h / 2.0
    nw = box.w * factor
    nh = box.h * factor
    x0 = max(0, math.floor(cx - nw / 2.0))
    y0 = max(0, math.floor(cy - nh / 2.0))
    x1 = min(width, math.ceil(cx + nw / 2.0))
    y1 = min(height, math.ceil(cy + nh / 2.0))
    return Box(x0, y0, max(1, x1 - x0), max(1, y1 - y0), box.confidence)


def _select(
    detections: Sequence[Sequence[Box]],
    height: int,
    width: int,
    keep,
    factor: float,
    stage: int,
) -> RoiSet:
    frames = []
    for dets in detections:
        kept = sorted((d for d in dets if keep(d.confidence)), key=_sort_key)
        kept = kept[:MAX_BOXES_PER_FRAME]
        frames.append(tuple(expand_box(b, factor, height, width) for b in kept))
    return RoiSet(stage, tuple(frames))


def select_stage1(detections: Sequence[Sequence[Box]], height: int, width: int) -> RoiSet:
    lo, hi = STAGE1_CONF
    return _select(detections, height, width, lambda c: lo <= c < hi, STAGE1_EXPAND, 1)


def select_stage2(detections: Sequence[Sequence[Box]], height: int, width: int) -> RoiSet:
    return _select(
        detections, height, width, lambda c: c >= STAGE2_CONF_MIN, STAGE2_EXPAND, 2
    )


def roi_cells(
    rois: RoiSet, latent_dims: tuple[int, int, int], profile: CodecProfile
) -> list[tuple[int, int, int]]:
    """Latent cells whose 8x8 footprint intersects any ROI box of the cell's
    temporal group, sorted by (group, row, col), duplicate-free."""
    t_lat, h_lat, w_lat = latent_dims
    sf = profile.spatial_factor
    cells: set[tuple[int, int, int]] = set()
    for t, boxes in enumerate(rois.frames):
        g = group_of_frame(t, profile)
        if g >= t_lat:
            raise ValueError(f"frame {t} maps to group {g} outside latent dims")
        for box in boxes:
            i0 = max(0, box.y0 // sf)
            i1 = min(h_lat, -(-box.y1 // sf))
            j0 = max(0, box.x0 // sf)
            j1 = min(w_lat, -(-box.x1 // sf))
            for i in range(i0, i1):
                for j in range(j0, j1):
                    cells.add((g, i, j))
    return sorted(cells)
