"""Deterministic toy task models behind the shared task-model interface.

Each capability is a pure function of its pixel inputs, so encoder and
decoder reach identical predictions from identical reconstructed bytes.
The models are built so that each auxiliary token type has a visible
effect channel: contrast drives detection, color fidelity drives
segmentation, luminance drives depth, palette proximity drives
classification, and detected-box accuracy drives pose.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
from scipy import ndimage

from patvcm.roi import Box
from patvcm.scenes import COLOR_NAMES, PALETTE, POSE_OFFSETS

CAPABILITIES = frozenset({"detect", "segment", "depth", "classify", "pose"})

Point = tuple[int, int]


@runtime_checkable
class TaskModels(Protocol):
    """Capability contract shared by in-process toys and bridged backends."""

    def capabilities(self) -> frozenset[str]: ...

    def detect(self, frame: np.ndarray) -> list[Box]: ...

    def segment(
        self,
        frame: np.ndarray,
        box: Box,
        positive: Sequence[Point] = (),
        negative: Sequence[Point] = (),
    ) -> np.ndarray: ...

    def segment_candidates(self, frame: np.ndarray, box: Box) -> list[np.ndarray]: ...

    def depth(self, frame: np.ndarray) -> np.ndarray: ...

    def classify(self, frame: np.ndarray, box: Box) -> int: ...

    def pose(self, frame: np.ndarray, box: Box) -> np.ndarray: ...


# Relative seeds for multi-candidate segmentation (center first).
CANDIDATE_SEEDS = ((0.5, 0.5), (0.3, 0.3), (0.7, 0.3), (0.3, 0.7), (0.7, 0.7))


def as_model_input(frame: np.ndarray) -> np.ndarray:
    """Canonical uint8 view of a frame.

    Reconstructions are float arrays; models (in-process or bridged over a
    pixmap wire format) must see identical bytes, so every capability
    quantizes its input through this single rounding rule.
    """
    if frame.dtype == np.uint8:
        return frame
    return np.clip(np.floor(frame + 0.5), 0, 255).astype(np.uint8)


def _color_distance(frame: np.ndarray, color: np.ndarray) -> np.ndarray:
    return np.abs(frame.astype(np.float64) - color).mean(axis=-1)


@dataclass(frozen=True)
class ToyTaskModels:
    tau_detect: float = 30.0
    min_area: int = 24
    tau_segment: float = 60.0
    border: int = 2
    conf_scale: float = 200.0  # contrast at which confidence saturates to 1

    def capabilities(self) -> frozenset[str]:
        return CAPABILITIES

    # -- detection ---------------------------------------------------------

    def _background_estimate(self, frame: np.ndarray) -> np.ndarray:
        b = self.border
        ring = np.concatenate(
            [
                frame[:b].reshape(-1, 3),
                frame[-b:].reshape(-1, 3),
                frame[b:-b, :b].reshape(-1, 3),
                frame[b:-b, -b:].reshape(-1, 3),
            ]
        )
        return np.median(ring.astype(np.float64), axis=0)

    def detect(self, frame: np.ndarray) -> list[Box]:
        frame = as_model_input(frame)
        bg = self._background_estimate(frame)
        dist = _color_distance(frame, bg)
        labels, count = ndimage.label(dist > self.tau_detect)
        boxes = []
        for sl in ndimage.find_objects(labels):
            if sl is None:
                continue
            component = labels[sl] > 0
            area = int(component.sum())
            if area < self.min_area:
                continue
            conf = float(np.clip(dist[sl][component].mean() / self.conf_scale, 0.0, 1.0))
            y0, x0 = sl[0].start, sl[1].start
            h, w = sl[0].stop - y0, sl[1].stop - x0
            boxes.append(Box(x0, y0, w, h, conf))
        boxes.sort(key=lambda b: (-b.confidence, b.y0, b.x0, b.w, b.h))
        return boxes

    # -- segmentation ------------------------------------------------------

    def _grow(self, frame: np.ndarray, box: Box, seed: Point) -> np.ndarray:
        x, y = seed
        if not (box.x0 <= x < box.x1 and box.y0 <= y < box.y1):
            raise ValueError(f"seed {seed} outside box {box}")
        sub = frame[box.y0 : box.y1, box.x0 : box.x1]
        seed_color = frame[y, x].astype(np.float64)
        similar = _color_distance(sub, seed_color) <= self.tau_segment
        labels, _ = ndimage.label(similar)
        seed_label = labels[y - box.y0, x - box.x0]
        mask = np.zeros(frame.shape[:2], dtype=bool)
        if seed_label:
            mask[box.y0 : box.y1, box.x0 : box.x1] = labels == seed_label
        return mask

    def segment(
        self,
        frame: np.ndarray,
        box: Box,
        positive: Sequence[Point] = (),
        negative: Sequence[Point] = (),
    ) -> np.ndarray:
        frame = as_model_input(frame)
        seeds = list(positive) or [(box.x0 + box.w // 2, box.y0 + box.h // 2)]
        mask = np.zeros(frame.shape[:2], dtype=bool)
        for seed in seeds:
            mask |= self._grow(frame, box, seed)
        for seed in negative:
            x, y = seed
            if box.x0 <= x < box.x1 and box.y0 <= y < box.y1:
                mask &= ~self._grow(frame, box, seed)
        return mask

    def segment_candidates(self, frame: np.ndarray, box: Box) -> list[np.ndarray]:
        frame = as_model_input(frame)
        masks = []
        for u, v in CANDIDATE_SEEDS:
            x = min(box.x1 - 1, box.x0 + int(u * box.w))
            y = min(box.y1 - 1, box.y0 + int(v * box.h))
            masks.append(self._grow(frame, box, (x, y)))
        return masks

    # -- dense / semantic tasks --------------------------------------------

    def depth(self, frame: np.ndarray) -> np.ndarray:
        # float32 output so a 32-bit wire encoding is lossless
        frame = as_model_input(frame)
        return (frame.astype(np.float32).mean(axis=-1) / np.float32(255.0)).astype(np.float32)

    def classify(self, frame: np.ndarray, box: Box) -> int:
        # Mean color over the foreground pixels inside the box (expanded
        # stage-2 boxes are mostly background, which would swamp a plain
        # crop mean); falls back to the crop mean for uniform crops.
        frame = as_model_input(frame)
        bg = self._background_estimate(frame)
        sub = frame[box.y0 : box.y1, box.x0 : box.x1].astype(np.float64)
        fg = _color_distance(sub, bg) > self.tau_detect
        pixels = sub[fg] if fg.any() else sub.reshape(-1, 3)
        mean_color = pixels.mean(axis=0)
        return int(np.argmin(np.linalg.norm(PALETTE.astype(np.float64) - mean_color, axis=1)))

    def pose(self, frame: np.ndarray, box: Box) -> np.ndarray:
        """Fixed keypoint offsets on the dominant foreground bbox inside box."""
        frame = as_model_input(frame)
        bg = self._background_estimate(frame)
        sub = frame[box.y0 : box.y1, box.x0 : box.x1]
        fg = _color_distance(sub, bg) > self.tau_detect
        labels, count = ndimage.label(fg)
        target = box
        if count:
            sizes = ndimage.sum_labels(fg, labels, index=np.arange(1, count + 1))
            sl = ndimage.find_objects(labels)[int(np.argmax(sizes))]
            target = Box(
                box.x0 + sl[1].start,
                box.y0 + sl[0].start,
                sl[1].stop - sl[1].start,
                sl[0].stop - sl[0].start,
            )
        return POSE_OFFSETS * (target.w, target.h) + (target.x0, target.y0)


def caption_rerank(
    frame: np.ndarray,
    box: Box,
    candidates: Sequence[np.ndarray],
    caption: str,
) -> int:
    """Pick the candidate mask whose mean color best matches the caption's
    leading color word; returns the candidate index (ties toward lower)."""
    name = caption.split()[0] if caption.split() else ""
    anchor = COLOR_NAMES.get(name)
    if anchor is None:
        return 0
    anchor_arr = np.asarray(anchor, dtype=np.float64)
    best = None
    for i, mask in enumerate(candidates):
        inside = mask[box.y0 : box.y1, box.x0 : box.x1]
        if not inside.any():
            continue
        mean_color = frame[box.y0 : box.y1, box.x0 : box.x1][inside].mean(axis=0)
        score = float(np.linalg.norm(mean_color - anchor_arr))
        if best is None or score < best[0] - 1e-12:
            best = (score, i)
    return best[1] if best else 0
