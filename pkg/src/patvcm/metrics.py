"""Evaluation metrics and binning protocols.

All functions are pure and permutation-invariant where applicable.  Depth
metrics operate on predictions after per-frame least-squares scale-shift
alignment; pixels with ground-truth depth <= 1e-6 are excluded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from patvcm.roi import Box

DEPTH_VALID_EPS = 1e-6
VARIANCE_EPS = 1e-12

SEG_EASY_IOU = 0.75
SEG_HARD_IOU = 0.30
DEPTH_EASY_ABSREL = 0.05
DEPTH_HARD_ABSREL = 0.20

# Relative-area ROI size bins (fraction of the frame).
SIZE_SMALL_FRAC = 0.02
SIZE_LARGE_FRAC = 0.10


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two binary masks; both empty counts as 1.0."""
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    a = a.astype(bool)
    b = b.astype(bool)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def mean_iou(pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> float:
    if not pairs:
        raise ValueError("mean_iou needs at least one pair")
    return float(np.mean([mask_iou(a, b) for a, b in pairs]))


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]  # (gt index, pred index, IoU)
    unmatched_gt: tuple[int, ...]
    unmatched_pred: tuple[int, ...]
    gt_count: int

    @property
    def matched_iou(self) -> float:
        """Mean IoU over ground-truth boxes; unmatched ground truth counts 0."""
        if self.gt_count == 0:
            return 0.0
        return sum(iou for _, _, iou in self.pairs) / self.gt_count

    @property
    def matched_only_iou(self) -> float:
        if not self.pairs:
            return 0.0
        return sum(iou for _, _, iou in self.pairs) / len(self.pairs)

    def recall_at(self, threshold: float = 0.5) -> float:
        if self.gt_count == 0:
            return 0.0
        return sum(1 for _, _, iou in self.pairs if iou >= threshold) / self.gt_count


def match_detections(gt: Sequence[Box], pred: Sequence[Box]) -> MatchResult:
    """Greedy one-to-one matching by descending pair IoU (ties by gt then
    pred index); zero-IoU pairs never match."""
    cand = []
    for gi, g in enumerate(gt):
        for pi, p in enumerate(pred):
            iou = g.iou(p)
            if iou > 0.0:
                cand.append((-iou, gi, pi))
    cand.sort()
    used_g: set[int] = set()
    used_p: set[int] = set()
    pairs = []
    for neg_iou, gi, pi in cand:
        if gi in used_g or pi in used_p:
            continue
        used_g.add(gi)
        used_p.add(pi)
        pairs.append((gi, pi, -neg_iou))
    return MatchResult(
        pairs=tuple(sorted(pairs)),
        unmatched_gt=tuple(i for i in range(len(gt)) if i not in used_g),
        unmatched_pred=tuple(i for i in range(len(pred)) if i not in used_p),
        gt_count=len(gt),
    )


@dataclass(frozen=True)
class AlignedDepth:
    scale: float
    shift: float
    degenerate: bool = False

    def apply(self, depth: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(depth, dtype=np.float64) + self.shift


def _valid_mask(d_star: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    valid = np.asarray(d_star, dtype=np.float64) > DEPTH_VALID_EPS
    if mask is not None:
        valid &= mask.astype(bool)
    return valid


def align_scale_shift(
    d: np.ndarray, d_star: np.ndarray, mask: np.ndarray | None = None
) -> AlignedDepth:
    """Closed-form least squares (s, t) minimizing sum (s*d + t - d_star)^2."""
    if d.shape != d_star.shape:
        raise ValueError(f"depth shapes differ: {d.shape} vs {d_star.shape}")
    valid = _valid_mask(d_star, mask)
    dv = np.asarray(d, dtype=np.float64)[valid]
    sv = np.asarray(d_star, dtype=np.float64)[valid]
    if dv.size < 2:
        raise ValueError("need at least 2 valid pixels for alignment")
    var = float(np.var(dv))
    if var <= VARIANCE_EPS:
        return AlignedDepth(1.0, float(sv.mean() - dv.mean()), degenerate=True)
    cov = float(np.mean((dv - dv.mean()) * (sv - sv.mean())))
    scale = cov / var
    shift = float(sv.mean() - scale * dv.mean())
    return AlignedDepth(scale, shift)


def absrel(d_hat: np.ndarray, d_star: np.ndarray, mask: np.ndarray | None = None) -> float | None:
    valid = _valid_mask(d_star, mask)
    if not valid.any():
        return None
    dh = np.asarray(d_hat, dtype=np.float64)[valid]
    ds = np.asarray(d_star, dtype=np.float64)[valid]
    return float(np.mean(np.abs(dh - ds) / ds))


def delta_threshold(
    d_hat: np.ndarray, d_star: np.ndarray, ratio: float = 1.25,
    mask: np.ndarray | None = None,
) -> float | None:
    valid = _valid_mask(d_star, mask)
    if not valid.any():
        return None
    dh = np.asarray(d_hat, dtype=np.float64)[valid]
    ds = np.asarray(d_star, dtype=np.float64)[valid]
    with np.errstate(divide="ignore", invalid="ignore"):
        worst = np.maximum(dh / ds, ds / dh)
    worst = np.where(np.isfinite(worst), worst, np.inf)
    return float(np.mean(worst < ratio))


def rmse(d_hat: np.ndarray, d_star: np.ndarray, mask: np.ndarray | None = None) -> float | None:
    valid = _valid_mask(d_star, mask)
    if not valid.any():
        return None
    dh = np.asarray(d_hat, dtype=np.float64)[valid]
    ds = np.asarray(d_star, dtype=np.float64)[valid]
    return float(np.sqrt(np.mean((dh - ds) ** 2)))


def normals_from_depth(depth: np.ndarray) -> np.ndarray:
    """Unit normals from spatial gradients: normalize((-dz/dx, -dz/dy, 1)).

    Central differences inside, one-sided at the borders (np.gradient).
    """
    d = np.asarray(depth, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] < 3 or d.shape[1] < 3:
        raise ValueError(f"depth needs at least 3x3 support, got {d.shape}")
    dy, dx = np.gradient(d)
    n = np.stack([-dx, -dy, np.ones_like(d)], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def normal_mae_deg(n: np.ndarray, n_star: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean angular error between unit-normal fields, in degrees."""
    if n.shape != n_star.shape:
        raise ValueError(f"normal field shapes differ: {n.shape} vs {n_star.shape}")
    dots = np.clip(np.sum(n * n_star, axis=-1), -1.0, 1.0)
    if mask is not None:
        dots = dots[mask.astype(bool)]
        if dots.size == 0:
            return float("nan")
    return float(np.degrees(np.arccos(dots)).mean())


def mke(pred_kpts: np.ndarray, gt_kpts: np.ndarray) -> float:
    """Mean Euclidean keypoint error in pixels."""
    p = np.asarray(pred_kpts, dtype=np.float64)
    g = np.asarray(gt_kpts, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"keypoint shapes differ: {p.shape} vs {g.shape}")
    return float(np.linalg.norm(p - g, axis=-1).mean())


def difficulty_bin(value: float, task: str) -> str:
    """Difficulty bin from the baseline-quality value of an instance."""
    if task == "segmentation":
        if value >= SEG_EASY_IOU:
            return "easy"
        if value >= SEG_HARD_IOU:
            return "medium"
        return "hard"
    if task == "depth":
        if value < DEPTH_EASY_ABSREL:
            return "easy"
        if value < DEPTH_HARD_ABSREL:
            return "medium"
        return "hard"
    raise ValueError(f"unknown task {task!r}")


def size_bin(box_area: int, frame_area: int) -> str:
    frac = box_area / frame_area
    if frac < SIZE_SMALL_FRAC:
        return "small"
    if frac < SIZE_LARGE_FRAC:
        return "medium"
    return "large"


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 255.0) -> float:
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)
