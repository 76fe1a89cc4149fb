"""Synthetic scene/corpus generator with exact ground truth.

Scenes are a vertical-gradient gray background plus K non-overlapping
moving shapes drawn from an 80-color palette.  Every ground-truth artifact
(instance masks, boxes, depth maps, keypoints, class labels, captions) is
derived exactly from the scene fields, so oracle evaluation paths are
bit-reproducible.

Scene depth is tied to luminance: a pixel of luminance L sits at depth
(300 - L) / 255, for the background gradient and each shape's fill color
alike.  A luminance-based depth predictor is therefore exactly affine in
the true depth on clean frames, which per-frame scale-shift alignment
absorbs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEPTH_NUM = 300.0
DEPTH_DEN = 255.0

KINDS = ("rect", "ellipse", "ring", "lshape", "figure")

# COCO-style 17 keypoint layout as (u, v) fractions of a person bbox.
POSE_OFFSETS = np.array(
    [
        (0.50, 0.08),  # nose
        (0.44, 0.05), (0.56, 0.05),  # eyes
        (0.38, 0.08), (0.62, 0.08),  # ears
        (0.35, 0.24), (0.65, 0.24),  # shoulders
        (0.28, 0.40), (0.72, 0.40),  # elbows
        (0.25, 0.54), (0.75, 0.54),  # wrists
        (0.40, 0.56), (0.60, 0.56),  # hips
        (0.40, 0.76), (0.60, 0.76),  # knees
        (0.40, 0.94), (0.60, 0.94),  # ankles
    ],
    dtype=np.float64,
)

COLOR_NAMES: dict[str, tuple[int, int, int]] = {
    "red": (200, 35, 35),
    "orange": (230, 130, 25),
    "yellow": (220, 210, 45),
    "green": (45, 180, 55),
    "teal": (25, 150, 140),
    "cyan": (45, 210, 230),
    "blue": (45, 60, 200),
    "navy": (25, 25, 120),
    "purple": (130, 45, 180),
    "magenta": (210, 45, 190),
    "pink": (230, 150, 170),
    "brown": (130, 80, 35),
    "olive": (120, 130, 40),
    "gray": (128, 128, 128),
    "white": (235, 235, 235),
    "black": (25, 25, 25),
}


def build_palette(size: int = 80) -> np.ndarray:
    """Deterministic maximally-separated RGB palette via greedy farthest-point
    sampling over a 5x5x5 lattice, seeded at saturated red."""
    axis = np.array([0, 64, 128, 191, 255], dtype=np.float64)
    lattice = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    chosen = [int(np.argmin(np.linalg.norm(lattice - (255, 0, 0), axis=1)))]
    dist = np.linalg.norm(lattice - lattice[chosen[0]], axis=1)
    while len(chosen) < size:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(lattice - lattice[nxt], axis=1))
    return lattice[chosen].astype(np.uint8)


PALETTE = build_palette()


def color_name_of(rgb: Sequence[int]) -> str:
    arr = np.asarray(rgb, dtype=np.float64)
    names = list(COLOR_NAMES)
    anchors = np.array([COLOR_NAMES[n] for n in names], dtype=np.float64)
    return names[int(np.argmin(np.linalg.norm(anchors - arr, axis=1)))]


def luminance(rgb: Sequence[float]) -> float:
    arr = np.asarray(rgb, dtype=np.float64)
    return float(arr.mean())


def depth_of_luminance(lum) -> np.ndarray | float:
    return (DEPTH_NUM - np.asarray(lum, dtype=np.float64)) / DEPTH_DEN


@dataclass(frozen=True)
class ShapeSpec:
    kind: str
    class_id: int
    w: int
    h: int
    x0: float
    y0: float
    vx: float
    vy: float

    @property
    def color(self) -> tuple[int, int, int]:
        return tuple(int(v) for v in PALETTE[self.class_id])

    @property
    def depth(self) -> float:
        return float(depth_of_luminance(luminance(self.color)))

    @property
    def caption(self) -> str:
        return f"{color_name_of(self.color)} {self.kind}"

    def position(self, t: int) -> tuple[int, int]:
        return int(round(self.x0 + self.vx * t)), int(round(self.y0 + self.vy * t))


@dataclass(frozen=True)
class SceneParams:
    frames: int = 9
    height: int = 96
    width: int = 96
    min_shapes: int = 1
    max_shapes: int = 2
    min_size: int = 14
    max_size: int = 34
    speed_min: float = 0.3
    speed_max: float = 1.5
    bg_lum_range: tuple[int, int] = (122, 184)  # band base drawn per scene
    bg_spread: int = 16
    contrast_min: float = 110.0
    contrast_max: float = 165.0
    kind_weights: tuple[tuple[str, float], ...] = (
        ("rect", 0.28),
        ("ellipse", 0.27),
        ("ring", 0.18),
        ("lshape", 0.12),
        ("figure", 0.15),
    )

    def validate(self) -> None:
        if self.max_size + 2 >= min(self.height, self.width):
            raise ValueError(
                f"max shape size {self.max_size} does not fit a "
                f"{self.height}x{self.width} frame"
            )
        if self.min_size < 6 or self.min_size > self.max_size:
            raise ValueError("need 6 <= min_size <= max_size")
        if self.min_shapes < 0 or self.min_shapes > self.max_shapes:
            raise ValueError("need 0 <= min_shapes <= max_shapes")
        unknown = {k for k, _ in self.kind_weights} - set(KINDS)
        if unknown:
            raise ValueError(f"unknown shape kinds {unknown}")


@dataclass
class GroundTruth:
    frames: int
    height: int
    width: int
    class_ids: tuple[int, ...]
    kinds: tuple[str, ...]
    captions: tuple[str, ...]
    shape_depths: tuple[float, ...]
    boxes: list  # boxes[t][k] -> roi.Box-compatible (x0, y0, w, h)
    masks: list  # masks[t] -> (K, H, W) bool
    keypoints: list  # keypoints[t][k] -> (17, 2) float or None
    label_maps: list = field(default_factory=list)  # (H, W) uint8, 0 = background
    depth_maps: list = field(default_factory=list)  # (H, W) float32

    @property
    def shape_count(self) -> int:
        return len(self.class_ids)


def _shape_mask(kind: str, w: int, h: int) -> np.ndarray:
    """Local boolean mask of a shape drawn into its own w x h bbox."""
    yy, xx = np.mgrid[0:h, 0:w]
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    rx, ry = w / 2.0, h / 2.0
    if kind == "rect":
        return np.ones((h, w), dtype=bool)
    if kind == "ellipse":
        return ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
    if kind == "ring":
        outer = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
        inner = ((xx - cx) / (0.45 * rx)) ** 2 + ((yy - cy) / (0.45 * ry)) ** 2 <= 1.0
        return outer & ~inner
    if kind == "lshape":
        mask = np.ones((h, w), dtype=bool)
        mask[: int(0.55 * h), int(0.45 * w) :] = False
        return mask
    if kind == "figure":
        head = ((xx - cx) / (0.20 * w)) ** 2 + ((yy - 0.12 * h) / (0.12 * h)) ** 2 <= 1.0
        torso = (np.abs(xx - cx) <= 0.24 * w) & (yy >= 0.20 * h) & (yy <= 0.60 * h)
        left_leg = (xx >= 0.28 * w) & (xx <= 0.48 * w) & (yy > 0.60 * h) & (yy <= 0.97 * h)
        right_leg = (xx >= 0.52 * w) & (xx <= 0.72 * w) & (yy > 0.60 * h) & (yy <= 0.97 * h)
        arms = (np.abs(yy - 0.32 * h) <= 0.07 * h) & (np.abs(xx - cx) <= 0.42 * w)
        return head | torso | left_leg | right_leg | arms
    raise ValueError(f"unknown shape kind {kind!r}")


def _background(params: SceneParams, band: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """(H, W, 3) uint8 background and its (H, W) float depth."""
    lo, hi = band
    rows = np.round(np.linspace(lo, hi, params.height)).astype(np.uint8)
    frame = np.repeat(rows[:, None, None], params.width, axis=1)
    frame = np.repeat(frame, 3, axis=2)
    depth = depth_of_luminance(rows.astype(np.float64))
    return frame, np.repeat(depth[:, None], params.width, axis=1)


def _eligible_classes(params: SceneParams, band: tuple[int, int]) -> np.ndarray:
    lo, hi = band
    grays = np.arange(lo, hi + 1, dtype=np.float64)
    diffs = np.abs(PALETTE[:, None, :].astype(np.float64) - grays[None, :, None])
    contrast = diffs.mean(axis=2)  # (80, n_grays) mean abs channel distance
    ok = (contrast.min(axis=1) >= params.contrast_min) & (
        contrast.max(axis=1) <= params.contrast_max
    )
    ids = np.nonzero(ok)[0]
    if ids.size == 0:
        raise ValueError("no palette color satisfies the contrast window")
    return ids


def generate_scene(seed: int, params: SceneParams = SceneParams()) -> tuple[np.ndarray, GroundTruth]:
    """Deterministic (clip, ground truth) pair for a seed."""
    params.validate()
    rng = np.random.default_rng(seed)
    t_n, height, width = params.frames, params.height, params.width
    base_lo, base_hi = params.bg_lum_range
    base = int(rng.integers(base_lo, max(base_lo, base_hi - params.bg_spread) + 1))
    band = (base, base + params.bg_spread)
    bg_frame, bg_depth = _background(params, band)
    eligible = _eligible_classes(params, band)
    kinds = [k for k, _ in params.kind_weights]
    weights = np.array([w for _, w in params.kind_weights], dtype=np.float64)
    weights /= weights.sum()

    n_shapes = int(rng.integers(params.min_shapes, params.max_shapes + 1))
    shapes: list[ShapeSpec] = []
    occupied: list[tuple[float, float, float, float]] = []
    for _ in range(n_shapes):
        placed = False
        for _attempt in range(40):
            kind = str(rng.choice(kinds, p=weights))
            w = int(rng.integers(params.min_size, params.max_size + 1))
            h = int(rng.integers(params.min_size, params.max_size + 1))
            if kind == "figure":
                h = max(h, int(1.4 * w))  # upright aspect
                if h > params.max_size:
                    h = params.max_size
                    w = max(params.min_size, int(h / 1.4))
            speed = rng.uniform(params.speed_min, params.speed_max)
            angle = rng.uniform(0, 2 * np.pi)
            vx, vy = speed * np.cos(angle), speed * np.sin(angle)
            span_x = vx * (t_n - 1)
            span_y = vy * (t_n - 1)
            x_lo = 1.0 + max(0.0, -span_x)
            x_hi = width - w - 1.0 - max(0.0, span_x)
            y_lo = 1.0 + max(0.0, -span_y)
            y_hi = height - h - 1.0 - max(0.0, span_y)
            if x_hi <= x_lo or y_hi <= y_lo:
                continue
            x0 = rng.uniform(x_lo, x_hi)
            y0 = rng.uniform(y_lo, y_hi)
            sweep = (
                min(x0, x0 + span_x) - 1,
                min(y0, y0 + span_y) - 1,
                max(x0, x0 + span_x) + w + 1,
                max(y0, y0 + span_y) + h + 1,
            )
            clash = any(
                sweep[0] < o[2] and o[0] < sweep[2] and sweep[1] < o[3] and o[1] < sweep[3]
                for o in occupied
            )
            if clash:
                continue
            class_id = int(rng.choice(eligible))
            shapes.append(ShapeSpec(kind, class_id, w, h, x0, y0, vx, vy))
            occupied.append(sweep)
            placed = True
            break
        if not placed:
            break

    clip = np.empty((t_n, height, width, 3), dtype=np.uint8)
    gt = GroundTruth(
        frames=t_n,
        height=height,
        width=width,
        class_ids=tuple(s.class_id for s in shapes),
        kinds=tuple(s.kind for s in shapes),
        captions=tuple(s.caption for s in shapes),
        shape_depths=tuple(s.depth for s in shapes),
        boxes=[],
        masks=[],
        keypoints=[],
    )
    local_masks = [_shape_mask(s.kind, s.w, s.h) for s in shapes]
    tight = []
    for lm in local_masks:
        ys, xs = np.nonzero(lm)
        tight.append((int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1),
                      int(ys.max() - ys.min() + 1)))
    for t in range(t_n):
        frame = bg_frame.copy()
        depth = bg_depth.copy()
        labels = np.zeros((height, width), dtype=np.uint8)
        frame_masks = np.zeros((len(shapes), height, width), dtype=bool)
        frame_boxes = []
        frame_kpts = []
        for k, shape in enumerate(shapes):
            x, y = shape.position(t)
            mask = local_masks[k]
            region = frame_masks[k, y : y + shape.h, x : x + shape.w]
            region |= mask
            frame[y : y + shape.h, x : x + shape.w][mask] = shape.color
            depth[y : y + shape.h, x : x + shape.w][mask] = shape.depth
            labels[y : y + shape.h, x : x + shape.w][mask] = k + 1
            dx0, dy0, tw, th = tight[k]
            frame_boxes.append((x + dx0, y + dy0, tw, th))
            if shape.kind == "figure":
                kpts = POSE_OFFSETS * (tw, th) + (x + dx0, y + dy0)
                frame_kpts.append(kpts)
            else:
                frame_kpts.append(None)
        clip[t] = frame
        gt.masks.append(frame_masks)
        gt.boxes.append(frame_boxes)
        gt.keypoints.append(frame_kpts)
        gt.label_maps.append(labels)
        gt.depth_maps.append(depth.astype(np.float32))
    return clip, gt
