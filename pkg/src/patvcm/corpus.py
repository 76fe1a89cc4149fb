"""Corpus file layout and portable readers/writers.

A clip directory holds:

    manifest.txt          header lines T=/H=/W=/seed=, then one frame path per line
    frames/f###.ppm       binary P6 pixmaps
    gt/labels.txt         shape table, per-frame boxes and keypoints (plain text)
    gt/masks/f###.pgm     binary P5 label maps (0 = background, k+1 = shape k)
    gt/depth/f###.f32     row-major little-endian float32 depth grids

Ground truth sidecars are optional for encode-only corpora; evaluation
skips (and counts) clips without them.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from patvcm.errors import StructuralError
from patvcm.scenes import GroundTruth


def write_ppm(path: Path, frame: np.ndarray) -> None:
    if frame.ndim != 3 or frame.shape[2] != 3 or frame.dtype != np.uint8:
        raise ValueError(f"P6 writer needs (H, W, 3) uint8, got {frame.shape} {frame.dtype}")
    h, w = frame.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(frame.tobytes())


def _read_pnm_header(fh) -> tuple[bytes, int, int, int]:
    fields = []
    magic = fh.read(2)
    while len(fields) < 3:
        line = fh.readline()
        if not line:
            raise StructuralError("truncated pnm header")
        body = line.split(b"#", 1)[0]
        fields.extend(body.split())
    w, h, maxval = (int(v) for v in fields[:3])
    return magic, w, h, maxval


def read_ppm(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, w, h, maxval = _read_pnm_header(fh)
        if magic != b"P6" or maxval != 255:
            raise StructuralError(f"{path}: expected binary P6 maxval 255")
        data = fh.read(w * h * 3)
    if len(data) != w * h * 3:
        raise StructuralError(f"{path}: truncated P6 payload")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3)


def write_pgm(path: Path, gray: np.ndarray) -> None:
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise ValueError(f"P5 writer needs (H, W) uint8, got {gray.shape} {gray.dtype}")
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(gray.tobytes())


def read_pgm(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, w, h, maxval = _read_pnm_header(fh)
        if magic != b"P5" or maxval != 255:
            raise StructuralError(f"{path}: expected binary P5 maxval 255")
        data = fh.read(w * h)
    if len(data) != w * h:
        raise StructuralError(f"{path}: truncated P5 payload")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w)


def write_f32(path: Path, grid: np.ndarray) -> None:
    np.asarray(grid, dtype="<f4").tofile(path)


def read_f32(path: Path, height: int, width: int) -> np.ndarray:
    data = np.fromfile(path, dtype="<f4")
    if data.size != height * width:
        raise StructuralError(f"{path}: expected {height * width} floats, got {data.size}")
    return data.reshape(height, width)


@dataclass
class CorpusClip:
    clip_dir: Path
    seed: int
    frames: np.ndarray  # (T, H, W, 3) uint8
    gt: GroundTruth | None

    @property
    def name(self) -> str:
        return self.clip_dir.name


def write_clip(out_dir: Path, seed: int, clip: np.ndarray, gt: GroundTruth | None) -> Path:
    clip_dir = out_dir / f"clip_{seed:05d}"
    (clip_dir / "frames").mkdir(parents=True, exist_ok=True)
    t_n, height, width = clip.shape[:3]
    lines = [f"T={t_n}", f"H={height}", f"W={width}", f"seed={seed}"]
    for t in range(t_n):
        rel = f"frames/f{t:03d}.ppm"
        write_ppm(clip_dir / rel, clip[t])
        lines.append(rel)
    (clip_dir / "manifest.txt").write_text("\n".join(lines) + "\n")
    if gt is not None:
        _write_gt(clip_dir, gt)
    return clip_dir


def _write_gt(clip_dir: Path, gt: GroundTruth) -> None:
    (clip_dir / "gt" / "masks").mkdir(parents=True, exist_ok=True)
    (clip_dir / "gt" / "depth").mkdir(parents=True, exist_ok=True)
    lines = [f"shapes={gt.shape_count}"]
    for k in range(gt.shape_count):
        lines.append(
            f"shape {k} class {gt.class_ids[k]} kind {gt.kinds[k]} depth "
            f"{gt.shape_depths[k]!r} caption {shlex.quote(gt.captions[k])}"
        )
    for t in range(gt.frames):
        write_pgm(clip_dir / "gt" / "masks" / f"f{t:03d}.pgm", gt.label_maps[t])
        write_f32(clip_dir / "gt" / "depth" / f"f{t:03d}.f32", gt.depth_maps[t])
        for k in range(gt.shape_count):
            x0, y0, w, h = gt.boxes[t][k]
            lines.append(f"box {t} {k} {x0} {y0} {w} {h}")
            kpts = gt.keypoints[t][k]
            if kpts is not None:
                coords = " ".join(repr(float(v)) for v in kpts.reshape(-1))
                lines.append(f"kp {t} {k} {coords}")
    (clip_dir / "gt" / "labels.txt").write_text("\n".join(lines) + "\n")


def read_manifest(clip_dir: Path) -> tuple[dict, list[Path]]:
    manifest = clip_dir / "manifest.txt"
    if not manifest.is_file():
        raise StructuralError(f"{clip_dir}: missing manifest.txt")
    header: dict[str, int] = {}
    frame_paths: list[Path] = []
    for line in manifest.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line and not line.endswith(".ppm"):
            key, _, value = line.partition("=")
            header[key.strip()] = int(value.strip())
        else:
            frame_paths.append(clip_dir / line)
    for key in ("T", "H", "W"):
        if key not in header:
            raise StructuralError(f"{clip_dir}: manifest missing {key}=")
    if len(frame_paths) != header["T"]:
        raise StructuralError(
            f"{clip_dir}: manifest lists {len(frame_paths)} frames, T={header['T']}"
        )
    return header, frame_paths


def read_clip(clip_dir: Path) -> CorpusClip:
    header, frame_paths = read_manifest(clip_dir)
    frames = np.stack([read_ppm(p) for p in frame_paths])
    if frames.shape[1] != header["H"] or frames.shape[2] != header["W"]:
        raise StructuralError(f"{clip_dir}: frame dims disagree with manifest")
    gt = _read_gt(clip_dir, header) if (clip_dir / "gt" / "labels.txt").is_file() else None
    return CorpusClip(clip_dir, header.get("seed", -1), frames, gt)


def _read_gt(clip_dir: Path, header: dict) -> GroundTruth:
    t_n, height, width = header["T"], header["H"], header["W"]
    lines = (clip_dir / "gt" / "labels.txt").read_text().splitlines()
    first = lines[0].strip()
    if not first.startswith("shapes="):
        raise StructuralError(f"{clip_dir}: labels.txt missing shapes= header")
    count = int(first.partition("=")[2])
    class_ids = [0] * count
    kinds = [""] * count
    captions = [""] * count
    depths = [0.0] * count
    boxes = [[None] * count for _ in range(t_n)]
    keypoints = [[None] * count for _ in range(t_n)]
    for line in lines[1:]:
        parts = shlex.split(line.strip())
        if not parts:
            continue
        if parts[0] == "shape":
            k = int(parts[1])
            class_ids[k] = int(parts[3])
            kinds[k] = parts[5]
            depths[k] = float(parts[7])
            captions[k] = parts[9]
        elif parts[0] == "box":
            t, k = int(parts[1]), int(parts[2])
            boxes[t][k] = tuple(int(v) for v in parts[3:7])
        elif parts[0] == "kp":
            t, k = int(parts[1]), int(parts[2])
            vals = np.array([float(v) for v in parts[3:]], dtype=np.float64)
            keypoints[t][k] = vals.reshape(-1, 2)
    label_maps = [read_pgm(clip_dir / "gt" / "masks" / f"f{t:03d}.pgm") for t in range(t_n)]
    depth_maps = [
        read_f32(clip_dir / "gt" / "depth" / f"f{t:03d}.f32", height, width)
        for t in range(t_n)
    ]
    masks = [
        np.stack([label_maps[t] == k + 1 for k in range(count)])
        if count
        else np.zeros((0, height, width), dtype=bool)
        for t in range(t_n)
    ]
    return GroundTruth(
        frames=t_n,
        height=height,
        width=width,
        class_ids=tuple(class_ids),
        kinds=tuple(kinds),
        captions=tuple(captions),
        shape_depths=tuple(depths),
        boxes=boxes,
        masks=masks,
        keypoints=keypoints,
        label_maps=label_maps,
        depth_maps=depth_maps,
    )


def list_clips(corpus_dir: Path) -> list[Path]:
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise StructuralError(f"{corpus_dir}: not a directory")
    dirs = sorted(p for p in corpus_dir.iterdir() if (p / "manifest.txt").is_file())
    if not dirs:
        raise StructuralError(f"{corpus_dir}: no clip directories with manifests")
    return dirs
