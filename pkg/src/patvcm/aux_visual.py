"""ROI-localized visual residual streams (shared det + task-specific).

One FSQ[8, 8, 8, 8] code (12 bits) per ROI latent cell, in roi_cells
order.  The feature is (mean residual R, G, B over the cell's per-frame
ROI pixels, residual luminance contrast).  Mean residuals are normalized
by 255 through a mu-law companding curve before quantization, which keeps
the no-residual quantization floor small (about 7 px instead of 32 px for
a linear map) while still representing saturated residuals; the decoded
magnitude for a zero residual stays below the 255/8 bound either way.

Write-back touches only pixels inside (cell footprint intersect ROI) in
frames where the ROI exists, adds the decoded mean correction per channel,
then rescales luminance deviations around the local mean by a gain driven
by the contrast code.  Pixels outside ROI coverage are bit-identical to
the input reconstruction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from patvcm.baseline import CodecProfile, temporal_groups
from patvcm.container import pack_bits, unpack_bits
from patvcm.errors import StructuralError
from patvcm.fsq import FsqSpec, code_of, dequantize, index_of, quantize
from patvcm.roi import RoiSet, roi_cells, select_stage1, select_stage2

AUX_FSQ = FsqSpec((8, 8, 8, 8))
AUX_BITS_PER_CELL = 12
RESIDUAL_MU = 15.0
CONTRAST_GAIN = 1.5

TASK_DET = 1
TASK_SEG = 2
TASK_DEPTH = 3
TASK_NAMES = {TASK_DET: "det", TASK_SEG: "seg", TASK_DEPTH: "depth"}


def compand(mean_residual: np.ndarray) -> np.ndarray:
    """Map a residual in [-255, 255] to the companded feature in [-1, 1]."""
    m = np.asarray(mean_residual, dtype=np.float64) / 255.0
    return np.sign(m) * np.log1p(RESIDUAL_MU * np.abs(m)) / math.log1p(RESIDUAL_MU)


def expand(feature: np.ndarray) -> np.ndarray:
    """Inverse of compand, back to pixel units."""
    f = np.asarray(feature, dtype=np.float64)
    mag = (np.expm1(np.abs(f) * math.log1p(RESIDUAL_MU))) / RESIDUAL_MU
    return np.sign(f) * mag * 255.0


@dataclass(frozen=True)
class AuxVisualStream:
    stage: int
    task_id: int
    codes: np.ndarray = field(repr=False)  # (N, 4) int codes in roi_cells order

    def __post_init__(self) -> None:
        if self.codes.ndim != 2 or self.codes.shape[1] != AUX_FSQ.ndim:
            raise ValueError(f"codes must be (N, 4), got {self.codes.shape}")

    @property
    def cell_count(self) -> int:
        return int(self.codes.shape[0])


def aux_bits(stream: AuxVisualStream) -> int:
    return AUX_BITS_PER_CELL * stream.cell_count


def stream_to_payload(stream: AuxVisualStream) -> tuple[bytes, int]:
    indices = index_of(stream.codes, AUX_FSQ)
    indices = np.atleast_1d(indices)
    return pack_bits((int(i), AUX_BITS_PER_CELL) for i in indices)


def stream_from_payload(
    payload: bytes, payload_bits: int, stage: int, task_id: int
) -> AuxVisualStream:
    if payload_bits % AUX_BITS_PER_CELL:
        raise StructuralError(
            f"visual payload of {payload_bits} bits is not a multiple of "
            f"{AUX_BITS_PER_CELL}"
        )
    count = payload_bits // AUX_BITS_PER_CELL
    values = unpack_bits(payload, [AUX_BITS_PER_CELL] * count)
    codes = code_of(np.array(values, dtype=np.int64), AUX_FSQ)
    return AuxVisualStream(stage, task_id, codes.reshape(count, AUX_FSQ.ndim))


def _roi_mask(rois: RoiSet, frames: int, height: int, width: int) -> np.ndarray:
    mask = np.zeros((frames, height, width), dtype=bool)
    for t, boxes in enumerate(rois.frames):
        for b in boxes:
            mask[t, b.y0 : b.y1, b.x0 : b.x1] = True
    return mask


def _cell_pixels(
    cell: tuple[int, int, int],
    groups: list[np.ndarray],
    mask: np.ndarray,
    sf: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index arrays (frames, rows, cols) of the cell's covered pixels."""
    g, i, j = cell
    fsel = groups[g]
    sub = mask[fsel, i * sf : (i + 1) * sf, j * sf : (j + 1) * sf]
    f_idx, r_idx, c_idx = np.nonzero(sub)
    return fsel[f_idx], i * sf + r_idx, j * sf + c_idx


def encode_aux(
    orig: np.ndarray,
    recon: np.ndarray,
    rois: RoiSet,
    profile: CodecProfile,
    task_id: int,
) -> AuxVisualStream:
    """One 12-bit code per ROI cell from the residual (orig - recon)."""
    if orig.shape != recon.shape:
        raise ValueError(f"orig {orig.shape} and recon {recon.shape} differ")
    frames, height, width = orig.shape[:3]
    dims = (len(temporal_groups(frames, profile)), height // profile.spatial_factor,
            width // profile.spatial_factor)
    cells = roi_cells(rois, dims, profile)
    groups = temporal_groups(frames, profile)
    mask = _roi_mask(rois, frames, height, width)
    residual = orig.astype(np.float64) - recon
    feats = np.zeros((len(cells), AUX_FSQ.ndim), dtype=np.float64)
    for n, cell in enumerate(cells):
        fs, rs, cs = _cell_pixels(cell, groups, mask, profile.spatial_factor)
        res = residual[fs, rs, cs]  # (npix, 3)
        mean_rgb = res.mean(axis=0)
        lum = res.mean(axis=1)
        contrast = float(lum.std()) / 127.5
        feats[n, :3] = compand(mean_rgb)
        feats[n, 3] = contrast
    codes = quantize(feats, AUX_FSQ)
    return AuxVisualStream(rois.stage, task_id, codes)


def decode_aux(
    stream: AuxVisualStream,
    recon: np.ndarray,
    rois: RoiSet,
    profile: CodecProfile,
) -> np.ndarray:
    """Write the decoded residual back inside ROI coverage; clamp to [0, 255]."""
    frames, height, width = recon.shape[:3]
    dims = (len(temporal_groups(frames, profile)), height // profile.spatial_factor,
            width // profile.spatial_factor)
    cells = roi_cells(rois, dims, profile)
    if len(cells) != stream.cell_count:
        raise StructuralError(
            f"stage-{rois.stage} stream carries {stream.cell_count} cells, "
            f"ROI derivation yields {len(cells)}"
        )
    out = recon.copy()
    if not cells:
        return out
    groups = temporal_groups(frames, profile)
    mask = _roi_mask(rois, frames, height, width)
    cents = dequantize(stream.codes, AUX_FSQ)
    delta_rgb = expand(cents[:, :3])
    gains = 1.0 + CONTRAST_GAIN * cents[:, 3]
    for n, cell in enumerate(cells):
        fs, rs, cs = _cell_pixels(cell, groups, mask, profile.spatial_factor)
        px = out[fs, rs, cs] + delta_rgb[n]
        lum = px.mean(axis=1)
        px += ((gains[n] - 1.0) * (lum - lum.mean()))[:, None]
        out[fs, rs, cs] = np.clip(px, 0.0, 255.0)
    return out


def chain(
    streams: list[AuxVisualStream],
    recon0: np.ndarray,
    detector,
    profile: CodecProfile,
) -> tuple[np.ndarray, RoiSet | None, RoiSet | None]:
    """Apply visual streams in stage order, re-deriving ROIs like the encoder.

    `detector` maps one frame to a detection list.  Returns the refined clip
    plus the derived stage-1 and stage-2 RoiSets (None where not derived).
    """
    frames, height, width = recon0.shape[:3]
    if not streams:
        return recon0, None, None
    if streams[0].stage != 1:
        raise StructuralError("first visual stream must be the stage-1 stream")
    if any(s.stage != 2 for s in streams[1:]):
        raise StructuralError("streams after the first must be stage-2 streams")
    dets = [detector(recon0[t]) for t in range(frames)]
    rois1 = select_stage1(dets, height, width)
    refined = decode_aux(streams[0], recon0, rois1, profile)
    dets2 = [detector(refined[t]) for t in range(frames)]
    rois2 = select_stage2(dets2, height, width)
    for stream in streams[1:]:
        refined = decode_aux(stream, refined, rois2, profile)
    return refined, rois1, rois2
