"""Deterministic stand-in for the frozen baseline video tokenizer.

The transform is a rate-faithful proxy, not a neural codec: each latent
cell covers an 8x8 spatial block over one temporal frame group and stores
a 6-dim feature (mean R, mean G, mean B, horizontal luminance gradient,
vertical luminance gradient, temporal luminance delta), FSQ-quantized and
packed into one token.  Rate is a pure function of clip dims and profile.

Reconstruction is exactly feature-consistent: re-encoding a decoded clip
reproduces the same tokens.  The gradient/delta ramps are scaled by
RAMP_GAIN, chosen small enough that no reconstructed pixel can leave
[0, 255] for any code combination of the shipped profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from patvcm.container import pack_bits, unpack_bits
from patvcm.errors import ConfigError, StructuralError
from patvcm.fsq import FsqSpec, code_of, dequantize, index_of, quantize

# Amplitude of the reconstruction ramps in pixel units per unit feature.
RAMP_GAIN = 7.5


@dataclass(frozen=True)
class CodecProfile:
    profile_id: int
    name: str
    feature_levels: tuple[int, ...] = (8, 8, 8, 5, 5, 5)
    token_bits: int = 16
    temporal_factor: int = 4
    spatial_factor: int = 8

    def __post_init__(self) -> None:
        if len(self.feature_levels) != 6:
            raise ConfigError(f"profile needs 6 feature levels, got {self.feature_levels}")
        if any(lv < 2 for lv in self.feature_levels):
            raise ConfigError(f"feature levels must be >= 2, got {self.feature_levels}")
        size = math.prod(self.feature_levels)
        if size > 1 << self.token_bits:
            raise ConfigError(
                f"codebook size {size} exceeds 2^{self.token_bits} token capacity"
            )
        if not 1 <= self.token_bits <= 16:
            raise ConfigError(f"token_bits must be in [1, 16], got {self.token_bits}")
        # No-clamp condition for feature-consistent reconstruction: the worst
        # combined ramp swing must stay below the slack left by the most
        # extreme mean-color center.
        mean_slack = 255.0 / (2 * max(self.feature_levels[:3]))
        grad_peak = max(1.0 - 1.0 / lv for lv in self.feature_levels[3:])
        sf = self.spatial_factor
        swing = RAMP_GAIN * grad_peak * (2 * (sf - 1) / sf + 0.5)
        if swing >= mean_slack:
            raise ConfigError(
                f"profile {self.name}: ramp swing {swing:.2f} >= mean slack "
                f"{mean_slack:.2f}; reconstruction could clamp"
            )

    @property
    def fsq(self) -> FsqSpec:
        return FsqSpec(self.feature_levels)

    @property
    def codebook_size(self) -> int:
        return math.prod(self.feature_levels)


PROFILES: dict[str, CodecProfile] = {
    "default": CodecProfile(0, "default", (8, 8, 8, 5, 5, 5), 16),
    "medium": CodecProfile(1, "medium", (6, 6, 6, 4, 4, 4), 14),
    "coarse": CodecProfile(2, "coarse", (4, 4, 4, 3, 3, 3), 11),
    "tiny": CodecProfile(3, "tiny", (2, 2, 2, 2, 2, 2), 6),
}


def profile_by_id(profile_id: int) -> CodecProfile:
    for prof in PROFILES.values():
        if prof.profile_id == profile_id:
            return prof
    raise ConfigError(f"unknown profile id {profile_id}")


@dataclass(frozen=True)
class LatentGrid:
    dims: tuple[int, int, int]
    tokens: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.tokens.shape != self.dims:
            raise ValueError(f"token array {self.tokens.shape} != dims {self.dims}")

    @property
    def token_count(self) -> int:
        t, h, w = self.dims
        return t * h * w


def latent_shape(frames: int, height: int, width: int, profile: CodecProfile) -> tuple[int, int, int]:
    """Latent dims: 1 + ceil((T-1)/temporal_factor) frame groups, H/8 x W/8 cells."""
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    if height % profile.spatial_factor or width % profile.spatial_factor:
        raise ValueError(
            f"dims {height}x{width} not divisible by {profile.spatial_factor}"
        )
    t_lat = 1 + -((frames - 1) // -profile.temporal_factor)
    return t_lat, height // profile.spatial_factor, width // profile.spatial_factor


def temporal_groups(frames: int, profile: CodecProfile) -> list[np.ndarray]:
    """Frame indices per latent group: {0}, then consecutive runs of temporal_factor."""
    groups = [np.array([0])]
    start = 1
    while start < frames:
        stop = min(start + profile.temporal_factor, frames)
        groups.append(np.arange(start, stop))
        start = stop
    return groups


def group_of_frame(frame: int, profile: CodecProfile) -> int:
    return 0 if frame == 0 else 1 + (frame - 1) // profile.temporal_factor


def _time_weights(n: int) -> np.ndarray:
    # Zero-mean ramp with (last - first) == 1; identically zero for n == 1.
    if n == 1:
        return np.zeros(1)
    idx = np.arange(n, dtype=np.float64)
    return (idx - (n - 1) / 2.0) / (n - 1)


def _block_view(frames_hw: np.ndarray, factor: int) -> np.ndarray:
    # (n, H, W, ...) -> (n, H/f, f, W/f, f, ...)
    n, h, w = frames_hw.shape[:3]
    rest = frames_hw.shape[3:]
    return frames_hw.reshape(n, h // factor, factor, w // factor, factor, *rest)


def encode_clip(clip: np.ndarray, profile: CodecProfile) -> LatentGrid:
    """Tokenize a (T, H, W, 3) uint8 clip."""
    if clip.ndim != 4 or clip.shape[-1] != 3:
        raise ValueError(f"expected (T, H, W, 3) clip, got shape {clip.shape}")
    frames, height, width = clip.shape[:3]
    dims = latent_shape(frames, height, width, profile)
    sf = profile.spatial_factor
    spec = profile.fsq
    pix = clip.astype(np.float64)
    tokens = np.empty(dims, dtype=np.uint16)
    for g, idx in enumerate(temporal_groups(frames, profile)):
        blocks = _block_view(pix[idx], sf)  # (n, H', f, W', f, 3)
        mean_rgb = blocks.mean(axis=(0, 2, 4))  # (H', W', 3)
        lum = blocks.mean(axis=-1)  # (n, H', f, W', f)
        half = sf // 2
        gx = lum[..., half:].mean(axis=(0, 2, 4)) - lum[..., :half].mean(axis=(0, 2, 4))
        gy = lum[:, :, half:].mean(axis=(0, 2, 4)) - lum[:, :, :half].mean(axis=(0, 2, 4))
        if len(idx) > 1:
            dt = lum[-1].mean(axis=(1, 3)) - lum[0].mean(axis=(1, 3))
        else:
            dt = np.zeros(dims[1:])
        feats = np.stack(
            [
                mean_rgb[..., 0] / 127.5 - 1.0,
                mean_rgb[..., 1] / 127.5 - 1.0,
                mean_rgb[..., 2] / 127.5 - 1.0,
                gx / RAMP_GAIN,
                gy / RAMP_GAIN,
                dt / RAMP_GAIN,
            ],
            axis=-1,
        )
        tokens[g] = index_of(quantize(feats, spec), spec).astype(np.uint16)
    return LatentGrid(dims, tokens)


def decode_clip(latent: LatentGrid, profile: CodecProfile, frames: int) -> np.ndarray:
    """Reconstruct a (T, H, W, 3) float64 clip in [0, 255] from tokens."""
    t_lat, h_lat, w_lat = latent.dims
    if np.any(latent.tokens >= profile.codebook_size):
        raise StructuralError(
            f"token >= codebook size {profile.codebook_size} in latent grid"
        )
    groups = temporal_groups(frames, profile)
    if len(groups) != t_lat:
        raise ValueError(f"{frames} frames need {len(groups)} groups, latent has {t_lat}")
    sf = profile.spatial_factor
    spec = profile.fsq
    height, width = h_lat * sf, w_lat * sf
    recon = np.empty((frames, height, width, 3), dtype=np.float64)
    ramp = np.arange(sf) - (sf - 1) / 2.0  # zero-mean, half-gap sf/2
    for g, idx in enumerate(groups):
        cents = dequantize(code_of(latent.tokens[g].astype(np.int64), spec), spec)
        base = (cents[..., :3] + 1.0) * 127.5  # (H', W', 3)
        # Slope per pixel step such that the re-measured half-difference of
        # the luminance ramp equals center * RAMP_GAIN exactly.
        ax = cents[..., 3] * RAMP_GAIN / (sf / 2)
        ay = cents[..., 4] * RAMP_GAIN / (sf / 2)
        dt = cents[..., 5] * RAMP_GAIN
        tw = _time_weights(len(idx))
        lum_delta = (
            ax[None, :, None, :, None] * ramp[None, None, None, None, :]
            + ay[None, :, None, :, None] * ramp[None, None, :, None, None]
            + dt[None, :, None, :, None] * tw[:, None, None, None, None]
        )  # (n, H', sf, W', sf)
        block = base[None, :, None, :, None, :] + lum_delta[..., None]
        recon[idx] = block.reshape(len(idx), height, width, 3)
    return np.clip(recon, 0.0, 255.0)


def baseline_bits(latent: LatentGrid, profile: CodecProfile) -> int:
    return latent.token_count * profile.token_bits


def latent_to_payload(latent: LatentGrid, profile: CodecProfile) -> bytes:
    toks = latent.tokens.reshape(-1)
    payload, nbits = pack_bits((int(t), profile.token_bits) for t in toks)
    assert nbits == baseline_bits(latent, profile)
    return payload


def latent_from_payload(
    payload: bytes, dims: tuple[int, int, int], profile: CodecProfile
) -> LatentGrid:
    count = dims[0] * dims[1] * dims[2]
    try:
        values = unpack_bits(payload, [profile.token_bits] * count)
    except ValueError as exc:
        raise StructuralError(f"baseline payload too short: {exc}") from exc
    tokens = np.array(values, dtype=np.uint16).reshape(dims)
    if np.any(tokens >= profile.codebook_size):
        raise StructuralError("baseline payload contains out-of-range tokens")
    return LatentGrid(dims, tokens)
