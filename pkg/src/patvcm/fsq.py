"""Finite scalar quantization with fixed per-dimension level counts.

Each dimension i with L_i levels quantizes to the uniform centers
c_k = (2k + 1) / L_i - 1, k in [0, L_i).  Even level counts have no zero
center, so exact-zero inputs land on +-1/L_i; downstream users treat that
as a bounded floor.  A code maps to a flat index in mixed radix with the
first dimension least significant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class FsqSpec:
    levels: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.levels:
            raise ValueError("levels must be non-empty")
        if any(lv < 2 for lv in self.levels):
            raise ValueError(f"every level count must be >= 2, got {self.levels}")
        object.__setattr__(self, "levels", tuple(int(lv) for lv in self.levels))

    @property
    def ndim(self) -> int:
        return len(self.levels)

    @property
    def codebook_size(self) -> int:
        return math.prod(self.levels)

    @property
    def index_bits(self) -> int:
        return (self.codebook_size - 1).bit_length()


def quantize(values: Sequence[float] | np.ndarray, spec: FsqSpec) -> np.ndarray:
    """Nearest-center codes for inputs clamped to [-1, 1].

    Ties between adjacent centers break toward the smaller code, so the map
    is total and deterministic.  Accepts any (..., ndim) array.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape[-1:] != (spec.ndim,):
        raise ValueError(f"expected last dimension {spec.ndim}, got shape {arr.shape}")
    levels = np.asarray(spec.levels, dtype=np.float64)
    clamped = np.clip(arr, -1.0, 1.0)
    codes = np.ceil((clamped + 1.0) * levels / 2.0) - 1.0
    codes = np.clip(codes, 0, np.asarray(spec.levels) - 1)
    return codes.astype(np.int64)


def dequantize(codes: Sequence[int] | np.ndarray, spec: FsqSpec) -> np.ndarray:
    """Per-dimension centers for valid codes."""
    arr = np.asarray(codes, dtype=np.int64)
    if arr.shape[-1:] != (spec.ndim,):
        raise ValueError(f"expected last dimension {spec.ndim}, got shape {arr.shape}")
    levels = np.asarray(spec.levels, dtype=np.int64)
    if np.any(arr < 0) or np.any(arr >= levels):
        raise ValueError("code out of range for spec levels")
    return (2.0 * arr + 1.0) / levels - 1.0


def index_of(codes: Sequence[int] | np.ndarray, spec: FsqSpec) -> np.ndarray | int:
    """Mixed-radix flat index: sum_i k_i * prod_{j<i} L_j."""
    arr = np.asarray(codes, dtype=np.int64)
    if arr.shape[-1:] != (spec.ndim,):
        raise ValueError(f"expected last dimension {spec.ndim}, got shape {arr.shape}")
    levels = np.asarray(spec.levels, dtype=np.int64)
    if np.any(arr < 0) or np.any(arr >= levels):
        raise ValueError("code out of range for spec levels")
    weights = np.concatenate(([1], np.cumprod(levels[:-1])))
    flat = (arr * weights).sum(axis=-1)
    return int(flat) if flat.ndim == 0 else flat


def code_of(index: int | np.ndarray, spec: FsqSpec) -> np.ndarray:
    """Exact inverse of index_of."""
    arr = np.asarray(index, dtype=np.int64)
    if np.any(arr < 0) or np.any(arr >= spec.codebook_size):
        raise ValueError(f"index out of range [0, {spec.codebook_size})")
    out = np.empty(arr.shape + (spec.ndim,), dtype=np.int64)
    rem = arr.copy()
    for i, lv in enumerate(spec.levels):
        out[..., i] = rem % lv
        rem //= lv
    return out
