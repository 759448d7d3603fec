"""Adaptive tile planning and the per-tile sampling-weight features.

Large images are partitioned into tiles with adaptive strides so tile
placement stays uniform; within each tile a gradient-magnitude map and a
windowed color-variance map combine into the per-pixel sampling weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TilePlan:
    """Tile geometry plus per-tile sample quotas, in row-major tile order."""

    tile_size: int
    n_h: int
    n_w: int
    origins: list[tuple[int, int]]   # (row, col) top-left per tile
    extents: list[tuple[int, int]]   # (tile_h, tile_w) per tile
    quotas_vs: np.ndarray
    quotas_us: np.ndarray

    @property
    def n_tiles(self) -> int:
        return self.n_h * self.n_w


@dataclass(frozen=True)
class WeightMap:
    """Per-pixel sampling weights for one tile, with the normalized inputs."""

    weights: np.ndarray
    grad_norm: np.ndarray
    var_norm: np.ndarray


def _allocate(total: int, n_tiles: int) -> np.ndarray:
    # floor share everywhere, one extra for the first (total mod n_tiles)
    # tiles in row-major index order
    base = total // n_tiles
    rem = total % n_tiles
    quotas = np.full(n_tiles, base, dtype=np.int64)
    quotas[:rem] += 1
    return quotas


def plan_tiles(
    height: int, width: int, tile_size: int, n_vs: int, n_us: int = 0
) -> TilePlan:
    """Lay out tiles with adaptive strides and allocate sample quotas.

    Tile counts are ceil(dim / T); with more than one tile along a dimension
    the stride is (dim - T) / (count - 1) and tile i starts at
    min(floor(i * stride), dim - T), so the first tile starts at 0 and the
    last ends exactly at the image boundary. A single tile is centered,
    which after clamping to nonnegative coordinates means origin 0 whenever
    the tile is at least as large as the image.
    """
    if height < 1 or width < 1 or tile_size < 1:
        raise ValueError("height, width and tile_size must be >= 1")
    if n_vs < 0 or n_us < 0:
        raise ValueError("sample counts must be nonnegative")
    n_h = max(1, math.ceil(height / tile_size))
    n_w = max(1, math.ceil(width / tile_size))

    def positions(dim: int, count: int) -> list[int]:
        if count == 1:
            return [max(0, (dim - tile_size) // 2)]
        stride = (dim - tile_size) / (count - 1)
        return [min(math.floor(i * stride), dim - tile_size) for i in range(count)]

    rows = positions(height, n_h)
    cols = positions(width, n_w)
    origins: list[tuple[int, int]] = []
    extents: list[tuple[int, int]] = []
    for r in rows:
        for c in cols:
            origins.append((r, c))
            extents.append((min(tile_size, height - r), min(tile_size, width - c)))
    return TilePlan(
        tile_size=tile_size,
        n_h=n_h,
        n_w=n_w,
        origins=origins,
        extents=extents,
        quotas_vs=_allocate(n_vs, n_h * n_w),
        quotas_us=_allocate(n_us, n_h * n_w),
    )


def gradient_magnitude(tile: np.ndarray) -> np.ndarray:
    """Channel-mean L2 norm of the spatial intensity gradient.

    Central differences in the interior, one-sided at borders; dimensions of
    length one get a zero gradient along that axis.
    """
    h, w = tile.shape[:2]
    gy = np.gradient(tile, axis=0) if h > 1 else np.zeros_like(tile)
    gx = np.gradient(tile, axis=1) if w > 1 else np.zeros_like(tile)
    return np.sqrt(gx * gx + gy * gy).mean(axis=2)


def color_variance(tile: np.ndarray, window: int = 5) -> np.ndarray:
    """Channel-mean population variance over a square window per pixel.

    The window is truncated at image borders (variance over however many
    pixels remain). Computed as E[x^2] - E[x]^2 from box sums, clamped at
    zero against cancellation.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    h, w = tile.shape[:2]
    if window == 1:
        return np.zeros((h, w))
    half = window // 2

    def box_sum(a: np.ndarray) -> np.ndarray:
        # summed-area table with an implicit zero border
        s = np.zeros((h + 1, w + 1) + a.shape[2:], dtype=np.float64)
        np.cumsum(a, axis=0, out=s[1:, 1:])
        np.cumsum(s[1:, 1:], axis=1, out=s[1:, 1:])
        r0 = np.clip(np.arange(h) - half, 0, h)
        r1 = np.clip(np.arange(h) + half + 1, 0, h)
        c0 = np.clip(np.arange(w) - half, 0, w)
        c1 = np.clip(np.arange(w) + half + 1, 0, w)
        return (
            s[r1][:, c1] - s[r0][:, c1] - s[r1][:, c0] + s[r0][:, c0]
        )

    counts = box_sum(np.ones((h, w, 1)))
    # shifting by the tile mean costs nothing and kills the catastrophic
    # cancellation of E[x^2] - E[x]^2 (constant tiles come out exactly zero)
    shifted = tile - tile.mean(axis=(0, 1))
    mean = box_sum(shifted) / counts
    mean_sq = box_sum(shifted * shifted) / counts
    var = np.maximum(mean_sq - mean * mean, 0.0)
    return var.mean(axis=2)


def sampling_weights(
    m: np.ndarray, v: np.ndarray, lambda_m: float, epsilon: float = 1e-8
) -> WeightMap:
    """Combine tile-normalized gradient and variance maps into weights.

    Each map is divided by its tile maximum plus epsilon, then blended as
    lambda_m * grad + (1 - lambda_m) * var. All-zero inputs yield all-zero
    weights; the sampler treats that as a uniform distribution.
    """
    if m.shape != v.shape:
        raise ValueError(f"shape mismatch: {m.shape} vs {v.shape}")
    m_norm = m / (m.max() + epsilon)
    v_norm = v / (v.max() + epsilon)
    w = lambda_m * m_norm + (1.0 - lambda_m) * v_norm
    return WeightMap(weights=w, grad_norm=m_norm, var_norm=v_norm)
