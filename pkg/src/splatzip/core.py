"""Shared domain types and the primitive-budget arithmetic.

Everything downstream (feature maps, samplers, rasterizer, trainer, codec)
consumes these types. Images are row-major float arrays in [0, 1]; Gaussian
parameters are structure-of-arrays so the optimizer can update them in place
between render passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class SplatError(Exception):
    """Base class for errors raised by this package."""


class BudgetTooSmallError(SplatError):
    """The requested compression ratio admits zero primitives."""

    def __init__(self, height: int, width: int, cr: float):
        self.max_feasible_cr = 3.0 * height * width / 7.0
        super().__init__(
            f"compression ratio {cr:g} leaves no primitive budget for a "
            f"{height}x{width} image; maximum feasible ratio is "
            f"{self.max_feasible_cr:.1f}"
        )


@dataclass(frozen=True)
class ImageBuffer:
    """An RGB image as a (H, W, 3) float64 array with intensities in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 3 or d.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got shape {d.shape}")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError(f"empty image: shape {d.shape}")
        if d.dtype != np.float64:
            object.__setattr__(self, "data", d.astype(np.float64))
        lo, hi = float(self.data.min()), float(self.data.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"intensities outside [0, 1]: min={lo}, max={hi}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageBuffer":
        return cls(np.ascontiguousarray(arr, dtype=np.float64))


@dataclass
class GaussianSet:
    """Structure-of-arrays for N primitives.

    means: (N, 2) continuous pixel coordinates (x, y).
    log_scales: (N, 2) log-pixel units (log s_x, log s_y); positivity of the
        scales survives unconstrained gradient steps by construction.
    thetas: (N,) rotation angles in radians.
    colors: (N, 3) RGB, stored unconstrained and clamped to [0, 1] only at
        render time.

    Opacity is not stored; it is the constant 1.
    """

    means: np.ndarray
    log_scales: np.ndarray
    thetas: np.ndarray
    colors: np.ndarray

    def __post_init__(self):
        n = len(self.thetas)
        self.means = np.ascontiguousarray(self.means, dtype=np.float64)
        self.log_scales = np.ascontiguousarray(self.log_scales, dtype=np.float64)
        self.thetas = np.ascontiguousarray(self.thetas, dtype=np.float64)
        self.colors = np.ascontiguousarray(self.colors, dtype=np.float64)
        if self.means.shape != (n, 2) or self.log_scales.shape != (n, 2):
            raise ValueError("means and log_scales must be (N, 2)")
        if self.colors.shape != (n, 3):
            raise ValueError("colors must be (N, 3)")

    @property
    def count(self) -> int:
        return len(self.thetas)

    def copy(self) -> "GaussianSet":
        return GaussianSet(
            self.means.copy(),
            self.log_scales.copy(),
            self.thetas.copy(),
            self.colors.copy(),
        )


@dataclass(frozen=True)
class Budget:
    """Primitive and sample counts derived from (H, W, CR, lambda_g)."""

    cr: float
    n_g: int
    n_vs: int
    n_us: int
    s_base: float


@dataclass(frozen=True)
class EncoderConfig:
    """Knobs for the encoder pipeline.

    learning_rates maps to the parameter groups (means, scales, colors,
    thetas) in that order; the mean rate applies in [0, 1]-normalized
    image coordinates.
    """

    lambda_m: float = 0.9
    lambda_g: float = 0.7
    lambda_l: float = 0.9
    k_neighbors: int = 3
    tile_size: int = 1024
    iterations: int = 10_000
    learning_rates: tuple[float, float, float, float] = (1e-4, 5e-3, 5e-2, 1e-3)
    seed: int = 0
    variance_window: int = 5

    def __post_init__(self):
        for name in ("lambda_m", "lambda_g", "lambda_l"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.tile_size < 1:
            raise ValueError("tile_size must be >= 1")


def compute_budget(height: int, width: int, cr: float, lambda_g: float) -> Budget:
    """Derive the primitive budget for a target compression ratio.

    The total count assumes the 7-byte-per-primitive storage model, so
    n_g = floor(3HW / (7 CR)). The variational share is floor(lambda_g n_g)
    with the uniform share absorbing the remainder, and the base scale is
    one third of the radius of n_g equal-area circles tiling the canvas.

    Raises:
        BudgetTooSmallError: if the ratio admits no primitive at all.
    """
    if height < 1 or width < 1:
        raise ValueError("image dimensions must be >= 1")
    if cr <= 0:
        raise ValueError("compression ratio must be positive")
    if not 0.0 <= lambda_g <= 1.0:
        raise ValueError("lambda_g must lie in [0, 1]")
    n_g = math.floor(3.0 * height * width / (7.0 * cr))
    if n_g < 1:
        raise BudgetTooSmallError(height, width, cr)
    n_vs = math.floor(lambda_g * n_g)
    n_us = n_g - n_vs
    s_base = math.sqrt(height * width / (math.pi * n_g)) / 3.0
    return Budget(cr=cr, n_g=n_g, n_vs=n_vs, n_us=n_us, s_base=s_base)


def influence_radius(s_x: float, s_y: float) -> float:
    """Radius beyond which a primitive's contribution is culled: 3 max(s_x, s_y)."""
    return 3.0 * max(s_x, s_y)
