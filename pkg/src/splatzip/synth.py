"""Procedural test images with natural-image-like frequency content.

Smooth low-frequency background, soft-edged elliptical shapes for strong
gradients, and band-limited texture patches, so the feature-aware sampler
has realistic structure to work with. Fully deterministic per seed.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .core import ImageBuffer


def natural_image(height: int, width: int, seed: int = 0) -> ImageBuffer:
    """A reproducible synthetic photo stand-in with mixed frequency content."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    ys, xs = np.mgrid[0:height, 0:width]
    xf = xs / max(width - 1, 1)
    yf = ys / max(height - 1, 1)

    img = np.empty((height, width, 3))
    for c in range(3):
        fx, fy = rng.uniform(0.4, 1.6, 2)
        px, py = rng.uniform(0.0, 2.0 * np.pi, 2)
        img[:, :, c] = 0.5 + 0.22 * np.sin(2.0 * np.pi * fx * xf + px) * np.cos(
            2.0 * np.pi * fy * yf + py
        )

    # soft-edged ellipses: crisp boundaries, flat interiors
    n_shapes = 10 + int(rng.integers(0, 6))
    for _ in range(n_shapes):
        cx, cy = rng.uniform(0.1, 0.9) * width, rng.uniform(0.1, 0.9) * height
        rx = rng.uniform(0.04, 0.22) * width
        ry = rng.uniform(0.04, 0.22) * height
        ang = rng.uniform(0.0, np.pi)
        color = rng.uniform(0.05, 0.95, 3)
        ca, sa = np.cos(ang), np.sin(ang)
        u = (xs - cx) * ca + (ys - cy) * sa
        v = -(xs - cx) * sa + (ys - cy) * ca
        d = (u / rx) ** 2 + (v / ry) ** 2
        alpha = 1.0 / (1.0 + np.exp(np.clip((d - 1.0) * 40.0, -30, 30)))
        img += alpha[..., None] * (color - img)

    # band-limited texture, stronger in one image half
    lo = rng.standard_normal((max(2, height // 8), max(2, width // 8), 3))
    tex = ndimage.zoom(
        lo, (height / lo.shape[0], width / lo.shape[1], 1), order=1
    )[:height, :width]
    tex_gain = 0.06 * (0.35 + 0.65 * xf)[..., None]
    img += tex_gain * tex

    return ImageBuffer.from_array(np.clip(img, 0.0, 1.0))


def constant_image(height: int, width: int, value: float | tuple = 0.5) -> ImageBuffer:
    """A flat image; handy for degenerate-feature tests."""
    img = np.empty((height, width, 3))
    img[:] = value
    return ImageBuffer.from_array(img)
