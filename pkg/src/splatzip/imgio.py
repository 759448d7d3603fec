"""PNG loading and saving at the package's [0, 1] float convention."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .core import ImageBuffer, SplatError


class UnreadableImageError(SplatError):
    """The input path does not parse as a supported image."""


def load_png(path: str | Path) -> ImageBuffer:
    """Read an image file (PNG preferred) as RGB in [0, 1]."""
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64) / 255.0
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise UnreadableImageError(f"cannot read image {path}: {exc}") from exc
    return ImageBuffer.from_array(arr)


def save_png(image, path: str | Path) -> None:
    """Write an image (ImageBuffer or float array) as 8-bit PNG."""
    arr = image.data if isinstance(image, ImageBuffer) else np.asarray(image)
    u8 = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(u8, mode="RGB").save(path)
