"""Quality metrics: PSNR, single-scale SSIM, and five-scale MS-SSIM.

SSIM follows the standard formulation: 11x11 Gaussian window with sigma 1.5
applied in valid mode (no padding), stabilizers C1 = 0.01^2 and C2 = 0.03^2
on the unit intensity range, averaged over channels. MS-SSIM uses the
published scale weights with dyadic 2x2 mean-pool downsampling; negative
contrast-structure terms are clamped at zero before the geometric mean so
the result stays real (the common ReLU guard).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import filter_valid
from .core import ImageBuffer, SplatError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
C1 = 0.01**2
C2 = 0.03**2
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
PSNR_CAP = 99.0


class ImageTooSmallError(SplatError):
    """The image is smaller than the metric's minimum supported size."""


@dataclass(frozen=True)
class QualityReport:
    """Metric bundle; ms_ssim is None when the image is too small for 5 scales."""

    psnr: float
    ssim: float
    ms_ssim: float | None


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1D Gaussian taps."""
    x = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _as_array(img) -> np.ndarray:
    if isinstance(img, ImageBuffer):
        return img.data
    return np.asarray(img, dtype=np.float64)


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def psnr(a, b) -> float:
    """10 log10(1 / MSE) against peak 1.0; identical inputs cap at 99 dB."""
    a, b = _as_array(a), _as_array(b)
    _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return 10.0 * math.log10(1.0 / mse)


def _ssim_cs_channel(
    x: np.ndarray, y: np.ndarray, kernel: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    # per-pixel SSIM and contrast-structure maps on the valid grid
    mu_x = filter_valid(x, kernel)
    mu_y = filter_valid(y, kernel)
    sig_x = filter_valid(x * x, kernel) - mu_x * mu_x
    sig_y = filter_valid(y * y, kernel) - mu_y * mu_y
    sig_xy = filter_valid(x * y, kernel) - mu_x * mu_y
    cs = (2.0 * sig_xy + C2) / (sig_x + sig_y + C2)
    lum = (2.0 * mu_x * mu_y + C1) / (mu_x * mu_x + mu_y * mu_y + C1)
    return lum * cs, cs


def _ssim_cs(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    kernel = gaussian_window()
    s_sum = 0.0
    cs_sum = 0.0
    for ch in range(3):
        s_map, cs_map = _ssim_cs_channel(
            np.ascontiguousarray(a[:, :, ch]), np.ascontiguousarray(b[:, :, ch]), kernel
        )
        s_sum += float(s_map.mean())
        cs_sum += float(cs_map.mean())
    return s_sum / 3.0, cs_sum / 3.0


def ssim(a, b) -> float:
    """Mean local SSIM over valid 11x11 windows, channel-averaged."""
    a, b = _as_array(a), _as_array(b)
    _check_pair(a, b)
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ImageTooSmallError(
            f"SSIM needs min dimension >= {SSIM_WINDOW}, got {a.shape[:2]}"
        )
    return _ssim_cs(a, b)[0]


def _downsample2(a: np.ndarray) -> np.ndarray:
    h2, w2 = a.shape[0] // 2, a.shape[1] // 2
    return a[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2, 3).mean(axis=(1, 3))


def ms_ssim(a, b) -> float:
    """Five-scale MS-SSIM with weights (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)."""
    a, b = _as_array(a), _as_array(b)
    _check_pair(a, b)
    min_dim = SSIM_WINDOW * 2 ** (len(MSSSIM_WEIGHTS) - 1)
    if min(a.shape[0], a.shape[1]) < min_dim:
        raise ImageTooSmallError(
            f"MS-SSIM needs min dimension >= {min_dim} for "
            f"{len(MSSSIM_WEIGHTS)} scales, got {a.shape[:2]}; report SSIM instead"
        )
    result = 1.0
    for lvl, weight in enumerate(MSSSIM_WEIGHTS):
        s_val, cs_val = _ssim_cs(a, b)
        if lvl < len(MSSSIM_WEIGHTS) - 1:
            result *= max(cs_val, 0.0) ** weight
            a = _downsample2(a)
            b = _downsample2(b)
        else:
            result *= max(s_val, 0.0) ** weight
    return result


def evaluate(a, b) -> QualityReport:
    """All metrics at once; MS-SSIM falls back to None when unsupported."""
    a, b = _as_array(a), _as_array(b)
    try:
        ms = ms_ssim(a, b)
    except ImageTooSmallError:
        ms = None
    return QualityReport(psnr=psnr(a, b), ssim=ssim(a, b), ms_ssim=ms)
