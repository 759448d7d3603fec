"""Budgeted 2D Gaussian-splat image compression.

Encode: derive a primitive budget from the target compression ratio,
initialize Gaussians with feature-aware sampling, refine them with
gradient descent against an L1/SSIM loss, and serialize. Decode: rasterize
the primitives back into pixels at any resolution.
"""

from .codec import achieved_ratio, decode_file, encode_file
from .core import (
    Budget,
    BudgetTooSmallError,
    EncoderConfig,
    GaussianSet,
    ImageBuffer,
    SplatError,
    compute_budget,
    influence_radius,
)
from .features import plan_tiles, gradient_magnitude, color_variance, sampling_weights
from .metrics import QualityReport, evaluate, ms_ssim, psnr, ssim
from .rasterizer import GradientSet, RenderOutput, backward, gaussian_value, render
from .sampling import (
    SamplePoint,
    initialize,
    initialize_variant,
    knn_scales,
    uniform_sample_excluded,
    variational_sample_tile,
    weighted_median_color,
)
from .synth import natural_image
from .train import NonFiniteLossError, TrainState, composite_loss, train

__version__ = "0.1.0"

__all__ = [
    "Budget",
    "BudgetTooSmallError",
    "EncoderConfig",
    "GaussianSet",
    "GradientSet",
    "ImageBuffer",
    "NonFiniteLossError",
    "QualityReport",
    "RenderOutput",
    "SamplePoint",
    "SplatError",
    "TrainState",
    "achieved_ratio",
    "backward",
    "color_variance",
    "composite_loss",
    "compute_budget",
    "decode_file",
    "encode_file",
    "evaluate",
    "gaussian_value",
    "gradient_magnitude",
    "influence_radius",
    "initialize",
    "initialize_variant",
    "knn_scales",
    "ms_ssim",
    "natural_image",
    "plan_tiles",
    "psnr",
    "render",
    "sampling_weights",
    "ssim",
    "train",
    "uniform_sample_excluded",
    "variational_sample_tile",
    "weighted_median_color",
]
