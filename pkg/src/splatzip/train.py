"""Gradient-based refinement of a GaussianSet against the source image.

The loss blends mean absolute error with structural dissimilarity,
L = lambda_l * mean|render - target| + (1 - lambda_l) * (1 - SSIM),
and its image gradient is analytic (the SSIM term via the closed-form
derivative of the local statistics). Each parameter group gets its own Adam
rate: means 1e-4 in [0, 1]-normalized coordinates (so the rate is
resolution-independent), log-scales 5e-3, colors 5e-2, rotations 1e-3.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

import numpy as np

from ._kernels import (
    combine_loss_grad,
    filter_valid,
    filter_valid_into,
    ssim_partials,
)
from .core import EncoderConfig, GaussianSet, ImageBuffer, SplatError
from .metrics import C1, C2, SSIM_WINDOW, ImageTooSmallError, gaussian_window, psnr
from .rasterizer import backward, render

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
PSNR_EVERY = 100


class NonFiniteLossError(SplatError):
    """Training produced a NaN/Inf loss; message carries parameter stats."""


class _LossContext:
    """Target-side SSIM statistics and scratch buffers, reused across steps."""

    def __init__(self, target: np.ndarray):
        self.kernel = gaussian_window()
        h, w = target.shape[:2]
        n = len(self.kernel)
        hv, wv = h - n + 1, w - n + 1
        self.y_ch = [np.ascontiguousarray(target[:, :, c]) for c in range(3)]
        self.mu_y = []
        self.sig_y = []
        for y in self.y_ch:
            mu = filter_valid(y, self.kernel)
            self.mu_y.append(mu)
            self.sig_y.append(filter_valid(y * y, self.kernel) - mu * mu)
        self.n_valid = hv * wv
        pad = n - 1
        # scratch shared by all channels; the pad buffer's zero border is
        # written once and never touched again, making the valid filter on
        # it an exact adjoint (full-mode correlation) of the forward filter
        self._prod = np.empty((h, w))
        self._vtmp = np.empty((h, wv))
        self._mu_x = np.empty((hv, wv))
        self._x2f = np.empty((hv, wv))
        self._xyf = np.empty((hv, wv))
        self._p = [np.empty((hv, wv)) for _ in range(3)]
        self._pad = np.zeros((hv + 2 * pad, wv + 2 * pad))
        self._pad_core = self._pad[pad:-pad, pad:-pad]
        self._ptmp = np.empty((hv + 2 * pad, w))
        self._f = [np.empty((h, w)) for _ in range(3)]

    def loss_and_grad(
        self, x_img: np.ndarray, lambda_l: float
    ) -> tuple[float, np.ndarray]:
        """Composite loss and its per-pixel gradient in one buffered pass."""
        k = self.kernel
        grad = np.empty_like(x_img)
        ssim_total = 0.0
        abs_total = 0.0
        n_pix = x_img.size
        l1_coef = lambda_l / n_pix
        ss_coef = (1.0 - lambda_l) / (3.0 * self.n_valid)
        for ch in range(3):
            x = np.ascontiguousarray(x_img[:, :, ch])
            y = self.y_ch[ch]
            filter_valid_into(x, k, self._vtmp, self._mu_x)
            np.multiply(x, x, out=self._prod)
            filter_valid_into(self._prod, k, self._vtmp, self._x2f)
            np.multiply(x, y, out=self._prod)
            filter_valid_into(self._prod, k, self._vtmp, self._xyf)
            ssim_total += ssim_partials(
                self._mu_x, self.mu_y[ch], self._x2f, self._xyf, self.sig_y[ch],
                C1, C2, self._p[0], self._p[1], self._p[2],
            )
            for i in range(3):
                np.copyto(self._pad_core, self._p[i])
                filter_valid_into(self._pad, k, self._ptmp, self._f[i])
            abs_total += combine_loss_grad(
                x, y, self._f[0], self._f[1], self._f[2],
                l1_coef, ss_coef, grad[:, :, ch],
            )
        ssim_val = ssim_total / (3.0 * self.n_valid)
        loss = lambda_l * abs_total / n_pix + (1.0 - lambda_l) * (1.0 - ssim_val)
        return loss, grad


def composite_loss(
    rendered,
    target,
    lambda_l: float,
    _ctx: _LossContext | None = None,
) -> tuple[float, np.ndarray]:
    """Blended L1/SSIM loss and its analytic per-pixel gradient.

    With lambda_l == 1 the SSIM term (and its minimum-size requirement) is
    skipped entirely and the loss is exactly the mean absolute error.
    """
    x = rendered.data if isinstance(rendered, ImageBuffer) else np.asarray(rendered)
    y = target.data if isinstance(target, ImageBuffer) else np.asarray(target)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if lambda_l >= 1.0:
        diff = x - y
        loss = float(np.abs(diff).mean())
        grad = np.sign(diff) / diff.size
        return loss, grad
    if min(x.shape[0], x.shape[1]) < SSIM_WINDOW:
        raise ImageTooSmallError(
            f"the SSIM loss term needs min dimension >= {SSIM_WINDOW}"
        )
    ctx = _ctx if _ctx is not None else _LossContext(y)
    return ctx.loss_and_grad(x, lambda_l)


@dataclass
class TrainState:
    """Optimizer state and per-step diagnostics."""

    step: int = 0
    moments1: dict = field(default_factory=dict)
    moments2: dict = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list)
    psnr_history: list[tuple[int, float]] = field(default_factory=list)


def _param_stats(set_: GaussianSet) -> str:
    return (
        f"|means|max={np.abs(set_.means).max():.3g} "
        f"log_scales in [{set_.log_scales.min():.3g}, {set_.log_scales.max():.3g}] "
        f"colors in [{set_.colors.min():.3g}, {set_.colors.max():.3g}]"
    )


def train(
    image: ImageBuffer,
    set_: GaussianSet,
    config: EncoderConfig,
    render_mode: str = "blend",
    verbose: bool = False,
    progress_stream=None,
) -> tuple[GaussianSet, TrainState]:
    """Optimize the set in place for config.iterations steps.

    Records the loss before every update plus a final evaluation, and PSNR
    every 100 steps. Raises NonFiniteLossError if the loss ever leaves the
    reals (unreachable in normal operation thanks to the renderer's scale
    floor).
    """
    target = image.data
    height, width = image.height, image.width
    lr_means, lr_scales, lr_colors, lr_thetas = config.learning_rates
    ctx = _LossContext(target) if config.lambda_l < 1.0 else None
    stream = progress_stream if progress_stream is not None else sys.stdout

    norm = float(max(height, width))
    params = {
        "means": set_.means / norm,
        "log_scales": set_.log_scales,
        "thetas": set_.thetas,
        "colors": set_.colors,
    }
    rates = {
        "means": lr_means,
        "log_scales": lr_scales,
        "thetas": lr_thetas,
        "colors": lr_colors,
    }
    state = TrainState(
        moments1={k: np.zeros_like(v) for k, v in params.items()},
        moments2={k: np.zeros_like(v) for k, v in params.items()},
    )

    def record(step: int, out) -> float:
        loss, grad = composite_loss(out.image, target, config.lambda_l, _ctx=ctx)
        if not math.isfinite(loss):
            raise NonFiniteLossError(
                f"non-finite loss at step {step}: {_param_stats(set_)}"
            )
        state.loss_history.append(loss)
        if step % PSNR_EVERY == 0 or step == config.iterations:
            p = psnr(out.image, target)
            state.psnr_history.append((step, p))
            if verbose:
                print(f"{step},{loss:.8f},{p:.4f}", file=stream)
        return grad

    for step in range(config.iterations):
        out = render(set_, height, width, mode=render_mode)
        grad_img = record(step, out)
        grads = backward(set_, out, grad_img)
        group_grads = {
            "means": grads.d_means * norm,
            "log_scales": grads.d_log_scales,
            "thetas": grads.d_thetas,
            "colors": grads.d_colors,
        }
        t = step + 1
        for name, p in params.items():
            g = group_grads[name]
            m1 = state.moments1[name]
            m2 = state.moments2[name]
            m1 *= ADAM_BETA1
            m1 += (1.0 - ADAM_BETA1) * g
            m2 *= ADAM_BETA2
            m2 += (1.0 - ADAM_BETA2) * g * g
            m1_hat = m1 / (1.0 - ADAM_BETA1**t)
            m2_hat = m2 / (1.0 - ADAM_BETA2**t)
            p -= rates[name] * m1_hat / (np.sqrt(m2_hat) + ADAM_EPS)
        set_.means[:] = params["means"] * norm
        state.step = t

    out = render(set_, height, width, mode=render_mode)
    record(config.iterations, out)
    return set_, state
