"""Differentiable rasterization of 2D Gaussians with analytic gradients.

Forward: every primitive contributes inside its axis-aligned bounding box of
half-side 3*max(s_x, s_y); per pixel the contributions composite in
ascending primitive-index order as c += color * G * T, T *= (1 - G), with
opacity fixed to 1, early-terminating once T drops below 1e-4. Uncovered
transmittance is black background. An alternate "sum" mode accumulates
c += color * G with no transmittance.

Backward: closed-form chain rule through the Gaussian exponent and the
compositing recurrence, visiting exactly the (pixel, primitive) pairs the
forward pass visited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import GaussianSet, SplatError

SCALE_FLOOR = 0.3  # pixels; keeps the inverse covariance well conditioned
T_EPS = _kernels.T_EPS
_TILE_PX = _kernels.TILE_PX
_TILES_PER_BLOCK = 64  # fixed gradient-accumulator granularity


@dataclass
class _DerivedParams:
    """Per-primitive quantities the kernels consume, cached for the backward."""

    mx: np.ndarray
    my: np.ndarray
    u: np.ndarray          # 1 / s_x^2 after flooring
    v: np.ndarray          # 1 / s_y^2 after flooring
    cth: np.ndarray
    sth: np.ndarray
    colors: np.ndarray     # clamped to [0, 1]
    floored_x: np.ndarray
    floored_y: np.ndarray
    px_c0: np.ndarray      # covered pixel ranges, inclusive
    px_c1: np.ndarray
    px_r0: np.ndarray
    px_r1: np.ndarray
    offsets: np.ndarray
    lists: np.ndarray
    n_tx: int
    n_ty: int


@dataclass
class RenderOutput:
    """Rendered image plus the replay state needed for the backward pass."""

    image: np.ndarray       # (H, W, 3) in [0, 1]
    contrib: np.ndarray     # pre-clamp composite
    t_final: np.ndarray     # (H, W)
    visit_count: int
    mode: str
    height: int
    width: int
    derived: _DerivedParams


@dataclass
class GradientSet:
    """Loss gradients, shaped like the GaussianSet parameter arrays."""

    d_means: np.ndarray
    d_log_scales: np.ndarray
    d_thetas: np.ndarray
    d_colors: np.ndarray
    visit_count: int = 0


def rotation_matrix(theta: float) -> np.ndarray:
    """2x2 rotation matrix [[cos, -sin], [sin, cos]]."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def gaussian_value(
    mean: tuple[float, float],
    log_scales: tuple[float, float],
    theta: float,
    point: tuple[float, float],
) -> float:
    """Evaluate exp(-1/2 d^T Sigma^-1 d) for Sigma = R S S^T R^T.

    The inverse covariance is applied in closed form by rotating the offset
    into the Gaussian frame; no matrix inversion. Scales below the renderer's
    0.3 px floor are clamped, matching the rasterized function.
    """
    sx = max(math.exp(log_scales[0]), SCALE_FLOOR)
    sy = max(math.exp(log_scales[1]), SCALE_FLOOR)
    dx = point[0] - mean[0]
    dy = point[1] - mean[1]
    c, s = math.cos(theta), math.sin(theta)
    ex = c * dx + s * dy
    ey = -s * dx + c * dy
    q = (ex / sx) ** 2 + (ey / sy) ** 2
    return math.exp(-0.5 * q)


def _derive(set_: GaussianSet, height: int, width: int) -> _DerivedParams:
    if not (
        np.isfinite(set_.means).all()
        and np.isfinite(set_.log_scales).all()
        and np.isfinite(set_.thetas).all()
        and np.isfinite(set_.colors).all()
    ):
        raise SplatError("non-finite Gaussian parameters passed to the renderer")
    raw_sx = np.exp(set_.log_scales[:, 0])
    raw_sy = np.exp(set_.log_scales[:, 1])
    sx = np.maximum(raw_sx, SCALE_FLOOR)
    sy = np.maximum(raw_sy, SCALE_FLOOR)
    radii = 3.0 * np.maximum(sx, sy)
    mx = set_.means[:, 0].copy()
    my = set_.means[:, 1].copy()

    # pixel centers sit at integer + 0.5; covered columns are
    # ceil(mx - r - 0.5) .. floor(mx + r - 0.5)
    c0 = np.clip(np.ceil(mx - radii - 0.5), 0, width - 1).astype(np.int64)
    c1 = np.clip(np.floor(mx + radii - 0.5), 0, width - 1).astype(np.int64)
    r0 = np.clip(np.ceil(my - radii - 0.5), 0, height - 1).astype(np.int64)
    r1 = np.clip(np.floor(my + radii - 0.5), 0, height - 1).astype(np.int64)
    visible = (
        (mx + radii >= 0.5)
        & (mx - radii <= width - 0.5)
        & (my + radii >= 0.5)
        & (my - radii <= height - 0.5)
        & (c0 <= c1)
        & (r0 <= r1)
    )
    n_tx = (width + _TILE_PX - 1) // _TILE_PX
    n_ty = (height + _TILE_PX - 1) // _TILE_PX
    tr0 = np.where(visible, r0 // _TILE_PX, -1)
    tr1 = r1 // _TILE_PX
    tc0 = c0 // _TILE_PX
    tc1 = c1 // _TILE_PX
    offsets, lists = _kernels.build_tile_lists(tr0, tr1, tc0, tc1, n_tx, n_ty)
    return _DerivedParams(
        mx=mx,
        my=my,
        u=1.0 / (sx * sx),
        v=1.0 / (sy * sy),
        cth=np.cos(set_.thetas),
        sth=np.sin(set_.thetas),
        colors=np.clip(set_.colors, 0.0, 1.0),
        floored_x=raw_sx < SCALE_FLOOR,
        floored_y=raw_sy < SCALE_FLOOR,
        px_c0=c0,
        px_c1=c1,
        px_r0=r0,
        px_r1=r1,
        offsets=offsets,
        lists=lists,
        n_tx=n_tx,
        n_ty=n_ty,
    )


def render(
    set_: GaussianSet, height: int, width: int, mode: str = "blend"
) -> RenderOutput:
    """Rasterize the set onto an (height, width) canvas.

    mode "blend" is the transmittance-weighted compositing described above;
    mode "sum" is plain weighted accumulation. Deterministic for any thread
    count.
    """
    if set_.count < 1:
        raise ValueError("cannot render an empty GaussianSet")
    if mode not in ("blend", "sum"):
        raise ValueError(f"unknown render mode: {mode!r}")
    d = _derive(set_, height, width)
    n_tiles = d.n_tx * d.n_ty
    n_blocks = max(1, (n_tiles + _TILES_PER_BLOCK - 1) // _TILES_PER_BLOCK)
    contrib, t_final, visits = _kernels.rasterize_forward(
        d.mx, d.my, d.u, d.v, d.cth, d.sth, d.colors,
        d.px_c0, d.px_c1, d.px_r0, d.px_r1,
        d.offsets, d.lists, d.n_tx, d.n_ty, height, width, mode == "blend",
        _TILES_PER_BLOCK, n_blocks,
    )
    return RenderOutput(
        image=np.clip(contrib, 0.0, 1.0),
        contrib=contrib,
        t_final=t_final,
        visit_count=int(visits.sum(dtype=np.int64)),
        mode=mode,
        height=height,
        width=width,
        derived=d,
    )


def backward(
    set_: GaussianSet, output: RenderOutput, d_loss_d_image: np.ndarray
) -> GradientSet:
    """Exact gradients of the scalar loss w.r.t. all Gaussian parameters.

    Honors the forward pass's bounding-box cutoff and early-termination set,
    the final image clamp (zero gradient where the composite left [0, 1]),
    the per-primitive color clamp, and the scale floor (zero log-scale
    gradient below it).
    """
    d = output.derived
    height, width = output.height, output.width
    if d_loss_d_image.shape != (height, width, 3):
        raise ValueError("d_loss_d_image shape mismatch with render output")
    grad_img = np.where(
        (output.contrib >= 0.0) & (output.contrib <= 1.0), d_loss_d_image, 0.0
    )
    n_tiles = d.n_tx * d.n_ty
    n_blocks = max(1, (n_tiles + _TILES_PER_BLOCK - 1) // _TILES_PER_BLOCK)
    grads, visits = _kernels.rasterize_backward(
        d.mx, d.my, d.u, d.v, d.cth, d.sth, d.colors,
        d.px_c0, d.px_c1, d.px_r0, d.px_r1,
        d.offsets, d.lists, d.n_tx, d.n_ty, height, width,
        output.mode == "blend",
        output.contrib, np.ascontiguousarray(grad_img),
        _TILES_PER_BLOCK, n_blocks, set_.count,
    )
    merged = grads.sum(axis=0)
    d_means = merged[:, 0:2].copy()
    d_log_scales = merged[:, 2:4].copy()
    d_log_scales[d.floored_x, 0] = 0.0
    d_log_scales[d.floored_y, 1] = 0.0
    d_thetas = merged[:, 4].copy()
    d_colors = merged[:, 5:8] * ((set_.colors >= 0.0) & (set_.colors <= 1.0))
    return GradientSet(
        d_means=d_means,
        d_log_scales=d_log_scales,
        d_thetas=d_thetas,
        d_colors=d_colors,
        visit_count=int(visits.sum(dtype=np.int64)),
    )
