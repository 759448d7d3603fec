"""Feature-aware initialization of Gaussian primitives.

Three stages: weight-proportional (multinomial) sampling inside each tile
with exponential-decay scales, exclusion-constrained uniform sampling with
KNN-derived scales, and Gaussian-weighted median color estimation at each
point's own scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import Budget, EncoderConfig, GaussianSet, ImageBuffer, SplatError
from .features import WeightMap, plan_tiles, gradient_magnitude, color_variance, sampling_weights


class InsufficientPointsError(SplatError):
    """KNN scale estimation needs more reference points than neighbors."""


@dataclass
class SamplePoint:
    """One initialization sample; position is (x, y) in pixels."""

    position: tuple[float, float]
    scale: float = 0.0
    origin_kind: str = "variational"
    weight: float | None = None
    degraded: bool = False


def _rng(seed: int, *key: int) -> np.random.Generator:
    # independent, reproducible streams per (seed, phase, index)
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def variational_sample_tile(
    weights: WeightMap,
    quota: int,
    s_base: float,
    rng: np.random.Generator,
) -> list[SamplePoint]:
    """Draw `quota` pixels with replacement, proportional to their weight.

    Positions are the sampled pixel centers in tile-local (x, y) coordinates.
    Each point gets the scale s_base * exp(-w/2), so heavily weighted pixels
    receive tighter Gaussians. A tile whose weights are identically zero
    falls back to uniform probability.
    """
    if quota < 0:
        raise ValueError("quota must be nonnegative")
    if quota == 0:
        return []
    w = weights.weights
    h, wd = w.shape
    total = w.sum()
    p = (w / total).ravel() if total > 0 else None
    flat = rng.choice(h * wd, size=quota, replace=True, p=p)
    rows, cols = np.divmod(flat, wd)
    out = []
    for r, c in zip(rows, cols):
        wx = float(w[r, c])
        out.append(
            SamplePoint(
                position=(c + 0.5, r + 0.5),
                scale=s_base * math.exp(-0.5 * wx),
                origin_kind="variational",
                weight=wx,
            )
        )
    return out


def to_global(points: list[SamplePoint], tile_origin: tuple[int, int]) -> list[SamplePoint]:
    """Shift tile-local positions by the tile's (row, col) image offset."""
    p_h, p_w = tile_origin
    for pt in points:
        x, y = pt.position
        pt.position = (x + p_w, y + p_h)
    return points


class _HashGrid:
    """Uniform spatial hash with cell size equal to the query radius."""

    def __init__(self, radius: float):
        self.radius = radius
        self.cells: dict[tuple[int, int], list[tuple[float, float]]] = {}

    def _cell(self, x: float, y: float) -> tuple[int, int]:
        return (int(x // self.radius), int(y // self.radius))

    def insert(self, x: float, y: float) -> None:
        self.cells.setdefault(self._cell(x, y), []).append((x, y))

    def min_dist_sq(self, x: float, y: float) -> float:
        # cell size == radius, so any point within radius sits in the 3x3
        # neighborhood of cells
        cx, cy = self._cell(x, y)
        best = math.inf
        for gx in (cx - 1, cx, cx + 1):
            for gy in (cy - 1, cy, cy + 1):
                for px, py in self.cells.get((gx, gy), ()):
                    d = (px - x) ** 2 + (py - y) ** 2
                    if d < best:
                        best = d
        return best


def uniform_sample_excluded(
    existing: list[SamplePoint],
    quota: int,
    r_excl: float,
    bounds: tuple[int, int],
    rng: np.random.Generator,
    max_attempts: int = 30,
) -> list[SamplePoint]:
    """Uniform positions keeping distance >= r_excl from all prior samples.

    Rejection sampling against a spatial hash seeded with the existing
    points; accepted points join the exclusion set. When the attempt budget
    for a point runs out, the attempted candidate with the largest
    nearest-neighbor distance is accepted and flagged degraded, so the
    returned count always equals the quota.
    """
    if r_excl <= 0:
        raise ValueError("r_excl must be positive")
    height, width = bounds
    grid = _HashGrid(r_excl)
    for pt in existing:
        grid.insert(*pt.position)
    r_sq = r_excl * r_excl
    out: list[SamplePoint] = []
    for _ in range(quota):
        best_pos = None
        best_d = -1.0
        accepted = False
        for _ in range(max_attempts):
            x = rng.random() * width
            y = rng.random() * height
            d = grid.min_dist_sq(x, y)
            if d >= r_sq:
                out.append(SamplePoint(position=(x, y), origin_kind="uniform"))
                grid.insert(x, y)
                accepted = True
                break
            if d > best_d:
                best_d = d
                best_pos = (x, y)
        if not accepted:
            out.append(
                SamplePoint(position=best_pos, origin_kind="uniform", degraded=True)
            )
            grid.insert(*best_pos)
    return out


def knn_scales(reference: np.ndarray, query_indices: np.ndarray, k: int) -> np.ndarray:
    """RMS distance from each query to its k nearest neighbors.

    Queries are members of the reference set, addressed by index so the
    point itself can be excluded exactly even when positions coincide.

    Raises:
        InsufficientPointsError: if the reference holds <= k points.
    """
    n = len(reference)
    if n <= k:
        raise InsufficientPointsError(
            f"need more than k={k} reference points, got {n}"
        )
    query_indices = np.asarray(query_indices, dtype=np.int64)
    if len(query_indices) == 0:
        return np.empty(0)
    tree = cKDTree(reference)
    dists, idxs = tree.query(reference[query_indices], k=k + 1)
    dists = np.atleast_2d(dists)
    idxs = np.atleast_2d(idxs)
    out = np.empty(len(query_indices))
    for j, self_idx in enumerate(query_indices):
        d, ix = dists[j], idxs[j]
        drop = np.nonzero(ix == self_idx)[0]
        if len(drop) == 0:
            # self crowded out by coincident points; any zero-distance entry
            # stands in for it
            drop = np.nonzero(d == 0.0)[0]
        keep = np.delete(d, drop[0]) if len(drop) else d[:-1]
        out[j] = math.sqrt(float(np.mean(keep * keep)))
    return out


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Smallest value whose cumulative weight reaches half the total.

    Minimizes sum_i w_i |z - v_i| over z; ties resolve to the smaller value.
    """
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    pick = np.searchsorted(cum, 0.5 * cum[-1])
    return float(values[order[min(pick, len(order) - 1)]])


def weighted_median_color(
    image: np.ndarray, center: tuple[float, float], scale: float
) -> np.ndarray:
    """Gaussian-weighted median color over a circular pixel neighborhood.

    Pixels whose centers lie within `scale` of the point are weighted by an
    isotropic Gaussian kernel with sigma equal to the scale; per channel the
    result is the smallest sample value whose cumulative weight reaches half
    the total. An empty neighborhood falls back to the nearest pixel.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    h, w = image.shape[:2]
    cx, cy = center
    r0 = max(0, math.ceil(cy - scale - 0.5))
    r1 = min(h - 1, math.floor(cy + scale - 0.5))
    c0 = max(0, math.ceil(cx - scale - 0.5))
    c1 = min(w - 1, math.floor(cx + scale - 0.5))
    if r0 > r1 or c0 > c1:
        rn = int(np.clip(round(cy - 0.5), 0, h - 1))
        cn = int(np.clip(round(cx - 0.5), 0, w - 1))
        return image[rn, cn].copy()
    ys, xs = np.mgrid[r0 : r1 + 1, c0 : c1 + 1]
    d_sq = (xs + 0.5 - cx) ** 2 + (ys + 0.5 - cy) ** 2
    mask = d_sq <= scale * scale
    if not mask.any():
        rn = int(np.clip(round(cy - 0.5), 0, h - 1))
        cn = int(np.clip(round(cx - 0.5), 0, w - 1))
        return image[rn, cn].copy()
    weights = np.exp(-d_sq[mask] / (2.0 * scale * scale))
    values = image[r0 : r1 + 1, c0 : c1 + 1][mask]  # (n, 3)
    out = np.empty(3)
    for ch in range(3):
        out[ch] = weighted_median(values[:, ch], weights)
    return out


def _variational_points(
    image: np.ndarray, budget: Budget, config: EncoderConfig
) -> list[SamplePoint]:
    plan = plan_tiles(
        image.shape[0], image.shape[1], config.tile_size, budget.n_vs, budget.n_us
    )
    points: list[SamplePoint] = []
    for idx, ((r, c), (th, tw)) in enumerate(zip(plan.origins, plan.extents)):
        quota = int(plan.quotas_vs[idx])
        if quota == 0:
            continue
        tile = image[r : r + th, c : c + tw]
        wmap = sampling_weights(
            gradient_magnitude(tile),
            color_variance(tile, config.variance_window),
            config.lambda_m,
        )
        local = variational_sample_tile(
            wmap, quota, budget.s_base, _rng(config.seed, 1, idx)
        )
        points.extend(to_global(local, (r, c)))
    return points


def _exclusion_radius(s_base: float, vs_points: list[SamplePoint]) -> float:
    if not vs_points:
        return s_base
    return max(s_base, float(np.median([p.scale for p in vs_points])))


def sample_points(
    image: np.ndarray, budget: Budget, config: EncoderConfig
) -> list[SamplePoint]:
    """Run the variational and uniform stages; scales set, colors not yet."""
    height, width = image.shape[:2]
    vs = _variational_points(image, budget, config)
    us = uniform_sample_excluded(
        vs,
        budget.n_us,
        _exclusion_radius(budget.s_base, vs),
        (height, width),
        _rng(config.seed, 2),
    )
    pts = vs + us
    if us:
        coords = np.array([p.position for p in pts])
        if len(pts) - 1 >= 1:
            k_eff = min(config.k_neighbors, len(pts) - 1)
            scales = knn_scales(coords, np.arange(len(vs), len(pts)), k_eff)
            for p, s in zip(us, scales):
                p.scale = float(s)
        else:
            us[0].scale = budget.s_base
    return pts


def initialize(image: ImageBuffer, budget: Budget, config: EncoderConfig) -> GaussianSet:
    """Build the initial GaussianSet: positions, scales, rotations, colors.

    Produces exactly budget.n_g primitives, variational points first (tile
    row-major order) then uniform points. Scales are stored isotropically in
    the log domain; rotation angles are drawn from [0, 1) and scaled by 2*pi;
    colors come from the weighted median at each point's own scale.
    """
    return _build_set(image, budget, config, variant="full")


def _build_set(
    image: ImageBuffer, budget: Budget, config: EncoderConfig, variant: str
) -> GaussianSet:
    if variant not in ("full", "scales", "means", "random"):
        raise ValueError(f"unknown init variant: {variant!r}")
    data = image.data
    height, width = image.height, image.width
    n = budget.n_g

    if variant == "random":
        rng_pos = _rng(config.seed, 4)
        means = np.column_stack(
            [rng_pos.random(n) * width, rng_pos.random(n) * height]
        )
        scales = np.full(n, budget.s_base)
    else:
        pts = sample_points(data, budget, config)
        means = np.array([p.position for p in pts], dtype=np.float64).reshape(n, 2)
        if variant == "means":
            scales = np.full(n, budget.s_base)
        else:
            scales = np.array([p.scale for p in pts], dtype=np.float64)

    if variant == "full":
        colors = np.empty((n, 3))
        for i in range(n):
            colors[i] = weighted_median_color(data, tuple(means[i]), float(scales[i]))
    else:
        colors = _rng(config.seed, 5).random((n, 3))

    thetas = _rng(config.seed, 3).random(n) * (2.0 * math.pi)
    log_scales = np.repeat(np.log(scales)[:, None], 2, axis=1)
    return GaussianSet(means=means, log_scales=log_scales, thetas=thetas, colors=colors)


def initialize_variant(
    image: ImageBuffer, budget: Budget, config: EncoderConfig, variant: str
) -> GaussianSet:
    """Ablation ladder: "random", "means" (+positions), "scales", "full"."""
    return _build_set(image, budget, config, variant)
