import math

import numpy as np
import pytest

from splatzip.core import EncoderConfig, compute_budget
from splatzip.features import WeightMap
from splatzip.sampling import (
    InsufficientPointsError,
    SamplePoint,
    _exclusion_radius,
    initialize,
    initialize_variant,
    knn_scales,
    sample_points,
    to_global,
    uniform_sample_excluded,
    variational_sample_tile,
    weighted_median,
    weighted_median_color,
)
from splatzip.synth import constant_image, natural_image


def _wmap(w: np.ndarray) -> WeightMap:
    return WeightMap(weights=w, grad_norm=w, var_norm=w)


class TestVariationalSampling:
    def test_zero_quota(self):
        rng = np.random.default_rng(0)
        assert variational_sample_tile(_wmap(np.ones((4, 4))), 0, 2.0, rng) == []

    def test_delta_weight_concentrates_all_samples(self):
        w = np.zeros((6, 8))
        w[3, 5] = 1.0
        pts = variational_sample_tile(_wmap(w), 20, 2.0, np.random.default_rng(1))
        assert len(pts) == 20
        assert all(p.position == (5.5, 3.5) for p in pts)

    def test_exp_decay_scale(self):
        w = np.ones((2, 2))
        pts = variational_sample_tile(_wmap(w), 4, 2.0318, np.random.default_rng(2))
        for p in pts:
            assert p.scale == pytest.approx(1.2323, abs=1e-4)

    def test_zero_weights_fall_back_to_uniform(self):
        pts = variational_sample_tile(
            _wmap(np.zeros((5, 5))), 50, 1.0, np.random.default_rng(3)
        )
        assert len(pts) == 50
        assert len({p.position for p in pts}) > 1

    def test_scale_bounds_and_monotonicity(self):
        rng = np.random.default_rng(4)
        w = rng.random((16, 16))
        s_base = 3.0
        pts = variational_sample_tile(_wmap(w), 200, s_base, rng)
        lo = s_base * math.exp(-0.5)
        for p in pts:
            assert lo - 1e-12 <= p.scale <= s_base + 1e-12
        for a in pts[:50]:
            for b in pts[:50]:
                if a.weight > b.weight + 1e-12:
                    assert a.scale < b.scale


class TestToGlobal:
    @pytest.mark.parametrize(
        "local,origin,expected",
        [
            ((0.0, 0.0), (476, 0), (0.0, 476.0)),
            ((10.0, 20.0), (0, 0), (10.0, 20.0)),
            ((3.0, 4.0), (100, 200), (203.0, 104.0)),
        ],
    )
    def test_offset_addition(self, local, origin, expected):
        pt = SamplePoint(position=local)
        (got,) = to_global([pt], origin)
        assert got.position == expected


class TestExclusionSampling:
    def test_zero_quota(self):
        rng = np.random.default_rng(0)
        assert uniform_sample_excluded([], 0, 1.0, (64, 64), rng) == []

    def test_unconstrained_when_no_existing(self):
        rng = np.random.default_rng(1)
        pts = uniform_sample_excluded([], 32, 1e-6, (40, 60), rng)
        assert len(pts) == 32
        for p in pts:
            x, y = p.position
            assert 0 <= x < 60 and 0 <= y < 40
            assert not p.degraded

    def test_exclusion_distance_holds(self):
        rng = np.random.default_rng(2)
        existing = [
            SamplePoint(position=(float(x), float(y)))
            for x in range(5, 60, 10)
            for y in range(5, 60, 10)
        ]
        r = 4.0
        pts = uniform_sample_excluded(existing, 25, r, (64, 64), rng)
        assert len(pts) == 25
        coords = [p.position for p in existing]
        for p in pts:
            if p.degraded:
                continue
            dmin = min(math.dist(p.position, c) for c in coords)
            assert dmin >= r

    def test_graceful_degradation_keeps_count(self):
        # radius far larger than the canvas leaves no room: everything after
        # the first accept degrades but the count is preserved
        rng = np.random.default_rng(3)
        pts = uniform_sample_excluded([], 10, 500.0, (16, 16), rng)
        assert len(pts) == 10
        assert sum(p.degraded for p in pts) >= 8

    def test_exclusion_radius_rule(self):
        vs = [SamplePoint(position=(0, 0), scale=s) for s in (1.0, 1.5, 3.0)]
        assert _exclusion_radius(2.0, vs) == 2.0
        assert _exclusion_radius(1.0, vs) == 1.5
        assert _exclusion_radius(2.5, []) == 2.5


class TestKnnScales:
    def test_spec_distances_1_2_2(self):
        ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [-2.0, 0.0]])
        s = knn_scales(ref, np.array([0]), k=3)
        assert s[0] == pytest.approx(math.sqrt(3.0))

    def test_constant_distance_neighbors(self):
        d = 2.5
        ref = np.array([[0.0, 0.0], [d, 0.0], [-d, 0.0], [0.0, d]])
        s = knn_scales(ref, np.array([0]), k=3)
        assert s[0] == pytest.approx(d)

    def test_unit_grid_k1(self):
        xs, ys = np.mgrid[0:5, 0:5]
        ref = np.column_stack([xs.ravel(), ys.ravel()]).astype(float)
        s = knn_scales(ref, np.arange(len(ref)), k=1)
        np.testing.assert_allclose(s, 1.0)

    def test_insufficient_points(self):
        with pytest.raises(InsufficientPointsError):
            knn_scales(np.zeros((3, 2)), np.array([0]), k=3)

    def test_coincident_points(self):
        # three stacked points: each sees the other two at distance zero
        ref = np.array([[1.0, 1.0]] * 3 + [[5.0, 1.0]])
        s = knn_scales(ref, np.array([0, 1, 2]), k=2)
        np.testing.assert_allclose(s, 0.0)

    def test_bruteforce_equivalence(self):
        rng = np.random.default_rng(9)
        for trial in range(5):
            n = int(rng.integers(10, 200))
            k = int(rng.integers(1, 6))
            ref = rng.uniform(0, 100, (n, 2))
            queries = rng.choice(n, size=min(n, 40), replace=False)
            got = knn_scales(ref, queries, k)
            d2 = ((ref[:, None, :] - ref[None, :, :]) ** 2).sum(-1)
            for j, qi in enumerate(queries):
                row = np.delete(d2[qi], qi)
                expect = math.sqrt(np.mean(np.sort(row)[:k]))
                assert got[j] == pytest.approx(expect, rel=1e-6)


class TestWeightedMedian:
    def test_cumulative_rule(self):
        v = np.array([1.0, 2.0, 3.0])
        w = np.array([1.0, 1.0, 3.0])
        assert weighted_median(v, w) == 3.0

    def test_singleton_neighborhood(self):
        img = np.zeros((5, 5, 3))
        img[2, 2] = (0.1, 0.5, 0.9)
        c = weighted_median_color(img, (2.5, 2.5), 0.6)
        np.testing.assert_allclose(c, (0.1, 0.5, 0.9))

    def test_constant_neighborhood(self):
        img = np.full((9, 9, 3), 0.42)
        np.testing.assert_allclose(weighted_median_color(img, (4.0, 4.0), 3.0), 0.42)

    def test_empty_neighborhood_falls_back_to_nearest(self):
        img = np.zeros((4, 4, 3))
        img[1, 2] = 0.8
        c = weighted_median_color(img, (2.4, 1.6), 0.05)
        np.testing.assert_allclose(c, 0.8)

    def test_bruteforce_argmin_equivalence(self):
        rng = np.random.default_rng(21)
        for trial in range(40):
            h, w = rng.integers(3, 8, 2)
            img = rng.random((h, w, 3))
            cx = rng.uniform(0.5, w - 0.5)
            cy = rng.uniform(0.5, h - 0.5)
            scale = rng.uniform(0.8, 2.5)
            got = weighted_median_color(img, (cx, cy), scale)
            vals, wts = [], []
            for r in range(h):
                for c in range(w):
                    d2 = (c + 0.5 - cx) ** 2 + (r + 0.5 - cy) ** 2
                    if d2 <= scale * scale:
                        vals.append(img[r, c])
                        wts.append(math.exp(-d2 / (2 * scale * scale)))
            if not vals:
                continue
            vals = np.array(vals)
            wts = np.array(wts)
            for ch in range(3):
                costs = [
                    (np.sum(wts * np.abs(z - vals[:, ch])), z)
                    for z in vals[:, ch]
                ]
                best = min(costs)[0]
                assert np.sum(wts * np.abs(got[ch] - vals[:, ch])) == pytest.approx(
                    best, abs=1e-12
                )


class TestInitialize:
    def test_count_exactness_small(self):
        img = natural_image(80, 64, seed=5)
        budget = compute_budget(80, 64, 30, 0.7)
        cfg = EncoderConfig(seed=3, tile_size=48)
        s = initialize(img, budget, cfg)
        assert s.count == budget.n_g

    def test_constant_gray_image(self):
        img = constant_image(40, 40, 0.5)
        budget = compute_budget(40, 40, 40, 0.7)
        cfg = EncoderConfig(seed=1)
        s = initialize(img, budget, cfg)
        np.testing.assert_allclose(s.colors, 0.5)
        # zero weights everywhere: every variational scale equals s_base
        vs_scales = np.exp(s.log_scales[: budget.n_vs, 0])
        np.testing.assert_allclose(vs_scales, budget.s_base)

    def test_all_variational_skips_uniform(self):
        img = natural_image(48, 48, seed=6)
        budget = compute_budget(48, 48, 30, 1.0)
        assert budget.n_us == 0
        s = initialize(img, budget, EncoderConfig(seed=2))
        assert s.count == budget.n_g == budget.n_vs

    def test_determinism(self):
        img = natural_image(56, 72, seed=7)
        budget = compute_budget(56, 72, 25, 0.7)
        cfg = EncoderConfig(seed=9, tile_size=32)
        a = initialize(img, budget, cfg)
        b = initialize(img, budget, cfg)
        assert np.array_equal(a.means, b.means)
        assert np.array_equal(a.log_scales, b.log_scales)
        assert np.array_equal(a.thetas, b.thetas)
        assert np.array_equal(a.colors, b.colors)

    def test_thetas_span_full_circle(self):
        img = natural_image(64, 64, seed=8)
        budget = compute_budget(64, 64, 10, 0.7)
        s = initialize(img, budget, EncoderConfig(seed=4))
        assert s.thetas.min() >= 0.0
        assert s.thetas.max() < 2 * math.pi
        assert s.thetas.max() > math.pi  # spans beyond [0, pi)

    def test_sample_points_origin_split(self):
        img = natural_image(64, 64, seed=9)
        budget = compute_budget(64, 64, 25, 0.7)
        pts = sample_points(img.data, budget, EncoderConfig(seed=5))
        kinds = [p.origin_kind for p in pts]
        assert kinds.count("variational") == budget.n_vs
        assert kinds.count("uniform") == budget.n_us

    def test_variant_ladder_shapes(self):
        img = natural_image(48, 48, seed=10)
        budget = compute_budget(48, 48, 40, 0.7)
        cfg = EncoderConfig(seed=6)
        for variant in ("random", "means", "scales", "full"):
            s = initialize_variant(img, budget, cfg, variant)
            assert s.count == budget.n_g
        with pytest.raises(ValueError):
            initialize_variant(img, budget, cfg, "bogus")

    def test_means_variant_uses_base_scale(self):
        img = natural_image(48, 48, seed=11)
        budget = compute_budget(48, 48, 40, 0.7)
        s = initialize_variant(img, budget, EncoderConfig(seed=7), "means")
        np.testing.assert_allclose(np.exp(s.log_scales), budget.s_base)
