import numpy as np
import pytest

from splatzip.metrics import (
    C1,
    C2,
    MSSSIM_WEIGHTS,
    ImageTooSmallError,
    evaluate,
    gaussian_window,
    ms_ssim,
    psnr,
    ssim,
)


def naive_ssim(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Sliding-window reference: explicit 2D window per valid position."""
    k1 = gaussian_window()
    win = np.outer(k1, k1)
    n = win.shape[0]
    h, w = a.shape[:2]
    s_vals, cs_vals = [], []
    for ch in range(3):
        x, y = a[:, :, ch], b[:, :, ch]
        for r in range(h - n + 1):
            for c in range(w - n + 1):
                wx = x[r : r + n, c : c + n]
                wy = y[r : r + n, c : c + n]
                mx = (win * wx).sum()
                my = (win * wy).sum()
                sx = (win * wx * wx).sum() - mx * mx
                sy = (win * wy * wy).sum() - my * my
                sxy = (win * wx * wy).sum() - mx * my
                cs = (2 * sxy + C2) / (sx + sy + C2)
                lum = (2 * mx * my + C1) / (mx * mx + my * my + C1)
                s_vals.append(lum * cs)
                cs_vals.append(cs)
    return float(np.mean(s_vals)), float(np.mean(cs_vals))


def naive_ms_ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Independent MS-SSIM reference built on the naive window sweep."""
    result = 1.0
    for lvl, weight in enumerate(MSSSIM_WEIGHTS):
        s_val, cs_val = naive_ssim(a, b)
        if lvl < len(MSSSIM_WEIGHTS) - 1:
            result *= max(cs_val, 0.0) ** weight
            h2, w2 = a.shape[0] // 2, a.shape[1] // 2
            a = 0.25 * (
                a[: 2 * h2 : 2, : 2 * w2 : 2]
                + a[1 : 2 * h2 : 2, : 2 * w2 : 2]
                + a[: 2 * h2 : 2, 1 : 2 * w2 : 2]
                + a[1 : 2 * h2 : 2, 1 : 2 * w2 : 2]
            )
            b = 0.25 * (
                b[: 2 * h2 : 2, : 2 * w2 : 2]
                + b[1 : 2 * h2 : 2, : 2 * w2 : 2]
                + b[: 2 * h2 : 2, 1 : 2 * w2 : 2]
                + b[1 : 2 * h2 : 2, 1 : 2 * w2 : 2]
            )
        else:
            result *= max(s_val, 0.0) ** weight
    return result


class TestPsnr:
    def test_identical_caps_at_99(self, img64):
        assert psnr(img64, img64) == 99.0

    def test_uniform_error_point_one(self):
        a = np.full((8, 8, 3), 0.5)
        b = np.full((8, 8, 3), 0.6)
        assert psnr(a, b) == pytest.approx(20.0)

    def test_black_vs_white(self):
        a = np.zeros((8, 8, 3))
        b = np.ones((8, 8, 3))
        assert psnr(a, b) == pytest.approx(0.0)

    def test_symmetry(self, img64):
        rng = np.random.default_rng(0)
        other = np.clip(img64.data + rng.normal(0, 0.1, img64.data.shape), 0, 1)
        assert psnr(img64, other) == pytest.approx(psnr(other, img64))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4, 3)), np.zeros((5, 4, 3)))


class TestSsim:
    def test_identical_is_one(self, img64):
        assert ssim(img64, img64) == pytest.approx(1.0)

    def test_inverted_binary_is_negative(self):
        rng = np.random.default_rng(1)
        a = (rng.random((32, 32, 3)) > 0.5).astype(float)
        assert ssim(a, 1.0 - a) < 0.0

    def test_symmetry(self, img64):
        rng = np.random.default_rng(2)
        other = np.clip(img64.data + rng.normal(0, 0.15, img64.data.shape), 0, 1)
        assert ssim(img64, other) == pytest.approx(ssim(other, img64), rel=1e-12)

    def test_too_small(self):
        with pytest.raises(ImageTooSmallError):
            ssim(np.zeros((10, 16, 3)), np.zeros((10, 16, 3)))

    def test_matches_naive_reference(self):
        rng = np.random.default_rng(3)
        a = rng.random((20, 18, 3))
        b = np.clip(a + rng.normal(0, 0.2, a.shape), 0, 1)
        got = ssim(a, b)
        expect, _ = naive_ssim(a, b)
        assert got == pytest.approx(expect, abs=1e-6)

    def test_bounds(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            a = rng.random((16, 16, 3))
            b = rng.random((16, 16, 3))
            v = ssim(a, b)
            assert -1.0 <= v <= 1.0


class TestMsSsim:
    def test_identical_is_one(self):
        a = np.random.default_rng(5).random((180, 180, 3))
        assert ms_ssim(a, a) == pytest.approx(1.0)

    def test_too_small(self):
        a = np.zeros((64, 64, 3))
        with pytest.raises(ImageTooSmallError):
            ms_ssim(a, a)

    def test_matches_independent_reference(self):
        rng = np.random.default_rng(6)
        base = rng.random((180, 176, 3))
        noisy = np.clip(base + rng.normal(0, 0.1, base.shape), 0, 1)
        got = ms_ssim(base, noisy)
        expect = naive_ms_ssim(base, noisy)
        assert got == pytest.approx(expect, abs=1e-4)
        assert 0.0 <= got <= 1.0


class TestEvaluate:
    def test_fallback_on_small_images(self, img64):
        report = evaluate(img64, img64)
        assert report.ms_ssim is None
        assert report.psnr == 99.0
        assert report.ssim == pytest.approx(1.0)

    def test_full_report(self):
        a = np.random.default_rng(7).random((176, 176, 3))
        report = evaluate(a, a)
        assert report.ms_ssim == pytest.approx(1.0)
