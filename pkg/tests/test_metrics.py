import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperem import metrics
from hyperem.hsdata import HyperspectralCube
from hyperem.testkit import brute_force_pearson, random_cube

# frozen golden constant: constant images 0.25 vs 0.5 under the fallback,
# (2*0.125 + 1e-4) / (0.3125 + 1e-4)
GOLDEN_CONST_SSIM = 0.8000639795265515


def cube_from(vals, mask=None):
    vals = np.asarray(vals, dtype=np.float32)
    return HyperspectralCube(400.0 + 10 * np.arange(vals.shape[2]), vals, mask)


class TestIdentities:
    def test_self_evaluation(self):
        c = random_cube(1, 6, 6, 4)
        report = metrics.evaluate(c, c)
        assert report.rmse == 0.0
        assert report.ssim == pytest.approx(1.0, abs=1e-12)
        # arccos near 1 amplifies rounding: |acos(1 - u)| <= sqrt(2u)
        assert report.sa_radians == pytest.approx(0.0, abs=1e-7)
        assert math.isinf(report.psnr_db)
        assert np.allclose(report.band_correlations, 1.0)
        assert report.masked_pixel_count == 0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            metrics.rmse(random_cube(0, 2, 2, 3), random_cube(0, 3, 3, 3))


class TestRmse:
    def test_hand_value(self):
        # one pixel, two bands, differences (1, 0) -> sqrt(1/2)
        a = cube_from(np.array([[[1.0, 0.5]]]))
        b = cube_from(np.array([[[0.0, 0.5]]]))
        assert metrics.rmse(a, b) == pytest.approx(math.sqrt(0.5), rel=1e-12)

    def test_symmetry(self):
        a, b = random_cube(2, 4, 4, 3), random_cube(3, 4, 4, 3)
        assert metrics.rmse(a, b) == metrics.rmse(b, a)

    def test_fully_masked_rejected(self):
        mask = np.zeros((2, 2), dtype=bool)
        a = cube_from(np.full((2, 2, 3), 0.5), mask)
        with pytest.raises(ValueError, match="valid"):
            metrics.rmse(a, a)


class TestSsim:
    def test_constant_fallback_golden(self):
        a = cube_from(np.full((4, 4, 1), 0.25))
        b = cube_from(np.full((4, 4, 1), 0.5))
        assert metrics.ssim(a, b) == pytest.approx(GOLDEN_CONST_SSIM, rel=1e-12)

    def test_windowed_matches_loop_oracle(self):
        rng = np.random.default_rng(4)
        h = w = 16
        x = rng.random((h, w)).astype(np.float64)
        y = np.clip(x + 0.05 * rng.standard_normal((h, w)), 0, 1)
        a = cube_from(x[:, :, None])
        b = cube_from(y[:, :, None])
        # independent path: explicit window slices, no convolution
        ax = np.arange(11) - 5.0
        g = np.exp(-(ax ** 2) / (2 * 1.5 ** 2))
        win = np.outer(g, g)
        win /= win.sum()
        c1, c2 = 0.01 ** 2, 0.03 ** 2
        xs = a.values[:, :, 0].astype(np.float64)
        ys = b.values[:, :, 0].astype(np.float64)
        vals = []
        for i in range(h - 10):
            for j in range(w - 10):
                px = xs[i:i + 11, j:j + 11]
                py = ys[i:i + 11, j:j + 11]
                mx, my = (win * px).sum(), (win * py).sum()
                vx = (win * px * px).sum() - mx * mx
                vy = (win * py * py).sum() - my * my
                cxy = (win * px * py).sum() - mx * my
                vals.append((2 * mx * my + c1) * (2 * cxy + c2)
                            / ((mx * mx + my * my + c1) * (vx + vy + c2)))
        assert metrics.ssim(a, b) == pytest.approx(np.mean(vals), rel=1e-10)

    def test_bounded_above_by_one(self):
        a, b = random_cube(5, 16, 16, 2), random_cube(6, 16, 16, 2)
        assert metrics.ssim(a, b) <= 1.0 + 1e-12

    def test_degrades_with_noise(self):
        rng = np.random.default_rng(7)
        base = rng.random((16, 16, 2))
        a = cube_from(base)
        small = cube_from(np.clip(base + 0.01 * rng.standard_normal(base.shape), 0, 1))
        large = cube_from(np.clip(base + 0.3 * rng.standard_normal(base.shape), 0, 1))
        assert metrics.ssim(a, small) > metrics.ssim(a, large)


class TestSpectralAngle:
    def test_orthogonal_spectra(self):
        a = cube_from(np.array([[[1.0, 0.0]]]))
        b = cube_from(np.array([[[0.0, 1.0]]]))
        assert metrics.spectral_angle(a, b) == pytest.approx(math.pi / 2, rel=1e-12)

    def test_scale_invariance(self):
        a = cube_from(np.array([[[0.8, 0.4, 0.2]]]))
        b = cube_from(np.array([[[0.4, 0.2, 0.1]]]))
        assert metrics.spectral_angle(a, b) == pytest.approx(0.0, abs=1e-7)

    def test_zero_norm_names_pixel(self):
        vals = np.full((2, 2, 3), 0.5)
        vals[1, 0] = 0.0
        a = cube_from(vals)
        b = cube_from(np.full((2, 2, 3), 0.5))
        with pytest.raises(ValueError, match=r"\(1, 0\)"):
            metrics.spectral_angle(a, b)


class TestPsnr:
    def test_20db(self):
        # uniform error 0.1 -> MSE 0.01 -> 20 dB at unit range
        a = cube_from(np.full((3, 3, 2), 0.6))
        b = cube_from(np.full((3, 3, 2), 0.5))
        assert metrics.psnr(a, b) == pytest.approx(20.0, rel=1e-6)

    def test_identical_is_inf(self):
        c = random_cube(8, 3, 3, 2)
        assert math.isinf(metrics.psnr(c, c))


class TestBandCorrelations:
    def test_matches_brute_force(self):
        a, b = random_cube(9, 5, 5, 3), random_cube(10, 5, 5, 3)
        got = metrics.band_correlations(a, b)
        for k in range(3):
            x = a.values[:, :, k].ravel().astype(np.float64)
            y = b.values[:, :, k].ravel().astype(np.float64)
            assert got[k] == pytest.approx(brute_force_pearson(x, y), abs=1e-9)

    def test_anticorrelated(self):
        x = np.linspace(0, 1, 9).reshape(3, 3)
        a = cube_from(x[:, :, None])
        b = cube_from((1 - x)[:, :, None])
        assert metrics.band_correlations(a, b)[0] == pytest.approx(-1.0)


class TestMaskInvariance:
    def test_masked_values_cannot_leak(self):
        mask = np.ones((4, 4), dtype=bool)
        mask[0, 0] = mask[3, 2] = False
        base = random_cube(11, 4, 4, 3)
        ref = HyperspectralCube(base.wavelengths_nm, base.values, mask)
        emu = random_cube(12, 4, 4, 3)
        tampered_vals = ref.values.copy()
        tampered_vals[0, 0] = 0.9
        tampered_vals[3, 2] = 0.1
        tampered = HyperspectralCube(ref.wavelengths_nm, tampered_vals, mask)
        for fn in (metrics.rmse, metrics.ssim, metrics.spectral_angle,
                   metrics.psnr):
            assert fn(ref, emu) == fn(tampered, emu)
        r1 = metrics.evaluate(ref, emu)
        assert r1.masked_pixel_count == 2


class TestThroughput:
    def test_smoke(self):
        calls = []
        result = metrics.throughput_bench(lambda m: calls.append(m),
                                          maps=[1, 2, 3], repeats=2)
        assert result["n_images"] == 3
        assert result["images_per_second"] > 0
        assert len(result["raw_seconds"]) == 2
        # one warm-up call on the first map plus 2 full passes
        assert len(calls) == 1 + 2 * 3

    def test_validation(self):
        with pytest.raises(ValueError):
            metrics.throughput_bench(lambda m: None, [], repeats=1)
        with pytest.raises(ValueError):
            metrics.throughput_bench(lambda m: None, [1], repeats=0)


class TestScatterExport:
    def test_csv_and_pearson(self, tmp_path):
        a, b = random_cube(13, 4, 4, 3), random_cube(14, 4, 4, 3)
        path = tmp_path / "scatter.csv"
        r = metrics.scatter_export(a, b, 1, path)
        x = a.values[:, :, 1].ravel().astype(np.float64)
        y = b.values[:, :, 1].ravel().astype(np.float64)
        assert r == pytest.approx(brute_force_pearson(x, y), abs=1e-9)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("#")
        assert "pearson_r=" in lines[0]
        assert lines[1] == "ref_value,emu_value"
        assert len(lines) == 2 + 16


class TestProperties:
    @settings(max_examples=30, deadline=None)
    @given(s1=st.integers(0, 2**32), s2=st.integers(0, 2**32),
           h=st.integers(1, 6), w=st.integers(1, 6), b=st.integers(1, 5))
    def test_rmse_and_sa_laws(self, s1, s2, h, w, b):
        a, c = random_cube(s1, h, w, b), random_cube(s2, h, w, b)
        r = metrics.rmse(a, c)
        assert 0.0 <= r <= 1.0 + 1e-12
        assert r == metrics.rmse(c, a)
        try:
            sa = metrics.spectral_angle(a, c)
        except ValueError:
            return  # zero-norm spectrum possible in random draws
        assert 0.0 <= sa <= math.pi / 2 + 1e-12
