import numpy as np
import pytest

from hyperem import classical as cl
from hyperem.hsdata import ParameterMap
from hyperem.synthrtm import PARAM_RANGES, forward_batch, BandGrid


def toy_spectra(n=40, b=12, seed=0):
    rng = np.random.default_rng(seed)
    return rng.random((n, b))


class TestPca:
    def test_hand_eigendecomposition(self):
        # four points on the axes: cov = diag(0.5, 0.005), eigvecs are the axes
        x = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 0.1], [0.0, -0.1]])
        model = cl.pca_fit(x, 2)
        assert np.allclose(model.mean_spectrum, 0.0)
        assert np.allclose(model.eigenvalues, [0.5, 0.005])
        assert abs(model.components[0]) @ np.array([1.0, 0.0]) == pytest.approx(1.0)
        assert abs(model.components[1]) @ np.array([0.0, 1.0]) == pytest.approx(1.0)
        assert np.allclose(model.explained_ratio, [0.5 / 0.505, 1.0])

    def test_components_orthonormal(self):
        model = cl.pca_fit(toy_spectra(), 5)
        gram = model.components @ model.components.T
        assert np.allclose(gram, np.eye(5), atol=1e-10)

    def test_full_rank_round_trip(self):
        x = toy_spectra(30, 8)
        model = cl.pca_fit(x, 8)
        back = cl.pca_reconstruct(model, cl.pca_project(model, x))
        assert np.abs(back - x).max() < 1e-9

    def test_truncation_error_decreases(self):
        x = toy_spectra(50, 10, seed=3)
        errs = []
        for m in (1, 3, 6, 10):
            model = cl.pca_fit(x, m)
            back = cl.pca_reconstruct(model, cl.pca_project(model, x))
            errs.append(((back - x) ** 2).mean())
        assert all(a >= b - 1e-15 for a, b in zip(errs, errs[1:]))

    def test_surrogate_spectra_low_dimensional(self):
        # smooth physics-driven spectra compress hard: two components suffice
        rng = np.random.default_rng(7)
        lo = np.array([r[0] for r in PARAM_RANGES])
        hi = np.array([r[1] for r in PARAM_RANGES])
        params = lo + (hi - lo) * rng.random((500, 6))
        spectra = forward_batch(params, BandGrid())
        model = cl.pca_fit(spectra, 4)
        assert model.explained_ratio[1] > 0.9
        assert model.explained_ratio[3] > 0.995

    def test_invalid_component_count(self):
        with pytest.raises(ValueError):
            cl.pca_fit(toy_spectra(5, 8), 6)


class TestKrr:
    def test_small_regularizer_interpolates(self):
        rng = np.random.default_rng(1)
        x = rng.random((12, 2))
        y = rng.random((12, 3))
        model = cl.krr_fit(x, y, 1e-10)
        assert np.abs(cl.krr_predict(model, x) - y).max() < 1e-4

    def test_large_regularizer_shrinks_to_zero(self):
        rng = np.random.default_rng(2)
        x = rng.random((10, 2))
        y = rng.random((10, 1))
        model = cl.krr_fit(x, y, 1e8)
        assert np.abs(cl.krr_predict(model, x)).max() < 1e-5

    def test_two_point_closed_form_midpoint(self):
        # two symmetric points, unit lengthscale: the 2x2 system solves by hand,
        # pred(0) = (y1 + y2) * exp(-1/2) / (1 + exp(-2))
        x = np.array([[-1.0], [1.0]])
        y = np.array([[0.0], [2.0]])
        model = cl.krr_fit(x, y, 1e-10, lengthscale=1.0)
        pred = cl.krr_predict(model, np.array([[0.0]]))
        expected = 2.0 * np.exp(-0.5) / (1.0 + np.exp(-2.0))
        assert pred[0, 0] == pytest.approx(expected, abs=1e-8)

    def test_standardization_invariance(self):
        # per-dimension affine rescaling of inputs leaves predictions unchanged
        rng = np.random.default_rng(3)
        x = rng.random((15, 3))
        y = rng.random((15, 2))
        q = rng.random((4, 3))
        scale = np.array([100.0, 0.01, 7.0])
        shift = np.array([-5.0, 40.0, 0.3])
        a = cl.krr_predict(cl.krr_fit(x, y, 1e-6), q)
        b = cl.krr_predict(cl.krr_fit(x * scale + shift, y, 1e-6),
                           q * scale + shift)
        assert np.allclose(a, b, atol=1e-8)

    def test_nonpositive_regularizer(self):
        with pytest.raises(ValueError):
            cl.krr_fit(np.zeros((3, 1)), np.zeros((3, 1)), 0.0)

    def test_median_lengthscale(self):
        x = np.array([[0.0], [1.0], [3.0]])
        # pairwise distances 1, 2, 3 -> median 2
        assert cl.median_lengthscale(x) == 2.0
        assert cl.median_lengthscale(np.zeros((3, 1))) == 1.0


class TestGpr:
    def test_noiseless_interpolation(self):
        rng = np.random.default_rng(4)
        x = rng.random((10, 2))
        y = rng.random((10, 2))
        model = cl.gpr_fit(x, y, 0.0)
        mean, var = cl.gpr_predict(model, x)
        assert np.abs(mean - y).max() < 1e-4
        assert var.max() < 1e-4

    def test_prior_reversion_far_from_data(self):
        rng = np.random.default_rng(5)
        x = rng.random((8, 2))
        y = rng.random((8, 1)) + 5.0
        model = cl.gpr_fit(x, y, 0.01)
        far = np.full((1, 2), 1e6)
        mean, var = cl.gpr_predict(model, far)
        assert abs(mean[0, 0]) < 1e-6          # prior mean zero
        assert var[0, 0] == pytest.approx(1.01, abs=1e-6)

    def test_mean_matches_krr_same_regularizer(self):
        rng = np.random.default_rng(6)
        x = rng.random((12, 3))
        y = rng.random((12, 2))
        gpr = cl.gpr_fit(x, y, 1e-3, lengthscale=0.8)
        krr = cl.krr_fit(x, y, 1e-3, lengthscale=0.8)
        q = rng.random((5, 3))
        mean, _ = cl.gpr_predict(gpr, q)
        assert np.allclose(mean, cl.krr_predict(krr, q), atol=1e-8)

    def test_subset_cap(self):
        rng = np.random.default_rng(7)
        x = rng.random((50, 2))
        y = rng.random((50, 1))
        model = cl.gpr_fit(x, y, 1e-4, subset_cap=20)
        assert model.training_inputs.shape[0] == 20

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError):
            cl.gpr_fit(np.zeros((3, 1)), np.zeros((3, 1)), -1.0)


class TestMlp:
    def test_build_deterministic(self):
        a = cl.build_mlp(6, 24, hidden=(8, 8), seed=3)
        b = cl.build_mlp(6, 24, hidden=(8, 8), seed=3)
        for pa, pb in zip(a.net.params(), b.net.params()):
            assert np.array_equal(pa, pb)

    def test_different_seed_differs(self):
        a = cl.build_mlp(6, 24, hidden=(8,), seed=0)
        b = cl.build_mlp(6, 24, hidden=(8,), seed=1)
        assert not np.array_equal(a.net.params()[0], b.net.params()[0])

    def test_zero_epochs_keeps_init(self):
        model = cl.build_mlp(2, 3, hidden=(4,), seed=0)
        before = [p.copy() for p in model.net.params()]
        cl.mlp_train(model, np.random.default_rng(0).random((10, 2)),
                     np.random.default_rng(1).random((10, 3)), epochs=0)
        for p, q in zip(model.net.params(), before):
            assert np.array_equal(p, q)

    def test_overfits_tiny_dataset(self):
        rng = np.random.default_rng(8)
        x = rng.random((16, 2))
        y = 0.5 + 0.3 * np.sin(6 * x[:, :1]) * x[:, 1:]
        model = cl.build_mlp(2, 1, hidden=(32, 32), seed=0)

        def mse():
            return float(((model.net.forward(x) - y) ** 2).mean())

        loss0 = mse()
        cl.mlp_train(model, x, y, epochs=2000, seed=0, batch_size=16)
        assert mse() < loss0 / 10.0

    def test_predict_clamped(self):
        model = cl.build_mlp(2, 3, hidden=(4,), seed=0)
        # force outputs out of range via the final bias
        model.net.params()[-1][...] = 50.0
        pred = cl.mlp_predict(model, np.zeros((2, 2)))
        assert pred.min() >= 0.0 and pred.max() <= 1.0

    def test_range_normalization_applied(self):
        model = cl.build_mlp(2, 1, hidden=(4,), seed=0)
        model.input_ranges = ((0.0, 100.0), (0.0, 1.0))
        a = cl.mlp_predict(model, np.array([[50.0, 0.5]]))
        plain = cl.build_mlp(2, 1, hidden=(4,), seed=0)
        b = plain.net.forward(np.array([[0.5, 0.5]]))
        assert np.allclose(a, np.clip(b, 0, 1))


class TestPipelines:
    def test_emulate_classical_shape_and_range(self):
        rng = np.random.default_rng(9)
        x = rng.random((30, 2))
        spectra = rng.random((30, 5))
        model = cl.fit_pca_krr(x, spectra, n_components=2)
        pmap = ParameterMap(("a", "b"), ((0, 1), (0, 1)),
                            rng.random((4, 3, 2)).astype(np.float32))
        cube = cl.emulate_classical(model, pmap, 400.0 + 10 * np.arange(5))
        assert cube.values.shape == (4, 3, 5)
        assert cube.values.min() >= 0.0 and cube.values.max() <= 1.0

    def test_fit_pca_gpr_self_prediction(self):
        rng = np.random.default_rng(10)
        x = rng.random((40, 3))
        spectra = rng.random((40, 6))
        model = cl.fit_pca_gpr(x, spectra, n_components=6, noise_var=1e-8)
        pred = cl.predict_spectra(model, x)
        # near-noiseless GPR through a full-rank PCA reproduces the training
        # spectra up to kernel-system conditioning
        assert np.abs(pred - np.clip(spectra, 0, 1)).max() < 2e-2

    def test_predict_spectra_rejects_unknown(self):
        with pytest.raises(TypeError):
            cl.predict_spectra(object(), np.zeros((1, 2)))

    def test_hyperparam_grid(self):
        assert cl.HYPERPARAM_GRID[0] == 1e-8
        assert cl.HYPERPARAM_GRID[-1] == 1e-1
        assert len(cl.HYPERPARAM_GRID) == 8
