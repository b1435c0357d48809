"""Classical emulation baselines: PCA dimensionality reduction with KRR or GPR
regression over principal components, and a direct MLP spectrum regressor.

All baselines operate at the spectral level: one parameter vector in, one
spectrum out, applied per pixel when emulating a cube.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import pdist

from . import nnkernels as nk
from . import schedules
from .hsdata import HyperspectralCube, ParameterMap, Spectrum
from .layers import Dense, ReLU, Sequential

DEFAULT_COMPONENTS = 2
GPR_SUBSET_CAP = 3000
HYPERPARAM_GRID = tuple(10.0 ** e for e in range(-8, 0))  # candidate lambda / sigma^2


# ---------------------------------------------------------------- PCA

@dataclass(frozen=True)
class PcaModel:
    mean_spectrum: np.ndarray     # (B,)
    components: np.ndarray        # (M, B), orthonormal rows
    eigenvalues: np.ndarray       # (M,), descending
    explained_ratio: np.ndarray   # cumulative variance-explained per component

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def pca_fit(spectra: np.ndarray, n_components: int) -> PcaModel:
    x = np.asarray(spectra, dtype=np.float64)
    n, b = x.shape
    if not (1 <= n_components <= min(n, b)):
        raise ValueError(f"need 1 <= M <= min(n, B); got M={n_components}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / n
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    total = eigvals.sum()
    cum = np.cumsum(eigvals[:n_components]) / total if total > 0 else np.ones(n_components)
    return PcaModel(mean, eigvecs[:, :n_components].T.copy(),
                    eigvals[:n_components].copy(), cum)


def pca_project(model: PcaModel, x: np.ndarray) -> np.ndarray:
    return (np.atleast_2d(x) - model.mean_spectrum) @ model.components.T


def pca_reconstruct(model: PcaModel, coeffs: np.ndarray) -> np.ndarray:
    return model.mean_spectrum + np.atleast_2d(coeffs) @ model.components


# ---------------------------------------------------------------- kernels

def _rbf(a: np.ndarray, b: np.ndarray, lengthscale: float) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (2.0 * lengthscale ** 2))


def median_lengthscale(x: np.ndarray) -> float:
    d = pdist(x)
    d = d[d > 0]
    return float(np.median(d)) if d.size else 1.0


@dataclass
class KernelModel:
    kind: str                      # "krr" or "gpr"
    training_inputs: np.ndarray    # standardized, (n, P)
    dual_coefficients: np.ndarray  # (n, M)
    lengthscale: float
    regularizer: float             # lambda (KRR) or sigma^2 (GPR)
    input_mean: np.ndarray
    input_std: np.ndarray
    chol: tuple | None = None      # cached Cholesky factor for GPR variance

    def standardize(self, y: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(y) - self.input_mean) / self.input_std


def _standardize_fit(x: np.ndarray):
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (x - mean) / std, mean, std


def krr_fit(inputs: np.ndarray, targets: np.ndarray, regularizer: float,
            lengthscale: float | None = None) -> KernelModel:
    if regularizer <= 0:
        raise ValueError("regularizer must be positive")
    x = np.asarray(inputs, dtype=np.float64)
    c = np.atleast_2d(np.asarray(targets, dtype=np.float64).T).T
    xs, mean, std = _standardize_fit(x)
    ell = median_lengthscale(xs) if lengthscale is None else float(lengthscale)
    k = _rbf(xs, xs, ell)
    k[np.diag_indices_from(k)] += regularizer
    try:
        factor = cho_factor(k, lower=True)
    except np.linalg.LinAlgError as e:
        raise np.linalg.LinAlgError(
            "kernel system not positive definite; raise the regularizer") from e
    alpha = cho_solve(factor, c)
    return KernelModel("krr", xs, alpha, ell, regularizer, mean, std)


def krr_predict(model: KernelModel, y: np.ndarray) -> np.ndarray:
    k_star = _rbf(model.standardize(y), model.training_inputs, model.lengthscale)
    return k_star @ model.dual_coefficients


def gpr_fit(inputs: np.ndarray, targets: np.ndarray, noise_var: float,
            lengthscale: float | None = None,
            subset_cap: int = GPR_SUBSET_CAP) -> KernelModel:
    if noise_var < 0:
        raise ValueError("noise variance must be nonnegative")
    x = np.asarray(inputs, dtype=np.float64)[:subset_cap]
    c = np.atleast_2d(np.asarray(targets, dtype=np.float64).T).T[:subset_cap]
    xs, mean, std = _standardize_fit(x)
    ell = median_lengthscale(xs) if lengthscale is None else float(lengthscale)
    k = _rbf(xs, xs, ell)
    k[np.diag_indices_from(k)] += noise_var
    # tiny jitter keeps the noiseless case factorable
    k[np.diag_indices_from(k)] += 1e-12
    try:
        factor = cho_factor(k, lower=True)
    except np.linalg.LinAlgError as e:
        raise np.linalg.LinAlgError(
            "Cholesky failed; raise the noise variance") from e
    alpha = cho_solve(factor, c)
    model = KernelModel("gpr", xs, alpha, ell, noise_var, mean, std)
    model.chol = factor
    return model


def gpr_predict(model: KernelModel, y: np.ndarray):
    ys = model.standardize(y)
    k_star = _rbf(ys, model.training_inputs, model.lengthscale)
    mean = k_star @ model.dual_coefficients
    if model.chol is not None:
        v = cho_solve(model.chol, k_star.T)
        var = 1.0 + model.regularizer - (k_star * v.T).sum(axis=1)
    else:
        var = np.full(ys.shape[0], 1.0 + model.regularizer)
    var = np.maximum(var, 0.0)
    return mean, np.repeat(var[:, None], mean.shape[1], axis=1)


# ---------------------------------------------------------------- MLP

DEFAULT_HIDDEN = (256, 512)


@dataclass
class MlpModel:
    net: Sequential
    n_inputs: int
    n_outputs: int
    hidden: tuple = DEFAULT_HIDDEN
    input_ranges: tuple | None = None  # set when trained on range-normalized inputs


def build_mlp(n_inputs: int, n_outputs: int, hidden=DEFAULT_HIDDEN,
              seed: int = 0) -> MlpModel:
    sizes = [n_inputs, *hidden, n_outputs]
    layers = []
    for i in range(len(sizes) - 1):
        layers.append(Dense(sizes[i], sizes[i + 1], seed=seed, index=i))
        if i < len(sizes) - 2:
            layers.append(ReLU())
    return MlpModel(Sequential(layers), n_inputs, n_outputs, tuple(hidden))


def mlp_train(model: MlpModel, inputs: np.ndarray, targets: np.ndarray,
              epochs: int, seed: int = 0, batch_size: int = 64) -> MlpModel:
    """Mean-squared-error training with Adam and the exponential-reset LR schedule."""
    x = np.asarray(inputs, dtype=np.float64)
    if model.input_ranges:
        x = x.copy()
        for p, (lo, hi) in enumerate(model.input_ranges):
            x[:, p] = (x[:, p] - lo) / (hi - lo)
    t = np.asarray(targets, dtype=np.float64)
    params = model.net.params()
    state = nk.AdamState.for_params(params)
    rng = np.random.default_rng(seed)
    n = x.shape[0]
    for epoch in range(epochs):
        lr = schedules.lr_at(epoch)
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb, tb = x[idx], t[idx]
            model.net.zero_grads()
            pred = model.net.forward(xb)
            err = pred - tb
            loss = float((err * err).mean())
            if not np.isfinite(loss):
                raise nk.DivergenceError("MLP loss diverged")
            model.net.backward(2.0 * err / err.size)
            nk.adam_step(params, model.net.grads(), state, lr)
    return model


def mlp_predict(model: MlpModel, inputs: np.ndarray) -> np.ndarray:
    """Linear outputs clamped to valid reflectance at evaluation time."""
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if model.input_ranges:
        x = x.copy()
        for p, (lo, hi) in enumerate(model.input_ranges):
            x[:, p] = (x[:, p] - lo) / (hi - lo)
    pred = model.net.forward(x)
    return np.clip(pred, 0.0, 1.0)


# ---------------------------------------------------------------- pipelines

@dataclass
class PcaRegressionEmulator:
    pca: PcaModel
    kernel: KernelModel


def fit_pca_krr(inputs, spectra, n_components=DEFAULT_COMPONENTS,
                regularizer=1e-6, lengthscale=None) -> PcaRegressionEmulator:
    pca = pca_fit(spectra, n_components)
    coeffs = pca_project(pca, spectra)
    return PcaRegressionEmulator(pca, krr_fit(inputs, coeffs, regularizer, lengthscale))


def fit_pca_gpr(inputs, spectra, n_components=DEFAULT_COMPONENTS,
                noise_var=1e-6, lengthscale=None,
                subset_cap=GPR_SUBSET_CAP) -> PcaRegressionEmulator:
    pca = pca_fit(spectra, n_components)
    coeffs = pca_project(pca, spectra)
    return PcaRegressionEmulator(
        pca, gpr_fit(inputs, coeffs, noise_var, lengthscale, subset_cap))


def predict_spectra(model, inputs: np.ndarray) -> np.ndarray:
    if isinstance(model, PcaRegressionEmulator):
        if model.kernel.kind == "gpr":
            coeffs, _ = gpr_predict(model.kernel, inputs)
        else:
            coeffs = krr_predict(model.kernel, inputs)
        return np.clip(pca_reconstruct(model.pca, coeffs), 0.0, 1.0)
    if isinstance(model, MlpModel):
        return mlp_predict(model, inputs)
    raise TypeError(f"unsupported model {type(model).__name__}")


def emulate_classical(model, pmap: ParameterMap,
                      wavelengths_nm: np.ndarray) -> HyperspectralCube:
    flat = pmap.values.reshape(-1, pmap.n_params).astype(np.float64)
    spectra = predict_spectra(model, flat)
    vals = spectra.reshape(pmap.height, pmap.width, -1)
    return HyperspectralCube(wavelengths_nm, vals.astype(np.float32))
