"""End-to-end training/emulation orchestration shared by the CLI and the
acceptance experiments: dataset assembly, model dispatch, and evaluation."""

from __future__ import annotations

import numpy as np

from . import classical, schedules, vae
from .hsdata import DatasetSplit, HyperspectralCube, ParameterMap, split_dataset

MODEL_KINDS = ("p2p", "p2p-pre", "fc-vae", "fc-vae-pre", "mlp", "krr", "gpr")
DEFAULT_SPECTRA_BUDGET = 3000


def dataset_arrays(pairs: list, indices) -> tuple:
    """Stack (params, spectra) over all pixels of the selected cubes."""
    p_parts, s_parts = [], []
    for i in indices:
        pmap, cube = pairs[i]
        p_parts.append(pmap.values.reshape(-1, pmap.n_params).astype(np.float64))
        s_parts.append(cube.values.reshape(-1, cube.bands).astype(np.float64))
    return np.concatenate(p_parts), np.concatenate(s_parts)


def subsample(params: np.ndarray, spectra: np.ndarray, n: int, seed: int):
    rng = np.random.default_rng(seed)
    idx = rng.permutation(params.shape[0])[:n]
    return params[idx], spectra[idx]


def normalize_params(params: np.ndarray, ranges) -> np.ndarray:
    out = np.array(params, dtype=np.float64)
    for p, (lo, hi) in enumerate(ranges):
        out[..., p] = (out[..., p] - lo) / (hi - lo)
    return out


def cubes_chw(pairs: list, indices) -> np.ndarray:
    return np.stack([pairs[i][1].values.transpose(2, 0, 1) for i in indices]) \
        .astype(np.float64)


def maps_chw(pairs: list, indices, ranges) -> np.ndarray:
    raw = np.stack([pairs[i][0].values.transpose(2, 0, 1) for i in indices]) \
        .astype(np.float64)
    for p, (lo, hi) in enumerate(ranges):
        raw[:, p] = (raw[:, p] - lo) / (hi - lo)
    return raw


def train_model(kind: str, pairs: list, train_indices, seed: int,
                epochs: int = 150, pretrain_epochs: int | None = None,
                n_spectra: int = DEFAULT_SPECTRA_BUDGET,
                n_components: int = classical.DEFAULT_COMPONENTS,
                regularizer: float = 1e-6,
                hidden=None, widths=vae.DEFAULT_FCVAE_WIDTHS, n_down: int = 2,
                latent: int = vae.DEFAULT_LATENT,
                batch_size: int | None = None,
                base_lr: float = schedules.BASE_LR):
    """Train one emulator kind on the training cubes. Returns (model, log rows)."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    ranges = pairs[0][0].ranges
    bands = pairs[0][1].bands
    n_params = pairs[0][0].n_params
    if pretrain_epochs is None:
        pretrain_epochs = epochs

    if kind in ("p2p", "p2p-pre", "mlp", "krr", "gpr"):
        params, spectra = dataset_arrays(pairs, train_indices)
        params, spectra = subsample(params, spectra, n_spectra, seed)

    if kind in ("p2p", "p2p-pre"):
        model = vae.build_p2p(bands, n_params, latent,
                              hidden or vae.DEFAULT_P2P_HIDDEN,
                              formulation="two-step" if kind.endswith("-pre")
                              else "one-step", seed=seed)
        model.meta["input_ranges"] = [list(r) for r in ranges]
        sched = schedules.TrainSchedule(
            epochs=epochs, base_lr=base_lr, kl_cycle=schedules.KL_CYCLE_P2P,
            batch_size=batch_size or 64)
        xin = normalize_params(params, ranges)
        log = []
        if kind == "p2p-pre":
            pre_sched = schedules.TrainSchedule(
                epochs=pretrain_epochs, base_lr=base_lr,
                kl_cycle=schedules.KL_CYCLE_P2P,
                batch_size=batch_size or 64)
            for row in vae.train_vae_pretrain(model, spectra, pre_sched, seed):
                log.append(dict(row, phase="pretrain"))
            for row in vae.train_interpolator(model, xin, spectra, sched, seed + 1):
                log.append(dict(row, phase="interpolator"))
        else:
            for row in vae.train_one_step(model, xin, spectra, sched, seed):
                log.append(dict(row, phase="one-step"))
        return model, log

    if kind in ("fc-vae", "fc-vae-pre"):
        cubes = cubes_chw(pairs, train_indices)
        pmaps = maps_chw(pairs, train_indices, ranges)
        model = vae.build_fcvae(bands, n_params, latent, widths, n_down,
                                formulation="two-step" if kind.endswith("-pre")
                                else "one-step", seed=seed)
        model.meta["input_ranges"] = [list(r) for r in ranges]
        sched = schedules.TrainSchedule(
            epochs=epochs, base_lr=base_lr, kl_cycle=schedules.KL_CYCLE_FCVAE,
            batch_size=batch_size or 8)
        log = []
        if kind == "fc-vae-pre":
            pre_sched = schedules.TrainSchedule(
                epochs=pretrain_epochs, base_lr=base_lr,
                kl_cycle=schedules.KL_CYCLE_FCVAE,
                batch_size=batch_size or 8)
            for row in vae.train_vae_pretrain(model, cubes, pre_sched, seed):
                log.append(dict(row, phase="pretrain"))
            for row in vae.train_interpolator(model, pmaps, cubes, sched, seed + 1):
                log.append(dict(row, phase="interpolator"))
        else:
            for row in vae.train_one_step(model, pmaps, cubes, sched, seed):
                log.append(dict(row, phase="one-step"))
        return model, log

    if kind == "mlp":
        model = classical.build_mlp(n_params, bands, seed=seed)
        model.input_ranges = tuple(ranges)
        classical.mlp_train(model, params, spectra, epochs, seed=seed)
        return model, [{"epochs": epochs}]

    if kind == "krr":
        model = classical.fit_pca_krr(params, spectra, n_components, regularizer)
        return model, [{"n_train": params.shape[0]}]

    model = classical.fit_pca_gpr(params, spectra, n_components, regularizer)
    return model, [{"n_train": params.shape[0]}]


def emulate_any(model, pmap: ParameterMap, wavelengths_nm,
                mode: str = "mean", seed: int = 0) -> HyperspectralCube:
    if isinstance(model, vae.VaeEmulator):
        return vae.emulate(model, pmap, wavelengths_nm, mode, seed)
    return classical.emulate_classical(model, pmap, wavelengths_nm)


def default_split(n: int, seed: int) -> DatasetSplit:
    return split_dataset(n, (0.7, 0.2, 0.1), seed)
