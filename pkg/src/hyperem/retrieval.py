"""Downstream use case: LUT-based inversion of emulated cubes for biophysical
parameter retrieval, with pixel-wise normalized relative-error maps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import accel
from .hsdata import HyperspectralCube, Spectrum
from .synthrtm import PARAM_NAMES, LookUpTable, RtmParams

NO_DATA = float("nan")


@dataclass(frozen=True)
class RetrievalResult:
    retrieved_map: np.ndarray        # (H, W) parameter values, NaN at masked pixels
    error_map: np.ndarray            # (H, W) relative error, percent
    mean_relative_error: float       # percent over valid pixels


def _check_grid(wavelengths: np.ndarray, lut: LookUpTable) -> None:
    if wavelengths.shape != lut.wavelengths_nm.shape or \
            not np.allclose(wavelengths, lut.wavelengths_nm):
        raise ValueError("spectrum band grid does not match the LUT")


def lut_invert(s: Spectrum, lut: LookUpTable, cost: str = "rmse") -> RtmParams:
    """Parameters of the LUT row closest to s; ties resolve to the lowest index."""
    _check_grid(s.wavelengths_nm, lut)
    idx = invert_spectra(s.values[None, :], lut, cost)[0]
    return lut.rows[int(idx)][0]


def invert_spectra(spectra: np.ndarray, lut: LookUpTable,
                   cost: str = "rmse") -> np.ndarray:
    """Nearest-row indices for an (n, B) spectra array."""
    table = lut.spectra_matrix()
    spectra = np.asarray(spectra, dtype=np.float64)
    if cost == "rmse":
        # argmin of squared error == argmin of RMSE; hot scan is backend-dispatched
        return accel.lut_nearest_raw(spectra, table)
    if cost == "sa":
        tn = np.linalg.norm(table, axis=1)
        sn = np.linalg.norm(spectra, axis=1)
        cos = np.clip((spectra @ table.T) / (sn[:, None] * tn[None, :]), -1.0, 1.0)
        return np.argmax(cos, axis=1)
    raise ValueError(f"unknown cost {cost!r}")


def retrieve_map(cube: HyperspectralCube, lut: LookUpTable,
                 param_name: str, cost: str = "rmse") -> np.ndarray:
    """Per-pixel LUT inversion extracting one named parameter; NaN where masked."""
    _check_grid(cube.wavelengths_nm, lut)
    if param_name not in PARAM_NAMES:
        raise ValueError(f"unknown parameter {param_name!r}")
    p_col = PARAM_NAMES.index(param_name)
    valid = cube.valid_mask()
    flat = cube.values.reshape(-1, cube.bands).astype(np.float64)
    flat_valid = valid.reshape(-1)
    out = np.full(flat.shape[0], NO_DATA)
    if flat_valid.any():
        idx = invert_spectra(flat[flat_valid], lut, cost)
        out[flat_valid] = lut.params_matrix()[idx, p_col]
    return out.reshape(cube.height, cube.width)


def relative_error_map(ref_map: np.ndarray, est_map: np.ndarray,
                       normalization_range: float) -> RetrievalResult:
    """Pixel-wise RE = 100 * |est - ref| / normalization_range."""
    ref_map = np.asarray(ref_map, dtype=np.float64)
    est_map = np.asarray(est_map, dtype=np.float64)
    if ref_map.shape != est_map.shape:
        raise ValueError("map shapes differ")
    if not (normalization_range > 0):
        raise ValueError("normalization range must be positive")
    err = 100.0 * np.abs(est_map - ref_map) / normalization_range
    valid = np.isfinite(err)
    if not valid.any():
        raise ValueError("no valid pixels")
    return RetrievalResult(est_map, err, float(err[valid].mean()))


def grid_range(lut: LookUpTable, param_name: str) -> float:
    vals = lut.grid_spec[param_name]
    return float(max(vals) - min(vals))


def compare_emulators_downstream(reference_cube: HyperspectralCube,
                                 emulated_cubes: dict, lut: LookUpTable,
                                 param_name: str = "cab") -> dict:
    """Mean relative retrieval error per emulator, against the reference
    cube's own LUT retrieval. Returns name -> RetrievalResult."""
    ref_retrieval = retrieve_map(reference_cube, lut, param_name)
    norm = grid_range(lut, param_name)
    out = {}
    for name, cube in emulated_cubes.items():
        est = retrieve_map(cube, lut, param_name)
        out[name] = relative_error_map(ref_retrieval, est, norm)
    return out
