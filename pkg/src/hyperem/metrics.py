"""Emulation quality metrics: RMSE, SSIM, spectral angle, PSNR, throughput,
and scatter-data export.

Masked pixels are excluded identically from every metric: both cubes are
zeroed at invalid pixels before any computation, so the values stored there
can never influence a result.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .hsdata import HyperspectralCube

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PSNR_INF = math.inf


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    ssim: float
    sa_radians: float
    psnr_db: float
    band_correlations: np.ndarray
    masked_pixel_count: int

    def as_dict(self) -> dict:
        return {"rmse": self.rmse, "ssim": self.ssim,
                "sa_radians": self.sa_radians, "psnr_db": self.psnr_db,
                "masked_pixel_count": self.masked_pixel_count}


def _prepare(ref: HyperspectralCube, emu: HyperspectralCube):
    if ref.values.shape != emu.values.shape:
        raise ValueError("cube shapes differ")
    mask = ref.valid_mask() & emu.valid_mask()
    a = np.where(mask[:, :, None], ref.values.astype(np.float64), 0.0)
    b = np.where(mask[:, :, None], emu.values.astype(np.float64), 0.0)
    return a, b, mask


def rmse(ref: HyperspectralCube, emu: HyperspectralCube) -> float:
    a, b, mask = _prepare(ref, emu)
    n_valid = int(mask.sum())
    if n_valid == 0:
        raise ValueError("no valid pixels")
    sq = ((a - b) ** 2).sum()
    return math.sqrt(sq / (n_valid * ref.bands))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2 * sigma ** 2))
    win = np.outer(g, g)
    return win / win.sum()


def _ssim_band(x: np.ndarray, y: np.ndarray, data_range: float) -> float:
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    if min(x.shape) < SSIM_WINDOW:
        # global-statistics fallback for images smaller than the window
        mx, my = x.mean(), y.mean()
        vx, vy = x.var(), y.var()
        cxy = ((x - mx) * (y - my)).mean()
        return ((2 * mx * my + c1) * (2 * cxy + c2)
                / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    mx = convolve2d(x, win, mode="valid")
    my = convolve2d(y, win, mode="valid")
    vx = convolve2d(x * x, win, mode="valid") - mx * mx
    vy = convolve2d(y * y, win, mode="valid") - my * my
    cxy = convolve2d(x * y, win, mode="valid") - mx * my
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float((num / den).mean())


def ssim(ref: HyperspectralCube, emu: HyperspectralCube,
         data_range: float = 1.0) -> float:
    """Per-band 2-D SSIM (11x11 Gaussian window, sigma 1.5), averaged over bands."""
    a, b, _ = _prepare(ref, emu)
    vals = [_ssim_band(a[:, :, k], b[:, :, k], data_range) for k in range(ref.bands)]
    return float(np.mean(vals))


def spectral_angle(ref: HyperspectralCube, emu: HyperspectralCube) -> float:
    a, b, mask = _prepare(ref, emu)
    idx = np.argwhere(mask)
    if idx.size == 0:
        raise ValueError("no valid pixels")
    sa_values = _spectral_angles_flat(a[mask], b[mask], idx)
    return float(sa_values.mean())


def _spectral_angles_flat(a: np.ndarray, b: np.ndarray, idx) -> np.ndarray:
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    bad = np.nonzero((na == 0) | (nb == 0))[0]
    if bad.size:
        i, j = idx[bad[0]]
        raise ValueError(f"zero-norm spectrum at pixel ({i}, {j})")
    cos = np.clip((a * b).sum(axis=1) / (na * nb), -1.0, 1.0)
    return np.arccos(cos)


def psnr(ref: HyperspectralCube, emu: HyperspectralCube,
         max_value: float = 1.0) -> float:
    a, b, mask = _prepare(ref, emu)
    n_valid = int(mask.sum())
    mse = ((a - b) ** 2).sum() / (n_valid * ref.bands)
    if mse == 0:
        return PSNR_INF
    return 10.0 * math.log10(max_value * max_value / mse)


def band_correlations(ref: HyperspectralCube, emu: HyperspectralCube) -> np.ndarray:
    a, b, mask = _prepare(ref, emu)
    out = np.empty(ref.bands)
    av, bv = a[mask], b[mask]
    for k in range(ref.bands):
        x, y = av[:, k], bv[:, k]
        sx, sy = x.std(), y.std()
        if sx == 0 or sy == 0:
            out[k] = 1.0 if np.array_equal(x, y) else 0.0
        else:
            out[k] = ((x - x.mean()) * (y - y.mean())).mean() / (sx * sy)
    return out


def evaluate(ref: HyperspectralCube, emu: HyperspectralCube,
             max_value: float = 1.0) -> MetricsReport:
    mask = ref.valid_mask() & emu.valid_mask()
    return MetricsReport(
        rmse=rmse(ref, emu),
        ssim=ssim(ref, emu, max_value),
        sa_radians=spectral_angle(ref, emu),
        psnr_db=psnr(ref, emu, max_value),
        band_correlations=band_correlations(ref, emu),
        masked_pixel_count=int((~mask).sum()),
    )


def throughput_bench(emulate_fn, maps: list, repeats: int = 3) -> dict:
    """Images per second over full passes; one warm-up pass excluded; median reported."""
    if repeats < 1 or not maps:
        raise ValueError("need repeats >= 1 and at least one map")
    for m in maps:
        emulate_fn(m)  # warm-up
        break
    timings = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for m in maps:
            emulate_fn(m)
        timings.append(time.perf_counter() - t0)
    med = float(np.median(timings))
    return {"images_per_second": len(maps) / med,
            "median_seconds": med,
            "raw_seconds": timings,
            "n_images": len(maps)}


def scatter_export(ref: HyperspectralCube, emu: HyperspectralCube,
                   band_index: int, path) -> float:
    """CSV of (ref, emu) values at one band over valid pixels; returns Pearson r."""
    a, b, mask = _prepare(ref, emu)
    x = a[:, :, band_index][mask]
    y = b[:, :, band_index][mask]
    sx, sy = x.std(), y.std()
    if sx == 0 or sy == 0:
        r = 1.0 if np.array_equal(x, y) else 0.0
    else:
        r = float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))
    with open(path, "w", newline="") as f:
        f.write(f"# band_index={band_index}"
                f" wavelength_nm={ref.wavelengths_nm[band_index]:.1f}"
                f" pearson_r={r:.12g} n={x.size}\n")
        writer = csv.writer(f)
        writer.writerow(["ref_value", "emu_value"])
        for xv, yv in zip(x, y):
            writer.writerow([f"{xv:.9g}", f"{yv:.9g}"])
    return r
