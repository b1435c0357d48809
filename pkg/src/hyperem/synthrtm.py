"""Closed-form surrogate of a canopy radiative-transfer forward model.

Maps six biophysical parameters to a reflectance spectrum with the
qualitative structure of vegetation spectra: chlorophyll absorption wells,
red edge, NIR plateau, water absorption features, linear soil background,
and LAI-driven saturation of canopy cover. Fully deterministic, so every
emulator in this package trains against exactly reproducible ground truth.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .hsdata import HyperspectralCube, ParameterMap, Spectrum
from .rng import SplitMix64, derive_seed

PARAM_NAMES = ("cab", "cw", "cm", "lai", "ala", "psoil")
PARAM_RANGES = (
    (10.0, 80.0),     # cab, ug/cm^2
    (0.005, 0.05),    # cw, g/cm^2
    (0.002, 0.02),    # cm, g/cm^2
    (0.0, 7.0),       # lai, m^2/m^2
    (20.0, 70.0),     # ala, degrees
    (0.0, 1.0),       # psoil
)


@dataclass(frozen=True)
class RtmParams:
    cab: float
    cw: float
    cm: float
    lai: float
    ala: float
    psoil: float

    def __post_init__(self):
        for name, (lo, hi) in zip(PARAM_NAMES, PARAM_RANGES):
            v = getattr(self, name)
            if not math.isfinite(v) or v < lo or v > hi:
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")

    def as_array(self) -> np.ndarray:
        return np.array([self.cab, self.cw, self.cm, self.lai, self.ala, self.psoil])


@dataclass(frozen=True)
class BandGrid:
    n_bands: int = 211

    @property
    def wavelengths_nm(self) -> np.ndarray:
        return 400.0 + 10.0 * np.arange(self.n_bands)


@dataclass(frozen=True)
class LookUpTable:
    rows: tuple                 # ordered (RtmParams, Spectrum) pairs
    grid_spec: dict             # parameter name -> value list

    def __post_init__(self):
        if not self.rows:
            raise ValueError("LUT must have at least one row")

    @property
    def wavelengths_nm(self) -> np.ndarray:
        return self.rows[0][1].wavelengths_nm

    def spectra_matrix(self) -> np.ndarray:
        return np.stack([s.values for _, s in self.rows])

    def params_matrix(self) -> np.ndarray:
        return np.stack([p.as_array() for p, _ in self.rows])


def _sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def _gauss(lam, center, width):
    return np.exp(-((lam - center) ** 2) / (2.0 * width * width))


def _sat(x, k):
    return x / (x + k)


def reflectance(lam: np.ndarray, cab, cw, cm, lai, ala, psoil) -> np.ndarray:
    """Surrogate canopy reflectance at wavelengths lam (nm). Vectorized over lam."""
    lam = np.asarray(lam, dtype=np.float64)
    leaf = (0.06
            + 0.12 * _gauss(lam, 550, 35) * (1 - _sat(cab, 30))
            - 0.04 * _gauss(lam, 450, 25) * _sat(cab, 30)
            - 0.05 * _gauss(lam, 670, 22) * _sat(cab, 30)
            + 0.38 * _sig((lam - 715) / 18) * (1 - 0.35 * _sig((lam - 1350) / 120)))
    leaf = leaf * (1 - 0.30 * _sat(cw, 0.03) * _gauss(lam, 1200, 60))
    leaf = leaf * (1 - 0.85 * _sat(cw, 0.015) * _gauss(lam, 1450, 55))
    leaf = leaf * (1 - 0.90 * _sat(cw, 0.02) * _gauss(lam, 1940, 85))
    leaf = leaf * (1 - 0.50 * _sat(cm, 0.01) * _sig((lam - 1600) / 300))
    soil = (0.15 + 0.25 * (lam - 400) / 2100) * (0.5 + 0.5 * psoil)
    k = 0.3 + 0.5 * math.cos(math.radians(ala))
    fveg = 1.0 - math.exp(-k * lai)
    r = fveg * leaf * (1 + 0.08 * (1 - fveg)) + (1 - fveg) * soil
    return np.clip(r, 0.0, 1.0)


def forward_spectrum(p: RtmParams, grid: BandGrid = BandGrid()) -> Spectrum:
    lam = grid.wavelengths_nm
    return Spectrum(lam, reflectance(lam, p.cab, p.cw, p.cm, p.lai, p.ala, p.psoil))


def forward_batch(params: np.ndarray, grid: BandGrid) -> np.ndarray:
    """Reflectance for an (n, 6) parameter array -> (n, B). Validates ranges."""
    params = np.asarray(params, dtype=np.float64)
    for i, (lo, hi) in enumerate(PARAM_RANGES):
        col = params[:, i]
        if col.min() < lo - 1e-9 or col.max() > hi + 1e-9:
            raise ValueError(f"parameter {PARAM_NAMES[i]} outside [{lo}, {hi}]")
    lam = grid.wavelengths_nm[None, :]
    cab, cw, cm = params[:, 0:1], params[:, 1:2], params[:, 2:3]
    lai, ala, psoil = params[:, 3:4], params[:, 4:5], params[:, 5:6]
    leaf = (0.06
            + 0.12 * _gauss(lam, 550, 35) * (1 - _sat(cab, 30))
            - 0.04 * _gauss(lam, 450, 25) * _sat(cab, 30)
            - 0.05 * _gauss(lam, 670, 22) * _sat(cab, 30)
            + 0.38 * _sig((lam - 715) / 18) * (1 - 0.35 * _sig((lam - 1350) / 120)))
    leaf = leaf * (1 - 0.30 * _sat(cw, 0.03) * _gauss(lam, 1200, 60))
    leaf = leaf * (1 - 0.85 * _sat(cw, 0.015) * _gauss(lam, 1450, 55))
    leaf = leaf * (1 - 0.90 * _sat(cw, 0.02) * _gauss(lam, 1940, 85))
    leaf = leaf * (1 - 0.50 * _sat(cm, 0.01) * _sig((lam - 1600) / 300))
    soil = (0.15 + 0.25 * (lam - 400) / 2100) * (0.5 + 0.5 * psoil)
    k = 0.3 + 0.5 * np.cos(np.radians(ala))
    fveg = 1.0 - np.exp(-k * lai)
    r = fveg * leaf * (1 + 0.08 * (1 - fveg)) + (1 - fveg) * soil
    return np.clip(r, 0.0, 1.0)


LATTICE = 8  # value-noise lattice resolution per parameter field


def _bilinear_upsample(lattice: np.ndarray, h: int, w: int) -> np.ndarray:
    """Upsample an L x L lattice to h x w; lattice nodes align with field corners."""
    ln = lattice.shape[0]
    yi = np.linspace(0.0, ln - 1.0, h) if h > 1 else np.zeros(1)
    xi = np.linspace(0.0, ln - 1.0, w) if w > 1 else np.zeros(1)
    y0 = np.minimum(yi.astype(int), ln - 2) if ln > 1 else np.zeros(h, dtype=int)
    x0 = np.minimum(xi.astype(int), ln - 2) if ln > 1 else np.zeros(w, dtype=int)
    fy = (yi - y0)[:, None]
    fx = (xi - x0)[None, :]
    a = lattice[np.ix_(y0, x0)]
    b = lattice[np.ix_(y0, np.minimum(x0 + 1, ln - 1))]
    c = lattice[np.ix_(np.minimum(y0 + 1, ln - 1), x0)]
    d = lattice[np.ix_(np.minimum(y0 + 1, ln - 1), np.minimum(x0 + 1, ln - 1))]
    return (a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx
            + c * fy * (1 - fx) + d * fy * fx)


def _noise_lattice(seed: int, param_index: int) -> np.ndarray:
    stream = SplitMix64(derive_seed(seed, param_index))
    return np.array([[stream.next_float() for _ in range(LATTICE)]
                     for _ in range(LATTICE)])


def gen_param_maps(seed: int, h: int, w: int,
                   names=PARAM_NAMES, ranges=PARAM_RANGES,
                   lattice_fn=_noise_lattice) -> ParameterMap:
    """Smooth per-parameter fields: SplitMix64 value-noise lattice, bilinear upsample.

    lattice_fn is injectable for tests that need a stubbed lattice.
    """
    if h < 1 or w < 1:
        raise ValueError("need h, w >= 1")
    fields = []
    for p, (lo, hi) in enumerate(ranges):
        field = _bilinear_upsample(lattice_fn(seed, p), h, w)
        fields.append(lo + (hi - lo) * field)
    return ParameterMap(tuple(names), tuple(ranges),
                        np.stack(fields, axis=-1).astype(np.float32))


def gen_cube(pmap: ParameterMap, grid: BandGrid) -> HyperspectralCube:
    flat = pmap.values.reshape(-1, pmap.n_params).astype(np.float64)
    spectra = forward_batch(flat, grid)
    vals = spectra.reshape(pmap.height, pmap.width, grid.n_bands)
    return HyperspectralCube(grid.wavelengths_nm, vals.astype(np.float32))


def gen_dataset(n_cubes: int, h: int, w: int, bands: int, seed: int,
                ranges=PARAM_RANGES) -> list:
    """n_cubes (ParameterMap, HyperspectralCube) pairs; cube i uses seed + i."""
    if n_cubes < 0 or h < 1 or w < 1 or bands < 1:
        raise ValueError("invalid dataset sizes")
    grid = BandGrid(bands)
    out = []
    for i in range(n_cubes):
        pmap = gen_param_maps(seed + i, h, w, ranges=ranges)
        out.append((pmap, gen_cube(pmap, grid)))
    return out


DEFAULT_LUT_GRID = {
    "cab": [float(v) for v in range(10, 81)],       # 71 values, step 1
    "cw": [0.005, 0.0275, 0.05],
    "cm": [0.002, 0.011, 0.02],
    "lai": [0.5, 3.0, 6.0],
    "ala": [25.0, 45.0, 65.0],
    "psoil": [0.0, 0.5, 1.0],
}


def build_lut(grid_spec: dict | None = None, grid: BandGrid = BandGrid()) -> LookUpTable:
    """Cartesian product of per-parameter value lists, lexicographic row order."""
    spec = dict(DEFAULT_LUT_GRID if grid_spec is None else grid_spec)
    axes = []
    for name in PARAM_NAMES:
        vals = list(spec.get(name, []))
        if not vals:
            raise ValueError(f"empty grid for parameter {name}")
        if sorted(vals) != vals:
            raise ValueError(f"grid for {name} must be sorted ascending")
        axes.append(vals)
    combos = list(itertools.product(*axes))
    spectra = forward_batch(np.array(combos, dtype=np.float64), grid)
    lam = grid.wavelengths_nm
    rows = tuple((RtmParams(*combo), Spectrum(lam, spectra[i]))
                 for i, combo in enumerate(combos))
    return LookUpTable(rows, spec)
