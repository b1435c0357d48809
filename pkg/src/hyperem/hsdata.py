"""Core data model: hyperspectral cubes, parameter maps, spectra, dataset splits.

On-disk formats:
    HSC1  cube:  magic 'HSC1' | u32le header length L | UTF-8 JSON header |
                 H*W*B float32le values | optional bit-packed mask.
    HPM1  map:   magic 'HPM1', same layout with a 'params' count and
                 'param_names'/'param_ranges' in the header.

The mask block is row-major, one bit per pixel, LSB first, ceil(H*W/8) bytes.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .rng import SplitMix64

MAGIC_CUBE = b"HSC1"
MAGIC_MAP = b"HPM1"


class FormatError(ValueError):
    """Raised for malformed HSC1/HPM1 files."""


@dataclass(frozen=True)
class Spectrum:
    wavelengths_nm: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelengths_nm, dtype=np.float64)
        vals = np.asarray(self.values, dtype=np.float64)
        if wl.shape != vals.shape or wl.ndim != 1:
            raise ValueError("wavelengths and values must be equal-length vectors")
        if not np.all(np.isfinite(vals)):
            raise ValueError("spectrum values must be finite")
        object.__setattr__(self, "wavelengths_nm", wl)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class HyperspectralCube:
    wavelengths_nm: np.ndarray
    values: np.ndarray            # (H, W, B), float32, clamped to [0, 1]
    mask: np.ndarray | None = None  # (H, W) bool, True = valid

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float32)
        if vals.ndim != 3:
            raise ValueError("cube values must be (H, W, B)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("cube values must be finite")
        vals = np.clip(vals, 0.0, 1.0)
        wl = np.asarray(self.wavelengths_nm, dtype=np.float64)
        if wl.ndim != 1 or wl.shape[0] != vals.shape[2]:
            raise ValueError("wavelengths length must equal band count")
        if wl.shape[0] > 1 and not np.all(np.diff(wl) > 0):
            raise ValueError("wavelengths must be strictly increasing")
        mask = self.mask
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != vals.shape[:2]:
                raise ValueError("mask shape must be (H, W)")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "wavelengths_nm", wl)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]

    def valid_mask(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.values.shape[:2], dtype=bool)
        return self.mask

    def equals(self, other: "HyperspectralCube") -> bool:
        if self.values.shape != other.values.shape:
            return False
        if not np.array_equal(self.values, other.values):
            return False
        if not np.array_equal(self.wavelengths_nm, other.wavelengths_nm):
            return False
        a, b = self.mask, other.mask
        if (a is None) != (b is None):
            return False
        return a is None or np.array_equal(a, b)


@dataclass(frozen=True)
class ParameterMap:
    names: tuple
    ranges: tuple                 # P pairs of (min, max)
    values: np.ndarray            # (H, W, P), float32

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float32)
        if vals.ndim != 3:
            raise ValueError("map values must be (H, W, P)")
        names = tuple(self.names)
        ranges = tuple((float(lo), float(hi)) for lo, hi in self.ranges)
        if len(names) != vals.shape[2] or len(ranges) != vals.shape[2]:
            raise ValueError("names/ranges length must equal parameter count")
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        if len(names) < 1:
            raise ValueError("need at least one parameter")
        for p, (lo, hi) in enumerate(ranges):
            band = vals[:, :, p]
            # float32 storage may round range endpoints; allow one ulp of slack
            tol = 1e-6 * max(abs(lo), abs(hi), 1.0)
            if band.min() < lo - tol or band.max() > hi + tol:
                raise ValueError(f"parameter {names[p]!r} outside its declared range")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "ranges", ranges)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def n_params(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class DatasetSplit:
    train_indices: tuple
    val_indices: tuple
    test_indices: tuple
    seed: int = 0

    def __post_init__(self):
        tr, va, te = set(self.train_indices), set(self.val_indices), set(self.test_indices)
        n = len(tr) + len(va) + len(te)
        if len(tr | va | te) != n:
            raise ValueError("split sets must be disjoint")
        if (tr | va | te) != set(range(n)):
            raise ValueError("split sets must cover [0, N)")


def split_dataset(n: int, fractions: tuple, seed: int) -> DatasetSplit:
    """Deterministic train/val/test split: SplitMix64-seeded Fisher-Yates permutation.

    Set sizes are round(n*f) for val and test; the remainder goes to train.
    """
    f_train, f_val, f_test = (float(f) for f in fractions)
    if min(f_train, f_val, f_test) < 0 or abs(f_train + f_val + f_test - 1.0) > 1e-9:
        raise ValueError("fractions must be nonnegative and sum to 1")
    if n < 3:
        raise ValueError("need n >= 3")
    n_val = math.floor(n * f_val + 0.5)
    n_test = math.floor(n * f_test + 0.5)
    n_train = n - n_val - n_test
    if n_train < 0:
        raise ValueError("rounding left no room for the training set")
    perm = list(range(n))
    SplitMix64(seed).shuffle(perm)
    return DatasetSplit(
        train_indices=tuple(perm[:n_train]),
        val_indices=tuple(perm[n_train:n_train + n_val]),
        test_indices=tuple(perm[n_train + n_val:]),
        seed=seed,
    )


def extract_spectra(cube: HyperspectralCube, pmap: ParameterMap) -> list:
    """Row-major (parameter vector, Spectrum) pairs over valid pixels."""
    if (cube.height, cube.width) != (pmap.height, pmap.width):
        raise ValueError("cube and map dimensions differ")
    valid = cube.valid_mask()
    out = []
    for i in range(cube.height):
        for j in range(cube.width):
            if valid[i, j]:
                out.append((
                    pmap.values[i, j].astype(np.float64),
                    Spectrum(cube.wavelengths_nm, cube.values[i, j].astype(np.float64)),
                ))
    return out


def _pack_mask(mask: np.ndarray) -> bytes:
    return np.packbits(mask.reshape(-1).astype(np.uint8), bitorder="little").tobytes()


def _unpack_mask(raw: bytes, h: int, w: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
    return bits[:h * w].astype(bool).reshape(h, w)


def _write_container(path, magic: bytes, header: dict, payload: np.ndarray,
                     mask: np.ndarray | None) -> None:
    header = dict(header, has_mask=mask is not None)
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<I", len(hdr)))
        f.write(hdr)
        f.write(payload.astype("<f4").tobytes())
        if mask is not None:
            f.write(_pack_mask(mask))


def _read_container(path, magic: bytes):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != magic:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {magic!r}")
    if len(raw) < 8:
        raise FormatError("truncated header length")
    (hlen,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + hlen:
        raise FormatError("truncated header")
    header = json.loads(raw[8:8 + hlen].decode("utf-8"))
    return header, raw[8 + hlen:]


def write_cube(cube: HyperspectralCube, path) -> None:
    header = {
        "height": cube.height,
        "width": cube.width,
        "bands": cube.bands,
        "wavelengths_nm": cube.wavelengths_nm.tolist(),
    }
    _write_container(path, MAGIC_CUBE, header, cube.values, cube.mask)


def read_cube(path) -> HyperspectralCube:
    header, body = _read_container(path, MAGIC_CUBE)
    h, w, b = header["height"], header["width"], header["bands"]
    n_payload = h * w * b * 4
    n_mask = (h * w + 7) // 8 if header.get("has_mask") else 0
    if len(body) != n_payload + n_mask:
        raise FormatError(f"payload length {len(body)} != expected {n_payload + n_mask}")
    vals = np.frombuffer(body[:n_payload], dtype="<f4").reshape(h, w, b)
    if not np.all(np.isfinite(vals)):
        raise FormatError("non-finite values in payload")
    mask = _unpack_mask(body[n_payload:], h, w) if n_mask else None
    return HyperspectralCube(np.asarray(header["wavelengths_nm"]), vals, mask)


def write_param_map(pmap: ParameterMap, path) -> None:
    header = {
        "height": pmap.height,
        "width": pmap.width,
        "params": pmap.n_params,
        "param_names": list(pmap.names),
        "param_ranges": [list(r) for r in pmap.ranges],
    }
    _write_container(path, MAGIC_MAP, header, pmap.values, None)


def read_param_map(path) -> ParameterMap:
    header, body = _read_container(path, MAGIC_MAP)
    h, w, p = header["height"], header["width"], header["params"]
    n_payload = h * w * p * 4
    if len(body) != n_payload:
        raise FormatError(f"payload length {len(body)} != expected {n_payload}")
    vals = np.frombuffer(body[:n_payload], dtype="<f4").reshape(h, w, p)
    if not np.all(np.isfinite(vals)):
        raise FormatError("non-finite values in payload")
    return ParameterMap(tuple(header["param_names"]),
                        tuple(tuple(r) for r in header["param_ranges"]), vals)
