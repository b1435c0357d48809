"""Verification harness: finite-difference gradient checks and brute-force oracles.

Everything here is an independent code path from the kernels it verifies:
the convolution oracle is a quadruple nested loop, the Pearson oracle works
from raw sums, the nearest-row oracle is a per-row RMSE scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hsdata import HyperspectralCube
from .rng import SplitMix64

GRAD_H = 1e-5
GRAD_TOL = 1e-4


@dataclass
class GradCheckReport:
    max_rel_errors: list
    threshold: float = GRAD_TOL

    @property
    def passed(self) -> bool:
        return all(e <= self.threshold for e in self.max_rel_errors)


def finite_diff_grad(loss_fn, params: list, h: float = GRAD_H) -> list:
    """Central-difference gradient of loss_fn() w.r.t. each array in params.

    loss_fn reads the (mutated in place) arrays; params entries are restored.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_fn()
            flat[i] = orig - h
            lm = loss_fn()
            flat[i] = orig
            gflat[i] = (lp - lm) / (2 * h)
        grads.append(g)
    return grads


def check_gradients(loss_fn, params: list, analytic: list,
                    h: float = GRAD_H, tol: float = GRAD_TOL) -> GradCheckReport:
    numeric = finite_diff_grad(loss_fn, params, h)
    errs = []
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        errs.append(float(np.max(2.0 * np.abs(a - n) / denom)) if a.size else 0.0)
    return GradCheckReport(errs, tol)


def brute_force_conv(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                     stride: int, pad: int) -> np.ndarray:
    """Nested-loop cross-correlation; shares nothing with conv2d_forward."""
    n, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    y = np.zeros((n, cout, ho, wo))
    for ni in range(n):
        for oc in range(cout):
            for oi in range(ho):
                for oj in range(wo):
                    acc = b[oc]
                    for ic in range(cin):
                        for ki in range(k):
                            for kj in range(k):
                                ii = oi * stride + ki - pad
                                jj = oj * stride + kj - pad
                                if 0 <= ii < h and 0 <= jj < wd:
                                    acc += x[ni, ic, ii, jj] * w[oc, ic, ki, kj]
                    y[ni, oc, oi, oj] = acc
    return y


def brute_force_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            s = 0.0
            for k in range(a.shape[1]):
                s += a[i, k] * b[k, j]
            out[i, j] = s
    return out


def brute_force_nearest_row(spectrum: np.ndarray, table: np.ndarray) -> int:
    """First row index minimizing RMSE to the spectrum."""
    best, best_rmse = 0, math.inf
    for r in range(table.shape[0]):
        s = 0.0
        for j in range(table.shape[1]):
            d = table[r, j] - spectrum[j]
            s += d * d
        rmse = math.sqrt(s / table.shape[1])
        if rmse < best_rmse:
            best_rmse = rmse
            best = r
    return best


def brute_force_pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson r from raw sums."""
    n = x.size
    sx = sy = sxx = syy = sxy = 0.0
    for i in range(n):
        sx += x[i]
        sy += y[i]
        sxx += x[i] * x[i]
        syy += y[i] * y[i]
        sxy += x[i] * y[i]
    num = n * sxy - sx * sy
    den = math.sqrt(n * sxx - sx * sx) * math.sqrt(n * syy - sy * sy)
    return num / den


def brute_force_bilinear(lattice: np.ndarray, yi: float, xi: float) -> float:
    """Bilinear interpolation of a lattice at fractional coordinates."""
    ln = lattice.shape[0]
    y0 = min(int(yi), ln - 2)
    x0 = min(int(xi), ln - 2)
    fy, fx = yi - y0, xi - x0
    return (lattice[y0, x0] * (1 - fy) * (1 - fx)
            + lattice[y0, x0 + 1] * (1 - fy) * fx
            + lattice[y0 + 1, x0] * fy * (1 - fx)
            + lattice[y0 + 1, x0 + 1] * fy * fx)


def random_cube(seed: int, h: int, w: int, b: int,
                with_mask: bool = False) -> HyperspectralCube:
    """Seeded uniform cube for property tests."""
    stream = SplitMix64(seed)
    vals = np.array([stream.next_float() for _ in range(h * w * b)],
                    dtype=np.float32).reshape(h, w, b)
    mask = None
    if with_mask:
        mask = np.array([stream.next_float() < 0.8 for _ in range(h * w)]).reshape(h, w)
    return HyperspectralCube(400.0 + 10.0 * np.arange(b), vals, mask)
