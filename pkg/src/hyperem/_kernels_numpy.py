"""Pure-numpy implementations of the hot kernels (fallback backend)."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    """(N, C, Ho, Wo, k, k) view of zero-padded input patches."""
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (k, k), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def conv2d_forward_raw(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                       stride: int, pad: int) -> np.ndarray:
    k = w.shape[2]
    win = _windows(x, k, stride, pad)
    y = np.einsum("nchwij,ocij->nohw", win, w, optimize=True)
    return y + b[None, :, None, None]


def conv2d_backward_raw(x: np.ndarray, w: np.ndarray, dy: np.ndarray,
                        stride: int, pad: int):
    k = w.shape[2]
    win = _windows(x, k, stride, pad)
    dw = np.einsum("nchwij,nohw->ocij", win, dy, optimize=True)
    db = dy.sum(axis=(0, 2, 3))
    n, c, h, wd = x.shape
    ho, wo = dy.shape[2], dy.shape[3]
    dxp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad))
    for i in range(k):
        for j in range(k):
            patch = np.einsum("nohw,oc->nchw", dy, w[:, :, i, j], optimize=True)
            dxp[:, :, i:i + ho * stride:stride, j:j + wo * stride:stride] += patch
    dx = dxp[:, :, pad:pad + h, pad:pad + wd] if pad else dxp
    return dx, dw, db


def lut_nearest_raw(spectra: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Index of the closest table row (squared error) per spectrum; first-min ties.

    Squared differences are summed in plain row order so tie behavior matches
    the numba backend exactly.
    """
    out = np.empty(spectra.shape[0], dtype=np.int64)
    for i in range(spectra.shape[0]):
        d = table - spectra[i]
        out[i] = int(np.argmin(np.einsum("rb,rb->r", d, d)))
    return out
