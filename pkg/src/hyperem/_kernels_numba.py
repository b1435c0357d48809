"""Numba-compiled implementations of the hot kernels (default backend)."""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def _conv2d_forward(x, w, b, stride, pad, y):
    n, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    ho, wo = y.shape[2], y.shape[3]
    for ni in prange(n):
        for oc in range(cout):
            for oi in range(ho):
                for oj in range(wo):
                    acc = b[oc]
                    for ic in range(cin):
                        for ki in range(k):
                            ii = oi * stride + ki - pad
                            if ii < 0 or ii >= h:
                                continue
                            for kj in range(k):
                                jj = oj * stride + kj - pad
                                if 0 <= jj < wd:
                                    acc += x[ni, ic, ii, jj] * w[oc, ic, ki, kj]
                    y[ni, oc, oi, oj] = acc


@njit(cache=True, parallel=True)
def _conv2d_backward(x, w, dy, stride, pad, dx, dw, db):
    n, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    ho, wo = dy.shape[2], dy.shape[3]
    for ni in prange(n):
        for oc in range(cout):
            for oi in range(ho):
                for oj in range(wo):
                    g = dy[ni, oc, oi, oj]
                    for ic in range(cin):
                        for ki in range(k):
                            ii = oi * stride + ki - pad
                            if ii < 0 or ii >= h:
                                continue
                            for kj in range(k):
                                jj = oj * stride + kj - pad
                                if 0 <= jj < wd:
                                    dx[ni, ic, ii, jj] += g * w[oc, ic, ki, kj]
    for oc in range(cout):
        s = 0.0
        for ni in range(n):
            for oi in range(ho):
                for oj in range(wo):
                    g = dy[ni, oc, oi, oj]
                    s += g
                    for ic in range(cin):
                        for ki in range(k):
                            ii = oi * stride + ki - pad
                            if ii < 0 or ii >= h:
                                continue
                            for kj in range(k):
                                jj = oj * stride + kj - pad
                                if 0 <= jj < wd:
                                    dw[oc, ic, ki, kj] += g * x[ni, ic, ii, jj]
        db[oc] = s


@njit(cache=True, parallel=True)
def _lut_nearest(spectra, table, out):
    n, b = spectra.shape
    rows = table.shape[0]
    for i in prange(n):
        best = 0
        best_d = np.inf
        for r in range(rows):
            d = 0.0
            for j in range(b):
                diff = table[r, j] - spectra[i, j]
                d += diff * diff
                if d >= best_d:
                    # partial sums only grow; this row can no longer win
                    break
            if d < best_d:
                best_d = d
                best = r
        out[i] = best


def conv2d_forward_raw(x, w, b, stride, pad):
    n, _, h, wd = x.shape
    k = w.shape[2]
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    y = np.empty((n, w.shape[0], ho, wo))
    _conv2d_forward(np.ascontiguousarray(x), np.ascontiguousarray(w),
                    np.ascontiguousarray(b), stride, pad, y)
    return y


def conv2d_backward_raw(x, w, dy, stride, pad):
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    db = np.zeros(w.shape[0])
    _conv2d_backward(np.ascontiguousarray(x), np.ascontiguousarray(w),
                     np.ascontiguousarray(dy), stride, pad, dx, dw, db)
    return dx, dw, db


def lut_nearest_raw(spectra, table):
    out = np.empty(spectra.shape[0], dtype=np.int64)
    _lut_nearest(np.ascontiguousarray(spectra), np.ascontiguousarray(table), out)
    return out
