"""Neural numeric kernels with handwritten backward passes.

All math is float64. Every backward pass is checked against central finite
differences in the test suite; that contract (relative error <= 1e-4 at
h = 1e-5) is the module's correctness definition.

Convolution forward/backward dispatch to the selected backend (numba or
pure numpy, see accel.py). Everything else is plain numpy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import accel

NORM_EPS = 1e-5


class ShapeError(ValueError):
    pass


class DivergenceError(RuntimeError):
    """Non-finite gradient or loss during training."""


# ---------------------------------------------------------------- dense

def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(f"dense shapes: x{x.shape} w{w.shape} b{b.shape}")
    return x @ w + b


def dense_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray):
    if dy.shape != (x.shape[0], w.shape[1]):
        raise ShapeError(f"dense dy shape {dy.shape}")
    dx = dy @ w.T
    dw = x.T @ dy
    db = dy.sum(axis=0)
    return dx, dw, db


# ---------------------------------------------------------------- conv2d

def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                   stride: int = 1, pad: int = 0) -> np.ndarray:
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv shapes: x{x.shape} w{w.shape}")
    k = w.shape[2]
    if w.shape[3] != k or x.shape[2] + 2 * pad < k or x.shape[3] + 2 * pad < k:
        raise ShapeError("kernel larger than padded input")
    return accel.conv2d_forward_raw(np.asarray(x, dtype=np.float64),
                                    np.asarray(w, dtype=np.float64),
                                    np.asarray(b, dtype=np.float64), stride, pad)


def conv2d_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray,
                    stride: int = 1, pad: int = 0):
    return accel.conv2d_backward_raw(np.asarray(x, dtype=np.float64),
                                     np.asarray(w, dtype=np.float64),
                                     np.asarray(dy, dtype=np.float64), stride, pad)


# ---------------------------------------------------------------- channel norm

def channel_norm_forward(x: np.ndarray, gain: np.ndarray, shift: np.ndarray):
    """Per-sample, per-channel spatial normalization with learned affine.

    Returns (y, cache) where cache feeds channel_norm_backward.
    """
    if x.ndim != 4:
        raise ShapeError("channel_norm expects (N, C, H, W)")
    mean = x.mean(axis=(2, 3), keepdims=True)
    var = x.var(axis=(2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + NORM_EPS)
    xhat = (x - mean) * inv
    y = gain[None, :, None, None] * xhat + shift[None, :, None, None]
    return y, (xhat, inv)


def channel_norm_backward(cache, gain: np.ndarray, dy: np.ndarray):
    xhat, inv = cache
    m = xhat.shape[2] * xhat.shape[3]
    dgain = (dy * xhat).sum(axis=(0, 2, 3))
    dshift = dy.sum(axis=(0, 2, 3))
    dxhat = dy * gain[None, :, None, None]
    dx = inv * (dxhat
                - dxhat.mean(axis=(2, 3), keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=(2, 3), keepdims=True) / m)
    return dx, dgain, dshift


# ---------------------------------------------------------------- upsampling

def nn_upsample2x_forward(x: np.ndarray) -> np.ndarray:
    if x.ndim != 4:
        raise ShapeError("upsample expects (N, C, H, W)")
    return x.repeat(2, axis=2).repeat(2, axis=3)


def nn_upsample2x_backward(dy: np.ndarray) -> np.ndarray:
    n, c, h2, w2 = dy.shape
    return dy.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5))


# ---------------------------------------------------------------- activations

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return np.where(x > 0, dy, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    s = sigmoid(x)
    return dy * s * (1.0 - s)


# ---------------------------------------------------------------- Adam

@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: list) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(params: list, grads: list, state: AdamState, lr: float) -> None:
    """One Adam update, in place. Raises on non-finite gradients."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params/grads/state length mismatch")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite gradient")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
