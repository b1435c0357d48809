"""Composable layer objects over the functional kernels.

Each layer owns its parameter arrays (mutated in place by the optimizer),
caches forward inputs, and accumulates gradients on backward. Sequential
chains layers; the VAE and MLP models are built from these.
"""

from __future__ import annotations

import numpy as np

from . import nnkernels as nk
from .rng import derive_seed, uniform_array


def glorot_uniform(seed: int, index: int, shape: tuple, fan_in: int, fan_out: int):
    """Deterministic uniform init in +-sqrt(6/(fan_in+fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    u = uniform_array(derive_seed(seed, index), int(np.prod(shape)))
    return ((2.0 * u - 1.0) * limit).reshape(shape)


class Layer:
    def params(self) -> list:
        return []

    def grads(self) -> list:
        return []

    def zero_grads(self) -> None:
        for g in self.grads():
            g[...] = 0.0

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, seed: int = 0, index: int = 0):
        self.w = glorot_uniform(seed, index, (n_in, n_out), n_in, n_out)
        self.b = np.zeros(n_out)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]

    def forward(self, x):
        self._x = x
        return nk.dense_forward(x, self.w, self.b)

    def backward(self, dy):
        dx, dw, db = nk.dense_backward(self._x, self.w, dy)
        self.dw += dw
        self.db += db
        return dx


class Conv2d(Layer):
    def __init__(self, c_in: int, c_out: int, k: int, stride: int = 1,
                 pad: int = 0, seed: int = 0, index: int = 0):
        fan_in, fan_out = c_in * k * k, c_out * k * k
        self.w = glorot_uniform(seed, index, (c_out, c_in, k, k), fan_in, fan_out)
        self.b = np.zeros(c_out)
        self.stride, self.pad = stride, pad
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]

    def forward(self, x):
        self._x = x
        return nk.conv2d_forward(x, self.w, self.b, self.stride, self.pad)

    def backward(self, dy):
        dx, dw, db = nk.conv2d_backward(self._x, self.w, dy, self.stride, self.pad)
        self.dw += dw
        self.db += db
        return dx


class ChannelNorm(Layer):
    def __init__(self, channels: int):
        self.gain = np.ones(channels)
        self.shift = np.zeros(channels)
        self.dgain = np.zeros(channels)
        self.dshift = np.zeros(channels)
        self._cache = None

    def params(self):
        return [self.gain, self.shift]

    def grads(self):
        return [self.dgain, self.dshift]

    def forward(self, x):
        y, self._cache = nk.channel_norm_forward(x, self.gain, self.shift)
        return y

    def backward(self, dy):
        dx, dgain, dshift = nk.channel_norm_backward(self._cache, self.gain, dy)
        self.dgain += dgain
        self.dshift += dshift
        return dx


class ReLU(Layer):
    def forward(self, x):
        self._x = x
        return nk.relu(x)

    def backward(self, dy):
        return nk.relu_backward(self._x, dy)


class Upsample2x(Layer):
    def forward(self, x):
        return nk.nn_upsample2x_forward(x)

    def backward(self, dy):
        return nk.nn_upsample2x_backward(dy)


class Sequential(Layer):
    def __init__(self, layers: list):
        self.layers = list(layers)

    def params(self):
        return [p for l in self.layers for p in l.params()]

    def grads(self):
        return [g for l in self.layers for g in l.grads()]

    def forward(self, x):
        for l in self.layers:
            x = l.forward(x)
        return x

    def backward(self, dy):
        for l in reversed(self.layers):
            dy = l.backward(dy)
        return dy
