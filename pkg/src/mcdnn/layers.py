"""Forward and backward passes for single (unbatched) samples.

Spatial activations are ``(maps, height, width)`` arrays; fully connected
activations are 1-D. Each layer caches what its backward pass needs from
the most recent forward pass, so one layer object must not be driven by
two workers at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

TANH_A = 1.7159
TANH_B = 2.0 / 3.0


class ShapeMismatchError(ValueError):
    pass


class StaleCacheError(RuntimeError):
    pass


class LabelError(ValueError):
    pass


@dataclass(frozen=True)
class ScaledTanh:
    a: float = TANH_A
    b: float = TANH_B

    def __call__(self, x):
        return self.a * np.tanh(self.b * x)

    def grad(self, x):
        t = np.tanh(self.b * x)
        return self.a * self.b * (1.0 - t * t)

    def grad_from_output(self, y):
        # d/dx a*tanh(bx) = a*b*(1 - tanh^2) = b*(a - y^2/a)
        return self.b * (self.a - y * y / self.a)


@dataclass(frozen=True)
class Linear:
    def __call__(self, x):
        return x

    def grad(self, x):
        return np.ones_like(x)


def scaled_tanh(x, a: float = TANH_A, b: float = TANH_B):
    return a * np.tanh(b * x)


def scaled_tanh_grad(x, a: float = TANH_A, b: float = TANH_B):
    t = np.tanh(b * x)
    return a * b * (1.0 - t * t)


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size < 2:
        raise ShapeMismatchError(f"softmax needs a vector of >= 2 logits, got shape {z.shape}")
    e = np.exp(z - z.max())
    return e / e.sum()


def cross_entropy(p, label: int):
    """Return ``(loss, grad_z)`` for softmax probabilities ``p`` and an integer label.

    ``grad_z`` is the gradient with respect to the logits that produced ``p``.
    """
    if not 0 <= label < len(p):
        raise LabelError(f"label {label} outside [0, {len(p)})")
    loss = -np.log(max(p[label], np.finfo(np.float64).tiny))
    g = np.array(p, dtype=np.float64)
    g[label] -= 1.0
    return float(loss), g


class ConvLayer:
    """Valid, stride-1 convolution; every input map feeds every output map."""

    def __init__(self, in_maps: int, out_maps: int, kernel: int):
        self.in_maps, self.out_maps, self.kernel = in_maps, out_maps, kernel
        self.weights = np.zeros((out_maps, in_maps, kernel, kernel))
        self.bias = np.zeros(out_maps)
        self.grad_weights = np.zeros_like(self.weights)
        self.grad_bias = np.zeros_like(self.bias)
        self._cols = None
        self._in_shape = None

    @property
    def params(self):
        return [self.weights, self.bias]

    @property
    def grads(self):
        return [self.grad_weights, self.grad_bias]

    def forward(self, x):
        if x.ndim != 3 or x.shape[0] != self.in_maps:
            raise ShapeMismatchError(f"conv expects ({self.in_maps}, h, w), got {x.shape}")
        k = self.kernel
        _, h, w = x.shape
        if k > h or k > w:
            raise ShapeMismatchError(f"kernel {k} larger than input {h}x{w}")
        oh, ow = h - k + 1, w - k + 1
        # (in, oh, ow, k, k) -> (in*k*k, oh*ow), ordered like weights[o].ravel()
        win = sliding_window_view(x, (k, k), axis=(1, 2))
        cols = win.transpose(0, 3, 4, 1, 2).reshape(self.in_maps * k * k, oh * ow)
        self._cols = cols
        self._in_shape = x.shape
        out = self.weights.reshape(self.out_maps, -1) @ cols
        out += self.bias[:, None]
        return out.reshape(self.out_maps, oh, ow)

    def backward(self, grad_out, need_input_grad: bool = True):
        """Fill ``grad_weights``/``grad_bias`` and return the input gradient (or None)."""
        if self._cols is None:
            raise StaleCacheError("conv backward called before forward")
        k = self.kernel
        _, h, w = self._in_shape
        oh, ow = h - k + 1, w - k + 1
        if grad_out.shape != (self.out_maps, oh, ow):
            raise ShapeMismatchError(f"grad_out shape {grad_out.shape} != {(self.out_maps, oh, ow)}")
        g = grad_out.reshape(self.out_maps, -1)
        self.grad_weights[...] = (g @ self._cols.T).reshape(self.weights.shape)
        self.grad_bias[...] = g.sum(axis=1)
        if not need_input_grad:
            return None
        # col2im: scatter the column gradients back onto overlapping windows
        gcols = (self.weights.reshape(self.out_maps, -1).T @ g).reshape(self.in_maps, k, k, oh, ow)
        grad_in = np.zeros(self._in_shape)
        for u in range(k):
            for v in range(k):
                grad_in[:, u:u + oh, v:v + ow] += gcols[:, u, v]
        return grad_in


class MaxPoolLayer:
    """Non-overlapping p x p max pooling.

    The winner of each region is the first maximum in row-major order.
    Backward routes each output gradient to its winner only.
    """

    def __init__(self, size: int):
        if size < 2:
            raise ValueError("pool size must be >= 2")
        self.size = size
        self.winners = None  # flat in-region index, shape (m, h/p, w/p)
        self._in_shape = None

    params: list = []
    grads: list = []

    def forward(self, x):
        p = self.size
        m, h, w = x.shape
        if h % p or w % p:
            raise ShapeMismatchError(f"pool {p} does not divide {h}x{w}")
        regions = x.reshape(m, h // p, p, w // p, p).transpose(0, 1, 3, 2, 4).reshape(m, h // p, w // p, p * p)
        self.winners = regions.argmax(axis=-1)
        self._in_shape = x.shape
        return regions.max(axis=-1)

    def winner_coords(self):
        """Absolute (row, col) of every region's winner, each shaped (m, h/p, w/p)."""
        if self.winners is None:
            raise StaleCacheError("no forward pass cached")
        p = self.size
        _, oh, ow = self.winners.shape
        rows = np.arange(oh)[:, None] * p + self.winners // p
        cols = np.arange(ow)[None, :] * p + self.winners % p
        return rows, cols

    def backward(self, grad_out, need_input_grad: bool = True):
        if self.winners is None:
            raise StaleCacheError("maxpool backward called before forward")
        if grad_out.shape != self.winners.shape:
            raise ShapeMismatchError(f"grad_out shape {grad_out.shape} != {self.winners.shape}")
        p = self.size
        m, h, w = self._in_shape
        hit = self.winners[..., None] == np.arange(p * p)
        g = hit * grad_out[..., None]
        return g.reshape(m, h // p, w // p, p, p).transpose(0, 1, 3, 2, 4).reshape(m, h, w)


class FullyLayer:
    def __init__(self, in_units: int, out_units: int):
        self.in_units, self.out_units = in_units, out_units
        self.weights = np.zeros((out_units, in_units))
        self.bias = np.zeros(out_units)
        self.grad_weights = np.zeros_like(self.weights)
        self.grad_bias = np.zeros_like(self.bias)
        self._x = None

    @property
    def params(self):
        return [self.weights, self.bias]

    @property
    def grads(self):
        return [self.grad_weights, self.grad_bias]

    def forward(self, x):
        # spatial inputs flatten as [map][row][col]
        x = x.reshape(-1)
        if x.size != self.in_units:
            raise ShapeMismatchError(f"fully layer expects {self.in_units} inputs, got {x.size}")
        self._x = x
        return self.weights @ x + self.bias

    def backward(self, grad_out, need_input_grad: bool = True):
        if self._x is None:
            raise StaleCacheError("fully backward called before forward")
        if grad_out.shape != (self.out_units,):
            raise ShapeMismatchError(f"grad_out shape {grad_out.shape} != ({self.out_units},)")
        np.outer(grad_out, self._x, out=self.grad_weights)
        self.grad_bias[...] = grad_out
        if not need_input_grad:
            return None
        return self.weights.T @ grad_out
