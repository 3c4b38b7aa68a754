"""Small float64 neural-net engine: layers with analytic backprop, plus Adam.

This powers the hermetic ``tiny_test`` backbone and the classification head.
It is written for correctness and determinism, not throughput: inputs are
channels-last (B, H, W, C) arrays, convolution goes through an explicit
im2col buffer, and everything stays in float64 so gradient checks against
central finite differences are meaningful.
"""

from __future__ import annotations

import numpy as np


class Parameter:
    """A named trainable array with its gradient accumulator."""

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


class Layer:
    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> list[Parameter]:
        return []


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, name: str):
        scale = np.sqrt(2.0 / n_in)
        self.weight = Parameter(f"{name}.weight", rng.normal(0.0, scale, size=(n_in, n_out)))
        self.bias = Parameter(f"{name}.bias", np.zeros(n_out))
        self._x: np.ndarray | None = None

    def forward(self, x, train=False):
        # inference stores nothing, so concurrent read-only calls are safe
        if train:
            self._x = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad_out):
        self.weight.grad += self._x.T @ grad_out
        self.bias.grad += grad_out.sum(axis=0)
        return grad_out @ self.weight.value.T

    def parameters(self):
        return [self.weight, self.bias]


class ReLU(Layer):
    def forward(self, x, train=False):
        mask = x > 0
        if train:
            self._mask = mask
        return x * mask

    def backward(self, grad_out):
        return grad_out * self._mask


class Conv2d(Layer):
    """3x3-style same-padding convolution, stride 1, via im2col."""

    def __init__(self, c_in: int, c_out: int, ksize: int,
                 rng: np.random.Generator, name: str):
        self.c_in = c_in
        self.c_out = c_out
        self.ksize = ksize
        scale = np.sqrt(2.0 / (ksize * ksize * c_in))
        self.weight = Parameter(
            f"{name}.weight", rng.normal(0.0, scale, size=(ksize * ksize * c_in, c_out))
        )
        self.bias = Parameter(f"{name}.bias", np.zeros(c_out))
        self._cols: np.ndarray | None = None
        self._x_shape: tuple | None = None

    def _im2col(self, x: np.ndarray) -> np.ndarray:
        b, h, w, c = x.shape
        k = self.ksize
        pad = k // 2
        xpad = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
        cols = np.empty((b, h, w, k * k * c), dtype=np.float64)
        for ki in range(k):
            for kj in range(k):
                tap = (ki * k + kj) * c
                cols[..., tap:tap + c] = xpad[:, ki:ki + h, kj:kj + w, :]
        return cols

    def forward(self, x, train=False):
        b, h, w, c = x.shape
        if c != self.c_in:
            raise ValueError(f"expected {self.c_in} channels, got {c}")
        cols = self._im2col(x)
        if train:
            self._x_shape = x.shape
            self._cols = cols
        out = cols.reshape(-1, cols.shape[-1]) @ self.weight.value + self.bias.value
        return out.reshape(b, h, w, self.c_out)

    def backward(self, grad_out):
        b, h, w, _ = self._x_shape
        k = self.ksize
        pad = k // 2
        g = grad_out.reshape(-1, self.c_out)
        cols_flat = self._cols.reshape(-1, self._cols.shape[-1])
        self.weight.grad += cols_flat.T @ g
        self.bias.grad += g.sum(axis=0)
        dcols = (g @ self.weight.value.T).reshape(b, h, w, -1)
        dxpad = np.zeros((b, h + 2 * pad, w + 2 * pad, self.c_in))
        for ki in range(k):
            for kj in range(k):
                tap = (ki * k + kj) * self.c_in
                dxpad[:, ki:ki + h, kj:kj + w, :] += dcols[..., tap:tap + self.c_in]
        return dxpad[:, pad:pad + h, pad:pad + w, :]

    def parameters(self):
        return [self.weight, self.bias]


class MaxPool2d(Layer):
    """2x2 max pooling with stride 2; input sides must be even."""

    def forward(self, x, train=False):
        b, h, w, c = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"pooling needs even sides, got {h}x{w}")
        windows = (
            x.reshape(b, h // 2, 2, w // 2, 2, c)
            .transpose(0, 1, 3, 2, 4, 5)
            .reshape(b, h // 2, w // 2, 4, c)
        )
        idx = windows.argmax(axis=3)
        if train:
            self._idx = idx
            self._in_shape = x.shape
        return np.take_along_axis(windows, idx[:, :, :, None, :], axis=3).squeeze(3)

    def backward(self, grad_out):
        b, h, w, c = self._in_shape
        dwindows = np.zeros((b, h // 2, w // 2, 4, c))
        np.put_along_axis(
            dwindows, self._idx[:, :, :, None, :], grad_out[:, :, :, None, :], axis=3
        )
        return (
            dwindows.reshape(b, h // 2, w // 2, 2, 2, c)
            .transpose(0, 1, 3, 2, 4, 5)
            .reshape(b, h, w, c)
        )


class GlobalAvgPool(Layer):
    def forward(self, x, train=False):
        if train:
            self._in_shape = x.shape
        return x.mean(axis=(1, 2))

    def backward(self, grad_out):
        b, h, w, c = self._in_shape
        return np.broadcast_to(
            grad_out[:, None, None, :] / (h * w), (b, h, w, c)
        ).copy()


class Sequential(Layer):
    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def backward(self, grad_out):
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]


class Adam:
    """Adaptive-moment gradient descent over a fixed parameter list."""

    def __init__(self, params: list[Parameter], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.value) for p in params]
        self._v = [np.zeros_like(p.value) for p in params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            m[...] = self.beta1 * m + (1.0 - self.beta1) * p.grad
            v[...] = self.beta2 * v + (1.0 - self.beta2) * p.grad ** 2
            m_hat = m / correction1
            v_hat = v / correction2
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
