"""Layer zoo for small 1-D convolutional classifiers.

Every layer caches what its backward pass needs during ``forward`` and is
therefore single-use per step; inference with ``train=False`` skips the
caching. Activations flow as float64 ``(batch, channels, length)`` arrays
until ``Flatten``, then ``(batch, features)``.

Convolutions use "same" padding before the stride, so the output length is
``ceil(L / stride)`` and never underflows on short inputs; pooling windows
are right-truncated with the same ceil semantics.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from . import kernels


class Parameter:
    """A trainable array and its gradient accumulator."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)


def he_uniform(shape, fan_in: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    def params(self) -> list[Parameter]:
        return []

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def out_length(self, length: int) -> int:
        """Spatial length after this layer (identity unless overridden)."""
        return length

    def spec(self) -> dict:
        raise NotImplementedError


class Conv1D(Layer):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, rng: np.random.Generator | None = None):
        if kernel_size < 1 or stride < 1:
            raise ShapeMismatch("kernel_size and stride must be >= 1")
        rng = rng or np.random.default_rng()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.w = Parameter("w", he_uniform(
            (out_channels, in_channels, kernel_size),
            fan_in=in_channels * kernel_size, rng=rng))
        self.b = Parameter("b", np.zeros(out_channels))
        self._cache = None

    def params(self):
        return [self.w, self.b]

    def out_length(self, length: int) -> int:
        return -(-length // self.stride)

    def _padding(self, length: int) -> tuple[int, int]:
        lout = self.out_length(length)
        total = max((lout - 1) * self.stride + self.kernel_size - length, 0)
        return total // 2, total - total // 2

    def forward(self, x, train=True):
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeMismatch(
                f"expected (batch, {self.in_channels}, L) input, got {x.shape}")
        left, right = self._padding(x.shape[2])
        xp = np.pad(x, ((0, 0), (0, 0), (left, right)))
        y = kernels.conv1d_forward(xp, self.w.value, self.b.value, self.stride)
        if train:
            self._cache = (xp, left, x.shape[2])
        return y

    def backward(self, dy):
        xp, left, length = self._cache
        self._cache = None
        dxp, dw, db = kernels.conv1d_backward(
            np.ascontiguousarray(dy), xp, self.w.value, self.stride)
        self.w.grad += dw
        self.b.grad += db
        return dxp[:, :, left:left + length]

    def spec(self):
        return {"kind": "conv1d", "in_channels": self.in_channels,
                "out_channels": self.out_channels,
                "kernel_size": self.kernel_size, "stride": self.stride}


class ReLU(Layer):
    """max(0, x) on every element."""

    def __init__(self):
        self._mask = None

    def forward(self, x, train=True):
        if train:
            self._mask = x > 0
        return np.maximum(x, 0.0)

    def backward(self, dy):
        mask, self._mask = self._mask, None
        return dy * mask

    def spec(self):
        return {"kind": "relu"}


class MaxPool1D(Layer):
    def __init__(self, size: int = 2, stride: int = 2):
        self.size = size
        self.stride = stride
        self._cache = None

    def out_length(self, length: int) -> int:
        return -(-length // self.stride)

    def forward(self, x, train=True):
        y, idx = kernels.maxpool1d_forward(np.ascontiguousarray(x),
                                           self.size, self.stride)
        if train:
            self._cache = (idx, x.shape[2])
        return y

    def backward(self, dy):
        idx, length = self._cache
        self._cache = None
        return kernels.maxpool1d_backward(np.ascontiguousarray(dy), idx, length)

    def spec(self):
        return {"kind": "maxpool1d", "size": self.size, "stride": self.stride}


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def forward(self, x, train=True):
        if train:
            self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        shape, self._shape = self._shape, None
        return dy.reshape(shape)

    def spec(self):
        return {"kind": "flatten"}


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng()
        self.in_features = in_features
        self.out_features = out_features
        self.w = Parameter("w", he_uniform((in_features, out_features),
                                           fan_in=in_features, rng=rng))
        self.b = Parameter("b", np.zeros(out_features))
        self._x = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x, train=True):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(
                f"expected (batch, {self.in_features}) input, got {x.shape}")
        if train:
            self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, dy):
        x, self._x = self._x, None
        self.w.grad += x.T @ dy
        self.b.grad += dy.sum(axis=0)
        return dy @ self.w.value.T

    def spec(self):
        return {"kind": "dense", "in_features": self.in_features,
                "out_features": self.out_features}


_LAYER_KINDS = {
    "conv1d": lambda s: Conv1D(s["in_channels"], s["out_channels"],
                               s["kernel_size"], s["stride"]),
    "relu": lambda s: ReLU(),
    "maxpool1d": lambda s: MaxPool1D(s["size"], s["stride"]),
    "flatten": lambda s: Flatten(),
    "dense": lambda s: Dense(s["in_features"], s["out_features"]),
}


def layer_from_spec(spec: dict) -> Layer:
    try:
        return _LAYER_KINDS[spec["kind"]](spec)
    except KeyError as exc:
        raise ShapeMismatch(f"unknown layer spec {spec!r}") from exc
