"""Pure-numpy reference kernels for the 1-D conv/pool hot loops.

Semantics shared with the compiled backend:

* Inputs are float64 ``(batch, channels, length)`` arrays, already padded
  by the caller; no padding logic here.
* ``conv1d_forward`` output length is ``(L - K) // stride + 1``.
* Max-pool windows start every ``stride`` samples and are truncated at the
  right edge, so the output length is ``ceil(L / stride)``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                   stride: int) -> np.ndarray:
    windows = sliding_window_view(x, w.shape[2], axis=2)[:, :, ::stride, :]
    y = np.tensordot(windows, w, axes=([1, 3], [1, 2]))  # (B, Lout, O)
    return np.ascontiguousarray(y.transpose(0, 2, 1)) + b[None, :, None]


def conv1d_backward(dy: np.ndarray, x: np.ndarray, w: np.ndarray,
                    stride: int):
    k = w.shape[2]
    lout = dy.shape[2]
    windows = sliding_window_view(x, k, axis=2)[:, :, ::stride, :]
    dw = np.tensordot(dy, windows, axes=([0, 2], [0, 2]))
    db = dy.sum(axis=(0, 2))
    dcols = np.tensordot(dy, w, axes=([1], [0]))  # (B, Lout, C, K)
    dx = np.zeros_like(x)
    starts = np.arange(lout) * stride
    for j in range(k):
        # fixed j hits distinct positions, so fancy += has no collisions
        dx[:, :, starts + j] += dcols[:, :, :, j].transpose(0, 2, 1)
    return dx, dw, db


def maxpool1d_forward(x: np.ndarray, size: int, stride: int):
    n_batch, n_ch, length = x.shape
    lout = -(-length // stride)
    y = np.empty((n_batch, n_ch, lout))
    idx = np.empty((n_batch, n_ch, lout), dtype=np.int64)
    for wnd in range(lout):
        lo = wnd * stride
        hi = min(lo + size, length)
        seg = x[:, :, lo:hi]
        am = np.argmax(seg, axis=2)
        y[:, :, wnd] = np.take_along_axis(seg, am[:, :, None], axis=2)[:, :, 0]
        idx[:, :, wnd] = am + lo
    return y, idx


def maxpool1d_backward(dy: np.ndarray, idx: np.ndarray, length: int) -> np.ndarray:
    n_batch, n_ch, lout = dy.shape
    dx = np.zeros((n_batch, n_ch, length))
    rows = (np.arange(n_batch)[:, None, None] * n_ch
            + np.arange(n_ch)[None, :, None])
    np.add.at(dx.reshape(-1), (rows * length + idx).ravel(), dy.ravel())
    return dx
