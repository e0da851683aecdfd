# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled 1-D conv/pool kernels.

Same contract as ``reference.py``: float64 (batch, channels, length)
arrays, padding done by the caller, deterministic single-threaded loops.
"""

import numpy as np


def conv1d_forward(double[:, :, ::1] x, double[:, :, ::1] w,
                   double[::1] b, Py_ssize_t stride):
    cdef Py_ssize_t nb = x.shape[0], nc = x.shape[1], length = x.shape[2]
    cdef Py_ssize_t no = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t lout = (length - k) // stride + 1
    y_arr = np.empty((nb, no, lout), dtype=np.float64)
    cdef double[:, :, ::1] y = y_arr
    cdef Py_ssize_t bi, o, i, c, j, base
    cdef double acc
    with nogil:
        for bi in range(nb):
            for o in range(no):
                for i in range(lout):
                    base = i * stride
                    acc = b[o]
                    for c in range(nc):
                        for j in range(k):
                            acc += w[o, c, j] * x[bi, c, base + j]
                    y[bi, o, i] = acc
    return y_arr


def conv1d_backward(double[:, :, ::1] dy, double[:, :, ::1] x,
                    double[:, :, ::1] w, Py_ssize_t stride):
    cdef Py_ssize_t nb = x.shape[0], nc = x.shape[1], length = x.shape[2]
    cdef Py_ssize_t no = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t lout = dy.shape[2]
    dx_arr = np.zeros((nb, nc, length), dtype=np.float64)
    dw_arr = np.zeros((no, nc, k), dtype=np.float64)
    db_arr = np.zeros(no, dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, :, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t bi, o, i, c, j, base
    cdef double g
    with nogil:
        for bi in range(nb):
            for o in range(no):
                for i in range(lout):
                    g = dy[bi, o, i]
                    base = i * stride
                    db[o] += g
                    for c in range(nc):
                        for j in range(k):
                            dw[o, c, j] += g * x[bi, c, base + j]
                            dx[bi, c, base + j] += g * w[o, c, j]
    return dx_arr, dw_arr, db_arr


def maxpool1d_forward(double[:, :, ::1] x, Py_ssize_t size, Py_ssize_t stride):
    cdef Py_ssize_t nb = x.shape[0], nc = x.shape[1], length = x.shape[2]
    cdef Py_ssize_t lout = (length + stride - 1) // stride
    y_arr = np.empty((nb, nc, lout), dtype=np.float64)
    idx_arr = np.empty((nb, nc, lout), dtype=np.int64)
    cdef double[:, :, ::1] y = y_arr
    cdef long long[:, :, ::1] idx = idx_arr
    cdef Py_ssize_t bi, c, wnd, lo, hi, j, best_j
    cdef double best
    with nogil:
        for bi in range(nb):
            for c in range(nc):
                for wnd in range(lout):
                    lo = wnd * stride
                    hi = lo + size
                    if hi > length:
                        hi = length
                    best = x[bi, c, lo]
                    best_j = lo
                    for j in range(lo + 1, hi):
                        if x[bi, c, j] > best:
                            best = x[bi, c, j]
                            best_j = j
                    y[bi, c, wnd] = best
                    idx[bi, c, wnd] = best_j
    return y_arr, idx_arr


def maxpool1d_backward(double[:, :, ::1] dy, long long[:, :, ::1] idx,
                       Py_ssize_t length):
    cdef Py_ssize_t nb = dy.shape[0], nc = dy.shape[1], lout = dy.shape[2]
    dx_arr = np.zeros((nb, nc, length), dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef Py_ssize_t bi, c, i
    with nogil:
        for bi in range(nb):
            for c in range(nc):
                for i in range(lout):
                    dx[bi, c, idx[bi, c, i]] += dy[bi, c, i]
    return dx_arr
