"""Numba-jitted implementations of the hot kernels.

Loop order matches the numpy fallback so both backends produce the same
floating point results on the same inputs.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def _depthwise_conv1d(x, w, dilation, pad):
    n, c, t = x.shape
    k = w.shape[1]
    y = np.zeros_like(x)
    for nc in prange(n * c):
        i = nc // c
        ch = nc % c
        for j in range(k):
            shift = j * dilation - pad
            lo = max(0, -shift)
            hi = min(t, t - shift)
            wj = w[ch, j]
            for s in range(lo, hi):
                y[i, ch, s] += wj * x[i, ch, s + shift]
    return y


@njit(cache=True, parallel=True)
def _depthwise_conv1d_gx(w, dilation, pad, gy):
    n, c, t = gy.shape
    k = w.shape[1]
    gx = np.zeros_like(gy)
    for nc in prange(n * c):
        i = nc // c
        ch = nc % c
        for j in range(k):
            shift = pad - j * dilation
            lo = max(0, -shift)
            hi = min(t, t - shift)
            wj = w[ch, j]
            for s in range(lo, hi):
                gx[i, ch, s] += wj * gy[i, ch, s + shift]
    return gx


@njit(cache=True, parallel=True)
def _depthwise_conv1d_gw(x, gy, dilation, pad, k):
    n, c, t = x.shape
    gw = np.zeros((c, k), dtype=x.dtype)
    for ch in prange(c):
        for j in range(k):
            shift = j * dilation - pad
            lo = max(0, -shift)
            hi = min(t, t - shift)
            acc = 0.0
            for i in range(n):
                for s in range(lo, hi):
                    acc += gy[i, ch, s] * x[i, ch, s + shift]
            gw[ch, j] = acc
    return gw


def depthwise_conv1d(x: np.ndarray, w: np.ndarray, dilation: int) -> np.ndarray:
    pad = dilation * (w.shape[1] - 1) // 2
    return _depthwise_conv1d(x, w, dilation, pad)


def depthwise_conv1d_grad(
    x: np.ndarray, w: np.ndarray, dilation: int, gy: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    k = w.shape[1]
    pad = dilation * (k - 1) // 2
    gx = _depthwise_conv1d_gx(w, dilation, pad, gy)
    gw = _depthwise_conv1d_gw(x, gy, dilation, pad, k)
    return gx, gw


_GELU_C = 0.7978845608028654  # sqrt(2/pi)


@njit(cache=True, parallel=True, fastmath=True)
def _gelu_flat(x, y, t):
    for i in prange(x.size):
        v = x[i]
        u = _GELU_C * (v + 0.044715 * v * v * v)
        ti = np.tanh(u)
        t[i] = ti
        y[i] = 0.5 * v * (1.0 + ti)


def gelu(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y = np.empty_like(x)
    t = np.empty_like(x)
    _gelu_flat(x.ravel(), y.ravel(), t.ravel())
    return y, t


@njit(cache=True, parallel=True, fastmath=True)
def _gelu_grad_flat(x, t, g, out):
    for i in prange(x.size):
        v = x[i]
        ti = t[i]
        du = _GELU_C * (1.0 + 0.134145 * v * v)
        out[i] = g[i] * (0.5 * (1.0 + ti) + 0.5 * v * (1.0 - ti * ti) * du)


def gelu_grad(x: np.ndarray, t: np.ndarray, g: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    _gelu_grad_flat(x.ravel(), t.ravel(), np.ascontiguousarray(g).ravel(), out.ravel())
    return out


@njit(cache=True, parallel=True, fastmath=True)
def _sigmoid_flat(x, out):
    for i in prange(x.size):
        v = x[i]
        if v >= 0:
            out[i] = 1.0 / (1.0 + np.exp(-v))
        else:
            e = np.exp(v)
            out[i] = e / (1.0 + e)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    _sigmoid_flat(x.ravel(), out.ravel())
    return out


@njit(cache=True, parallel=True, fastmath=True)
def _sigmoid_grad_flat(y, g, out):
    for i in prange(y.size):
        out[i] = g[i] * y[i] * (1.0 - y[i])


def sigmoid_grad(y: np.ndarray, g: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    _sigmoid_grad_flat(y.ravel(), np.ascontiguousarray(g).ravel(), out.ravel())
    return out


@njit(cache=True, parallel=True, fastmath=True)
def _softmax_rows(x, out):
    rows, width = x.shape
    for r in prange(rows):
        m = x[r, 0]
        for j in range(1, width):
            if x[r, j] > m:
                m = x[r, j]
        total = 0.0
        for j in range(width):
            e = np.exp(x[r, j] - m)
            out[r, j] = e
            total += e
        inv = 1.0 / total
        for j in range(width):
            out[r, j] *= inv


def softmax_last(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    width = x.shape[-1]
    _softmax_rows(
        np.ascontiguousarray(x).reshape(-1, width), out.reshape(-1, width)
    )
    return out


@njit(cache=True, parallel=True, fastmath=True)
def _softmax_grad_rows(y, g, out):
    rows, width = y.shape
    for r in prange(rows):
        dot = 0.0
        for j in range(width):
            dot += y[r, j] * g[r, j]
        for j in range(width):
            out[r, j] = y[r, j] * (g[r, j] - dot)


def softmax_last_grad(y: np.ndarray, g: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    width = y.shape[-1]
    _softmax_grad_rows(
        np.ascontiguousarray(y).reshape(-1, width),
        np.ascontiguousarray(g).reshape(-1, width),
        out.reshape(-1, width),
    )
    return out


@njit(cache=True)
def _edit_counts(ref, hyp):
    r = ref.shape[0]
    h = hyp.shape[0]
    d = np.empty((r + 1, h + 1), dtype=np.int64)
    for i in range(r + 1):
        d[i, 0] = i
    for j in range(h + 1):
        d[0, j] = j
    for i in range(1, r + 1):
        for j in range(1, h + 1):
            sub = d[i - 1, j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1)
            ins = d[i, j - 1] + 1
            dele = d[i - 1, j] + 1
            best = sub
            if ins < best:
                best = ins
            if dele < best:
                best = dele
            d[i, j] = best
    n_sub = 0
    n_del = 0
    n_ins = 0
    i = r
    j = h
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1):
            if ref[i - 1] != hyp[j - 1]:
                n_sub += 1
            i -= 1
            j -= 1
        elif j > 0 and d[i, j] == d[i, j - 1] + 1:
            n_ins += 1
            j -= 1
        else:
            n_del += 1
            i -= 1
    return n_sub, n_del, n_ins


def edit_counts(ref: np.ndarray, hyp: np.ndarray) -> tuple[int, int, int]:
    s, dl, ins = _edit_counts(
        np.ascontiguousarray(ref, dtype=np.int64),
        np.ascontiguousarray(hyp, dtype=np.int64),
    )
    return int(s), int(dl), int(ins)
