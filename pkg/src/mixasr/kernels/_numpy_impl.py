"""Pure-numpy implementations of the hot kernels.

These are the reference/fallback implementations used when numba is
unavailable or disabled via MIXASR_DISABLE_NUMBA. They must match the
numba versions bit-for-bit on float64 inputs (same operation order per
output element, associativity differences aside they are checked to
agree within tight tolerances by tests/test_kernels.py).
"""

from __future__ import annotations

import numpy as np


def depthwise_conv1d(x: np.ndarray, w: np.ndarray, dilation: int) -> np.ndarray:
    """Depthwise dilated 1-D convolution with same-length zero padding.

    x: (N, C, T), w: (C, K) with K odd. Output (N, C, T).
    """
    n, c, t = x.shape
    k = w.shape[1]
    pad = dilation * (k - 1) // 2
    xp = np.zeros((n, c, t + 2 * pad), dtype=x.dtype)
    xp[:, :, pad:pad + t] = x
    y = np.zeros_like(x)
    for j in range(k):
        y += w[:, j][None, :, None] * xp[:, :, j * dilation:j * dilation + t]
    return y


def depthwise_conv1d_grad(
    x: np.ndarray, w: np.ndarray, dilation: int, gy: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of depthwise_conv1d w.r.t. input and weights."""
    n, c, t = x.shape
    k = w.shape[1]
    pad = dilation * (k - 1) // 2
    gyp = np.zeros((n, c, t + 2 * pad), dtype=gy.dtype)
    gyp[:, :, pad:pad + t] = gy
    gx = np.zeros_like(x)
    for j in range(k):
        off = 2 * pad - j * dilation
        gx += w[:, j][None, :, None] * gyp[:, :, off:off + t]
    xp = np.zeros((n, c, t + 2 * pad), dtype=x.dtype)
    xp[:, :, pad:pad + t] = x
    gw = np.zeros_like(w)
    for j in range(k):
        gw[:, j] = np.einsum("nct,nct->c", gy, xp[:, :, j * dilation:j * dilation + t])
    return gx, gw


_GELU_C = 0.7978845608028654  # sqrt(2/pi)


def gelu(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """tanh-approximation GELU; returns (value, tanh term for the backward)."""
    u = _GELU_C * (x + 0.044715 * x * x * x)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), t


def gelu_grad(x: np.ndarray, t: np.ndarray, g: np.ndarray) -> np.ndarray:
    du = _GELU_C * (1.0 + 0.134145 * x * x)
    return g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_grad(y: np.ndarray, g: np.ndarray) -> np.ndarray:
    return g * y * (1.0 - y)


def softmax_last(x: np.ndarray) -> np.ndarray:
    """Softmax over the trailing axis."""
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_last_grad(y: np.ndarray, g: np.ndarray) -> np.ndarray:
    dot = (g * y).sum(axis=-1, keepdims=True)
    return y * (g - dot)


def edit_counts(ref: np.ndarray, hyp: np.ndarray) -> tuple[int, int, int]:
    """Levenshtein alignment counts (substitutions, deletions, insertions).

    ref, hyp: 1-D integer arrays of token ids. Ties during backtrace
    prefer substitution over insertion over deletion.
    """
    r, h = len(ref), len(hyp)
    d = np.zeros((r + 1, h + 1), dtype=np.int64)
    d[:, 0] = np.arange(r + 1)
    d[0, :] = np.arange(h + 1)
    for i in range(1, r + 1):
        for j in range(1, h + 1):
            sub = d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            ins = d[i, j - 1] + 1
            dele = d[i - 1, j] + 1
            d[i, j] = min(sub, ins, dele)
    n_sub = n_del = n_ins = 0
    i, j = r, h
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
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
