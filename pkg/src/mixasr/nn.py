"""Parameter containers and the layers shared by the models.

Modules discover their parameters by introspection over instance
attributes (Tensors, sub-Modules, and lists of either), so checkpoint
names follow attribute paths, e.g. "encoder.blocks.0.attn.query.weight".
"""

from __future__ import annotations

import numpy as np

from .engine import Tensor, gelu, matmul, normalize, softmax, transpose
from .errors import ShapeError


class Module:
    def named_parameters(self, prefix: str = ""):
        for name, val in vars(self).items():
            if isinstance(val, Tensor):
                yield prefix + name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{prefix}{name}.")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Tensor):
                        yield f"{prefix}{name}.{i}", item
                    elif isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def set_requires_grad(self, flag: bool) -> None:
        for p in self.parameters():
            p.requires_grad = flag

    def num_parameters(self) -> int:
        return sum(int(p.data.size) for p in self.parameters())


def param(rng: np.random.Generator, shape, scale: float, dtype) -> Tensor:
    t = Tensor(rng.normal(0.0, scale, size=shape).astype(dtype))
    t.requires_grad = True
    return t


def zeros_param(shape, dtype) -> Tensor:
    t = Tensor(np.zeros(shape, dtype=dtype))
    t.requires_grad = True
    return t


class Linear(Module):
    def __init__(self, rng, n_in: int, n_out: int, dtype, bias: bool = True):
        self.weight = param(rng, (n_in, n_out), n_in ** -0.5, dtype)
        self.bias = zeros_param((n_out,), dtype) if bias else None

    def __call__(self, x):
        y = matmul(x, self.weight)
        if self.bias is not None:
            y = y + self.bias
        return y


class LayerNorm(Module):
    def __init__(self, n: int, dtype, eps: float = 1e-5):
        self.weight = Tensor(np.ones(n, dtype=dtype))
        self.weight.requires_grad = True
        self.bias = zeros_param((n,), dtype)
        self.eps = eps

    def __call__(self, x):
        return normalize(x, axes=(-1,), eps=self.eps) * self.weight + self.bias


class GlobalLayerNorm(Module):
    """Conv-TasNet gLN: normalize over (channel, time) with per-channel affine.

    Input layout (N, C, T).
    """

    def __init__(self, channels: int, dtype, eps: float = 1e-5):
        self.weight = Tensor(np.ones((channels, 1), dtype=dtype))
        self.weight.requires_grad = True
        self.bias = zeros_param((channels, 1), dtype)
        self.eps = eps

    def __call__(self, x):
        return normalize(x, axes=(1, 2), eps=self.eps) * self.weight + self.bias


class Embedding(Module):
    def __init__(self, rng, n_embeddings: int, dim: int, dtype, scale: float = 0.02):
        self.weight = param(rng, (n_embeddings, dim), scale, dtype)


class MultiHeadAttention(Module):
    def __init__(self, rng, channels: int, n_heads: int, dtype):
        if channels % n_heads:
            raise ShapeError(f"channels {channels} not divisible by heads {n_heads}")
        self.n_heads = n_heads
        self.query = Linear(rng, channels, channels, dtype)
        self.key = Linear(rng, channels, channels, dtype, bias=False)
        self.value = Linear(rng, channels, channels, dtype)
        self.out = Linear(rng, channels, channels, dtype)

    def __call__(self, x, xa=None, bias: np.ndarray | None = None):
        """x: (N, Tq, C) queries; xa: (N, Tk, C) keys/values (self-attn if None).

        bias: additive attention bias broadcastable to (N, heads, Tq, Tk);
        use large negative values to mask keys (padding, causality).
        """
        source = x if xa is None else xa
        n, tq, c = x.shape
        tk = source.shape[1]
        h = self.n_heads
        d = c // h
        q = self.query(x).reshape((n, tq, h, d)).transpose(0, 2, 1, 3)
        k = self.key(source).reshape((n, tk, h, d)).transpose(0, 2, 1, 3)
        v = self.value(source).reshape((n, tk, h, d)).transpose(0, 2, 1, 3)
        scores = matmul(q, transpose(k, (0, 1, 3, 2))) * (d ** -0.5)
        if bias is not None:
            scores = scores + bias
        weights = softmax(scores, axis=-1)
        mix = matmul(weights, v)  # (N, h, Tq, d)
        return self.out(mix.transpose(0, 2, 1, 3).reshape((n, tq, c)))


class MLP(Module):
    def __init__(self, rng, channels: int, hidden: int, dtype):
        self.fc1 = Linear(rng, channels, hidden, dtype)
        self.fc2 = Linear(rng, hidden, channels, dtype)

    def __call__(self, x):
        return self.fc2(gelu(self.fc1(x)))


class EncoderBlock(Module):
    """Pre-norm transformer block: self-attention then MLP."""

    def __init__(self, rng, channels: int, n_heads: int, dtype, mlp_ratio: int = 4):
        self.attn_ln = LayerNorm(channels, dtype)
        self.attn = MultiHeadAttention(rng, channels, n_heads, dtype)
        self.mlp_ln = LayerNorm(channels, dtype)
        self.mlp = MLP(rng, channels, mlp_ratio * channels, dtype)

    def __call__(self, x, bias=None):
        x = x + self.attn(self.attn_ln(x), bias=bias)
        return x + self.mlp(self.mlp_ln(x))


class DecoderBlock(Module):
    """Pre-norm transformer block with causal self- and cross-attention."""

    def __init__(self, rng, channels: int, n_heads: int, dtype, mlp_ratio: int = 4):
        self.attn_ln = LayerNorm(channels, dtype)
        self.attn = MultiHeadAttention(rng, channels, n_heads, dtype)
        self.cross_ln = LayerNorm(channels, dtype)
        self.cross = MultiHeadAttention(rng, channels, n_heads, dtype)
        self.mlp_ln = LayerNorm(channels, dtype)
        self.mlp = MLP(rng, channels, mlp_ratio * channels, dtype)

    def __call__(self, x, enc, causal_bias, cross_bias=None):
        x = x + self.attn(self.attn_ln(x), bias=causal_bias)
        x = x + self.cross(self.cross_ln(x), xa=enc, bias=cross_bias)
        return x + self.mlp(self.mlp_ln(x))


def sinusoids(length: int, channels: int, dtype, max_timescale: float = 10000.0) -> np.ndarray:
    """Fixed sinusoidal position encodings, (length, channels)."""
    if channels % 2:
        raise ShapeError("sinusoid channels must be even")
    log_inc = np.log(max_timescale) / (channels // 2 - 1)
    inv = np.exp(-log_inc * np.arange(channels // 2))
    angles = np.arange(length)[:, None] * inv[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1).astype(dtype)


def causal_bias(length: int, dtype, neg: float = -1e9) -> np.ndarray:
    """Additive (1, 1, L, L) bias masking future positions."""
    m = np.triu(np.full((length, length), neg, dtype=dtype), k=1)
    return m[None, None]


def length_bias(lengths: np.ndarray, max_len: int, dtype, neg: float = -1e9) -> np.ndarray:
    """Additive (N, 1, 1, max_len) key-padding bias from valid lengths."""
    idx = np.arange(max_len)[None, :]
    mask = idx >= np.asarray(lengths)[:, None]
    out = np.where(mask, neg, 0.0).astype(dtype)
    return out[:, None, None, :]
