"""Learnable soft prompt for the decoder prefix.

P embedding rows injected between the PREV and SOT slots, where hard text
prompts would otherwise sit. The rows are trainable while the decoder
stays frozen; their label positions are masked out of the loss (the model
never learns to emit them).
"""

from __future__ import annotations

import numpy as np

from .engine import Tensor
from .errors import ConfigError, ShapeError
from .nn import Module

INIT_SCALE = 0.02


class SoftPrompt(Module):
    def __init__(self, length: int, channels: int, rng: np.random.Generator | None = None,
                 dtype=np.float32):
        if length < 0:
            raise ConfigError(f"prompt length must be >= 0, got {length}")
        if rng is None:
            rng = np.random.default_rng(0)
        self.embedding = Tensor(
            rng.normal(0.0, INIT_SCALE, size=(length, channels)).astype(dtype)
        )
        self.embedding.requires_grad = True

    @property
    def length(self) -> int:
        return self.embedding.shape[0]

    @property
    def channels(self) -> int:
        return self.embedding.shape[1]


def init_prompt(length: int, channels: int, rng: np.random.Generator, dtype=np.float32) -> SoftPrompt:
    """Fresh prompt with i.i.d. normal(0, 0.02^2) entries; reproducible from rng."""
    return SoftPrompt(length, channels, rng=rng, dtype=dtype)


def inject(prefix_embeddings: np.ndarray, prompt: SoftPrompt) -> np.ndarray:
    """Insert prompt rows after the leading PREV slot of a raw prefix.

    prefix_embeddings: (5, C) rows for [PREV, SOT, LANG, TRANSCRIBE,
    NO_TIMESTAMP]. Returns (5 + P, C). Position encodings are applied
    after injection, by the decoder.
    """
    emb = np.asarray(prefix_embeddings)
    if emb.ndim != 2 or emb.shape[0] != 5:
        raise ShapeError(f"expected a (5, C) prefix, got {emb.shape}")
    rows = prompt.embedding.data
    if rows.shape[1] != emb.shape[1]:
        raise ShapeError(
            f"prompt channels {rows.shape[1]} != prefix channels {emb.shape[1]}"
        )
    return np.concatenate([emb[:1], rows, emb[1:]], axis=0)
