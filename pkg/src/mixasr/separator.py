"""Temporal convolutional separator attached inside the encoder.

Estimates one multiplicative mask per talker from the mixed embedding at
the encoder split point and applies them, turning (B, T, C) into a
branch-major (B*S, T, C) set of per-talker embeddings. Mask estimation
follows the Conv-TasNet recipe: a bottleneck pointwise conv, R repeats of
K dilated residual blocks (dilation 2^k within each repeat), and a
pointwise conv producing S*C sigmoid mask logits. Masks act in the
original embedding space, so all-ones masks are a true identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .engine import Tensor
from .errors import ConfigError, ShapeError
from .nn import GlobalLayerNorm, Module, param, zeros_param


@dataclass
class SidecarConfig:
    n_blocks_per_repeat: int = 8  # K: dilations 1..2^(K-1)
    n_repeats: int = 3  # R
    kernel_size: int = 3
    bottleneck_channels: int | None = None  # defaults to C
    hidden_channels: int | None = None  # defaults to 2C
    n_speakers: int = 2

    def validate(self) -> None:
        if self.n_blocks_per_repeat < 1 or self.n_repeats < 1:
            raise ConfigError("need at least one dilated block")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError("kernel_size must be odd for same-length padding")
        if self.n_speakers < 1:
            raise ConfigError("n_speakers must be >= 1")

    def dilation_schedule(self) -> list[int]:
        """Dilations of all K*R blocks in network order."""
        per_repeat = [2 ** k for k in range(self.n_blocks_per_repeat)]
        return per_repeat * self.n_repeats


def receptive_field(config: SidecarConfig) -> int:
    """Frames seen by one output frame of the dilated-depthwise path."""
    growth = sum(
        (config.kernel_size - 1) * d for d in config.dilation_schedule()
    )
    return 1 + growth


class TemporalBlock(Module):
    """Pointwise conv -> PReLU -> gLN -> dilated depthwise -> PReLU -> gLN
    -> pointwise back to the bottleneck width, added residually."""

    def __init__(self, rng, bottleneck: int, hidden: int, kernel_size: int, dilation: int, dtype):
        self.dilation = dilation
        self.in_w = param(rng, (hidden, bottleneck, 1), bottleneck ** -0.5, dtype)
        self.in_b = zeros_param((hidden,), dtype)
        self.in_act = Tensor(np.full(1, 0.25, dtype=dtype))
        self.in_act.requires_grad = True
        self.in_norm = GlobalLayerNorm(hidden, dtype)
        self.dw_w = param(rng, (hidden, kernel_size), kernel_size ** -0.5, dtype)
        self.dw_act = Tensor(np.full(1, 0.25, dtype=dtype))
        self.dw_act.requires_grad = True
        self.dw_norm = GlobalLayerNorm(hidden, dtype)
        self.out_w = param(rng, (bottleneck, hidden, 1), hidden ** -0.5, dtype)
        self.out_b = zeros_param((bottleneck,), dtype)

    def __call__(self, x):
        y = engine.conv1d(x, self.in_w, self.in_b)
        y = self.in_norm(engine.prelu(y, self.in_act))
        y = engine.depthwise_conv1d(y, self.dw_w, dilation=self.dilation)
        y = self.dw_norm(engine.prelu(y, self.dw_act))
        y = engine.conv1d(y, self.out_w, self.out_b)
        return x + y


class Sidecar(Module):
    """Mask estimator plus the pre/post pointwise convolutions."""

    def __init__(self, config: SidecarConfig, channels: int, dtype, seed: int = 0):
        config.validate()
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0x51)))
        self.config = config
        self.channels = channels
        bottleneck = config.bottleneck_channels or channels
        hidden = config.hidden_channels or 2 * channels
        self.input_norm = GlobalLayerNorm(channels, dtype)
        self.pre_w = param(rng, (bottleneck, channels, 1), channels ** -0.5, dtype)
        self.pre_b = zeros_param((bottleneck,), dtype)
        self.blocks = [
            TemporalBlock(rng, bottleneck, hidden, config.kernel_size, d, dtype)
            for d in config.dilation_schedule()
        ]
        self.post_w = param(
            rng, (config.n_speakers * channels, bottleneck, 1), bottleneck ** -0.5, dtype
        )
        self.post_b = zeros_param((config.n_speakers * channels,), dtype)

    def estimate_masks(self, mixed):
        """Masks (B, S, T, C) in (0, 1) from a mixed embedding (B, T, C)."""
        if mixed.shape[-1] != self.channels:
            raise ShapeError(
                f"sidecar built for {self.channels} channels, got {mixed.shape[-1]}"
            )
        b, t, c = mixed.shape
        s = self.config.n_speakers
        x = engine.transpose(mixed, (0, 2, 1))  # (B, C, T)
        x = self.input_norm(x)
        x = engine.conv1d(x, self.pre_w, self.pre_b)
        for block in self.blocks:
            x = block(x)
        logits = engine.conv1d(x, self.post_w, self.post_b)  # (B, S*C, T)
        masks = engine.sigmoid(logits)
        masks = engine.reshape(masks, (b, s, c, t))
        return engine.transpose(masks, (0, 1, 3, 2))  # (B, S, T, C)

    def separate(self, mixed):
        """estimate_masks followed by apply_masks; differentiable end to end."""
        return apply_masks(mixed, self.estimate_masks(mixed))


def apply_masks(mixed, masks):
    """Elementwise-multiply each talker mask with the mixed embedding.

    mixed: (B, T, C); masks: (B, S, T, C). Returns branch-major
    (B*S, T, C): branches of example b occupy rows b*S .. b*S+S-1.
    """
    mixed = engine.astensor(mixed)
    masks = engine.astensor(masks)
    if masks.ndim != 4 or mixed.ndim != 3 or masks.shape[::2] != (mixed.shape[0], mixed.shape[1]) or masks.shape[3] != mixed.shape[2]:
        raise ShapeError(f"mask shape {masks.shape} inconsistent with mixed {mixed.shape}")
    b, s, t, c = masks.shape
    mixed4 = engine.reshape(mixed, (b, 1, t, c))
    branches = engine.mul(mixed4, masks)
    return engine.reshape(branches, (b * s, t, c))


def branch_major_to_grouped(x, n_speakers: int):
    """Reshape (B*S, T, C) -> (B, S, T, C); lossless round-trip."""
    n, t, c = x.shape
    if n % n_speakers:
        raise ShapeError(f"leading dim {n} not divisible by S={n_speakers}")
    return engine.reshape(x, (n // n_speakers, n_speakers, t, c))
