"""Target Talker Identifier.

Scores each talker branch from the encoder-output frames that align with
the enrollment audio (the first enrollment_seconds * 50 frames) and
softmaxes the per-branch scores, giving the probability that each branch
carries the target talker. Scoring shares weights across branches, so the
module is equivariant to branch permutations and agnostic to S.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .errors import SegmentError, ShapeError
from .nn import Linear, Module

ENROLLMENT_FRAMES = 150  # 3 s at 20 ms per encoder frame


@dataclass
class PrefixSplit:
    prefix: object  # (B*S, L_p, C)
    main: object  # (B*S, T - L_p, C)
    prefix_frames: int


def split_prefix(encoder_out, prefix_frames: int = ENROLLMENT_FRAMES) -> PrefixSplit:
    """Split along time into [0, L_p) and [L_p, T); concatenation restores input."""
    t_enc = encoder_out.shape[1]
    if t_enc <= prefix_frames:
        raise SegmentError(
            f"encoder output of {t_enc} frames cannot split off a "
            f"{prefix_frames}-frame prefix with a non-empty main segment"
        )
    x = engine.astensor(encoder_out)
    return PrefixSplit(
        prefix=x[:, :prefix_frames, :],
        main=x[:, prefix_frames:, :],
        prefix_frames=prefix_frames,
    )


class TargetTalkerIdentifier(Module):
    """Frame scorer (C -> 1, ReLU) then a shared branch scorer (L_p -> 1)."""

    def __init__(self, channels: int, prefix_frames: int, dtype, seed: int = 0):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0x771)))
        self.prefix_frames = prefix_frames
        self.frame_scorer = Linear(rng, channels, 1, dtype)
        # small weights + positive bias keep the ReLU active at init; frame
        # inputs are strongly time-correlated, so at the default weight scale
        # a single unlucky draw can start the whole scorer dead
        self.frame_scorer.weight.data *= 0.2
        self.frame_scorer.bias.data[:] = 1.0
        self.branch_scorer = Linear(rng, prefix_frames, 1, dtype)

    def scores(self, prefix, n_speakers: int):
        """Per-branch logits (B, S) from prefix embeddings (B*S, L_p, C)."""
        n, l_p, _ = prefix.shape
        if n % n_speakers:
            raise ShapeError(f"{n} branches not divisible by S={n_speakers}")
        if l_p != self.prefix_frames:
            raise ShapeError(
                f"identifier built for {self.prefix_frames}-frame prefixes, got {l_p}"
            )
        per_frame = engine.relu(self.frame_scorer(prefix))  # (B*S, L_p, 1)
        per_frame = engine.reshape(per_frame, (n, l_p))
        branch = self.branch_scorer(per_frame)  # (B*S, 1)
        return engine.reshape(branch, (n // n_speakers, n_speakers))

    def identify(self, prefix, n_speakers: int):
        """Probability (B, S) of each branch being the target talker."""
        return engine.softmax(self.scores(prefix, n_speakers), axis=-1)


def select_target_branch(probs) -> np.ndarray:
    """Argmax per row; ties resolve to the lowest branch index."""
    data = probs.data if isinstance(probs, engine.Tensor) else np.asarray(probs)
    return np.argmax(data, axis=-1)
