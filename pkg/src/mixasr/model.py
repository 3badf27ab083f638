"""The assembled joint system and its forward passes.

A frozen foundation model carries a separator at its encoder split point,
an identifier over enrollment-aligned prefix frames, and a soft prompt in
its decoder prefix. Only those three attachments train.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import engine
from .engine import Tensor
from .errors import ArityError, CapabilityError, ModeError, PartitionError
from .foundation import FoundationModel, GreedyResult
from .identifier import TargetTalkerIdentifier, select_target_branch, split_prefix
from .nn import Module
from .objective import (
    LossBundle,
    PermutationAssignment,
    TaskMode,
    find_permutation,
)
from .prompt import SoftPrompt
from .separator import Sidecar

FROZEN_NAMESPACE = "foundation."
TRAINABLE_NAMESPACES = ("sidecar.", "tti.", "prompt.")


@dataclass
class ParameterPartition:
    frozen: dict[str, Tensor]
    trainable: dict[str, Tensor]

    @property
    def frozen_count(self) -> int:
        return sum(int(p.data.size) for p in self.frozen.values())

    @property
    def trainable_count(self) -> int:
        return sum(int(p.data.size) for p in self.trainable.values())

    def report(self) -> dict:
        rows = []
        for side, params in (("frozen", self.frozen), ("trainable", self.trainable)):
            for name, p in sorted(params.items()):
                rows.append(
                    {"name": name, "shape": list(p.data.shape), "size": int(p.data.size), "side": side}
                )
        return {
            "parameters": rows,
            "frozen_count": self.frozen_count,
            "trainable_count": self.trainable_count,
            "total_count": self.frozen_count + self.trainable_count,
        }


def partition_parameters(model: "JointModel") -> ParameterPartition:
    """Assign every parameter to exactly one side and set grad flags.

    Foundation weights freeze; separator, identifier and prompt train.
    Any parameter outside those namespaces is a wiring bug and raises.
    """
    frozen: dict[str, Tensor] = {}
    trainable: dict[str, Tensor] = {}
    for name, p in model.named_parameters():
        if name.startswith(FROZEN_NAMESPACE):
            frozen[name] = p
        elif name.startswith(TRAINABLE_NAMESPACES):
            trainable[name] = p
        else:
            raise PartitionError(f"parameter {name!r} belongs to no known namespace")
    for p in frozen.values():
        p.requires_grad = False
    for p in trainable.values():
        p.requires_grad = True
    return ParameterPartition(frozen=frozen, trainable=trainable)


@dataclass
class Batch:
    """One collated training/eval batch (homogeneous task mode)."""

    features: np.ndarray  # (B, n_mels, T_feat)
    feat_lengths: np.ndarray  # (B,)
    references: list  # B lists of S token-id lists, each ending in EOT
    mode: TaskMode
    target_indices: np.ndarray | None = None  # (B,) reference indices, joint mode
    ids: list = field(default_factory=list)


@dataclass
class StepOutput:
    total: Tensor
    bundle: LossBundle
    assignments: list[PermutationAssignment]
    loss_matrix: np.ndarray  # (B, S, S)
    tti_probs: np.ndarray | None = None


@dataclass
class ExampleTranscription:
    """Greedy transcriptions for one example; None for skipped branches."""

    branches: list  # list[GreedyResult | None], length S
    tti_probs: np.ndarray | None = None
    picked_branch: int | None = None
    decoder_calls: int = 0


class JointModel(Module):
    def __init__(
        self,
        foundation: FoundationModel,
        sidecar: Sidecar | None = None,
        tti: TargetTalkerIdentifier | None = None,
        prompt: SoftPrompt | None = None,
    ):
        self.foundation = foundation
        self.sidecar = sidecar
        self.tti = tti
        self.prompt = prompt

    @property
    def n_speakers(self) -> int:
        return self.sidecar.config.n_speakers if self.sidecar is not None else 1

    # -- forward ---------------------------------------------------------

    def encode_branches(self, features: np.ndarray, feat_lengths: np.ndarray):
        """Features -> per-talker encoder outputs (B*S, T_enc, C)."""
        x, enc_lens = self.foundation.encode_lower(features, feat_lengths)
        if self.sidecar is None:
            return self.foundation.encode_upper(x, enc_lens), enc_lens
        branches = self.sidecar.separate(x)
        lens_b = np.repeat(enc_lens, self.n_speakers)
        return self.foundation.encode_upper(branches, lens_b), lens_b

    def asr_loss_matrix(self, enc, enc_lengths: np.ndarray, references: list):
        """Teacher-forced NLL of every (branch, reference) pair.

        enc: (B*S, T, C); references: B lists of S token sequences.
        Returns a (B, S, S) tensor; entry (b, s, t) scores branch s of
        example b against reference t. No assignment is applied here.
        """
        s = self.n_speakers
        b = enc.shape[0] // s
        for refs in references:
            if len(refs) != s:
                raise ArityError(f"expected {s} references per example, got {len(refs)}")
        row_idx = np.repeat(np.arange(b * s), s)
        targets = [references[i][t] for i in range(b) for _ in range(s) for t in range(s)]
        enc_rep = engine.take0(enc, row_idx)
        nll = self.foundation.decoder_nll(
            enc_rep, np.asarray(enc_lengths)[row_idx], targets, prompt=self.prompt
        )
        return engine.reshape(nll, (b, s, s))

    def compute_losses(self, batch: Batch, lam: float = 0.01) -> StepOutput:
        """Full forward pass producing the PIT loss and, in joint mode,
        the identifier cross-entropy; the permutation search is treated
        as a constant by the gradient."""
        s = self.n_speakers
        b = batch.features.shape[0]
        enc, lens_b = self.encode_branches(batch.features, batch.feat_lengths)
        log_probs = None
        if batch.mode == TaskMode.JOINT_TARGET:
            if self.tti is None:
                raise CapabilityError("joint mode requires an identifier module")
            if batch.target_indices is None:
                raise ModeError("joint-mode batch lacks target indices")
            split = split_prefix(enc, self.tti.prefix_frames)
            scores = self.tti.scores(split.prefix, s)
            log_probs = engine.log_softmax(scores, axis=-1)
            dec_enc = split.main
            dec_lens = np.asarray(lens_b) - split.prefix_frames
        else:
            if batch.target_indices is not None:
                raise ModeError("multi-talker batch carries target indices")
            dec_enc = enc
            dec_lens = lens_b
        matrix = self.asr_loss_matrix(dec_enc, dec_lens, batch.references)
        assignments = [find_permutation(matrix.data[i]) for i in range(b)]
        flat = engine.reshape(matrix, (b * s * s,))
        sel = np.asarray(
            [i * s * s + br * s + assignments[i].pi[br] for i in range(b) for br in range(s)]
        )
        l_asr = engine.mul(engine.sum_(engine.take0(flat, sel)), 1.0 / b)
        if batch.mode == TaskMode.JOINT_TARGET:
            picks = np.asarray(
                [assignments[i].inverse(int(batch.target_indices[i])) for i in range(b)]
            )
            l_tti = engine.mul(engine.mean(engine.take_along_last(log_probs, picks)), -1.0)
            total = l_asr + engine.mul(l_tti, lam)
            bundle = LossBundle(
                l_asr=float(l_asr), l_tti=float(l_tti), lam=lam,
                total=float(total), mode=batch.mode,
            )
            probs = np.exp(log_probs.data)
        else:
            total = l_asr
            bundle = LossBundle(
                l_asr=float(l_asr), l_tti=0.0, lam=lam, total=float(total), mode=batch.mode
            )
            probs = None
        return StepOutput(
            total=total,
            bundle=bundle,
            assignments=assignments,
            loss_matrix=np.array(matrix.data),
            tti_probs=probs,
        )

    # -- inference -------------------------------------------------------

    def transcribe_example(
        self,
        features: np.ndarray,
        feat_length: int,
        joint: bool,
        max_len: int = 32,
        discard_non_target: bool = False,
    ) -> ExampleTranscription:
        """Greedy-decode the branches of a single example.

        In joint mode the identifier picks the target branch first; with
        discard_non_target only that branch is decoded (the non-target
        branches are skipped to cut decoder cost, never changing the
        target transcript).
        """
        s = self.n_speakers
        feats = features[None] if features.ndim == 2 else features
        enc, lens_b = self.encode_branches(feats, np.asarray([feat_length]))
        probs = None
        picked = None
        if joint:
            if self.tti is None:
                raise CapabilityError("joint mode requires an identifier module")
            split = split_prefix(enc, self.tti.prefix_frames)
            probs = self.tti.identify(split.prefix, s).data[0]
            picked = int(select_target_branch(probs[None])[0])
            dec_enc = split.main
            dec_lens = np.asarray(lens_b) - split.prefix_frames
        else:
            if discard_non_target:
                raise ModeError("discard_non_target requires joint mode")
            dec_enc = enc
            dec_lens = np.asarray(lens_b)
        results: list[GreedyResult | None] = []
        calls = 0
        for br in range(s):
            if discard_non_target and br != picked:
                results.append(None)
                continue
            row = engine.take0(dec_enc, np.asarray([br]))
            results.append(
                self.foundation.decode_greedy(
                    row, int(dec_lens[br]), prompt=self.prompt, max_len=max_len
                )
            )
            calls += 1
        return ExampleTranscription(
            branches=results, tti_probs=probs, picked_branch=picked, decoder_calls=calls
        )
