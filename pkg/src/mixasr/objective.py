"""Permutation-invariant training objective.

The ASR loss matrix holds the teacher-forced NLL of every (branch,
reference) pair; the training permutation is the exhaustive minimizer of
its assignment cost, is treated as a constant by the gradient, and is
reused to pick the branch the identifier loss scores against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import engine
from .engine import Tensor
from .errors import ArityError, InvalidMatrix


class TaskMode(Enum):
    MULTI_TALKER = "multi"
    JOINT_TARGET = "joint"


@dataclass
class PermutationAssignment:
    """pi[s] = index of the reference assigned to branch s; minimal cost."""

    pi: tuple[int, ...]
    cost: float

    def inverse(self, reference_index: int) -> int:
        """The branch mapped to `reference_index` under pi."""
        return self.pi.index(reference_index)


@dataclass
class LossBundle:
    l_asr: float
    l_tti: float
    lam: float
    total: float
    mode: TaskMode = TaskMode.MULTI_TALKER


def find_permutation(matrix) -> PermutationAssignment:
    """Exhaustive minimum-cost assignment of branches to references.

    Ties resolve to the lexicographically smallest permutation. The input
    must be a square matrix of finite pairwise losses.
    """
    m = matrix.data if isinstance(matrix, Tensor) else np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidMatrix(f"loss matrix must be square, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix("loss matrix has non-finite entries")
    s = m.shape[0]
    best_pi = None
    best_cost = np.inf
    for pi in itertools.permutations(range(s)):
        cost = sum(m[i, pi[i]] for i in range(s))
        if cost < best_cost:
            best_cost = cost
            best_pi = pi
    return PermutationAssignment(pi=best_pi, cost=float(best_cost))


def pit_asr_loss(matrix, assignment: PermutationAssignment):
    """Sum of matrix entries along the assignment: sum_s M[s, pi(s)].

    Accepts a numpy matrix (returns float) or a Tensor (returns a scalar
    Tensor so gradients flow through the selected entries only).
    """
    s = len(assignment.pi)
    if isinstance(matrix, Tensor):
        if matrix.shape != (s, s):
            raise ArityError(f"assignment over {s} branches, matrix {matrix.shape}")
        flat = engine.reshape(matrix, (s * s,))
        idx = np.asarray([i * s + assignment.pi[i] for i in range(s)])
        return engine.sum_(engine.take0(flat, idx))
    m = np.asarray(matrix)
    if m.shape != (s, s):
        raise ArityError(f"assignment over {s} branches, matrix {m.shape}")
    return float(sum(m[i, assignment.pi[i]] for i in range(s)))


def tti_loss(probs, target_ref_index, assignment):
    """Cross-entropy of the identifier against the PIT-permuted truth.

    The branch that should win is pi^-1(target_ref_index). probs may be a
    single row (S,) with one assignment, or a batch (B, S) with a list of
    assignments and per-example target indices; batches return the mean.
    """
    arr = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    if arr.ndim == 1:
        arr = arr[None, :]
        assignments = [assignment]
        targets = [int(target_ref_index)]
    else:
        assignments = list(assignment)
        targets = [int(t) for t in np.asarray(target_ref_index).ravel()]
    b, s = arr.shape
    if len(assignments) != b or len(targets) != b:
        raise ArityError(f"{b} rows vs {len(assignments)} assignments, {len(targets)} targets")
    for t in targets:
        if not 0 <= t < s:
            raise ArityError(f"target reference index {t} out of range for S={s}")
    picks = np.asarray([a.inverse(t) for a, t in zip(assignments, targets)])
    if isinstance(probs, Tensor):
        rows = probs if probs.ndim == 2 else engine.reshape(probs, (1, -1))
        chosen = engine.take_along_last(rows, picks)
        return engine.mul(engine.mean(engine.log(chosen)), -1.0)
    return float(-np.mean(np.log(arr[np.arange(b), picks])))


def total_loss(l_asr: float, l_tti: float, lam: float, mode: TaskMode) -> LossBundle:
    """Combine losses: total = l_asr + lam * l_tti in joint mode; the
    identifier term is excluded (recorded as 0) in multi-talker mode."""
    if mode == TaskMode.JOINT_TARGET:
        return LossBundle(
            l_asr=float(l_asr),
            l_tti=float(l_tti),
            lam=lam,
            total=float(l_asr) + lam * float(l_tti),
            mode=mode,
        )
    return LossBundle(l_asr=float(l_asr), l_tti=0.0, lam=lam, total=float(l_asr), mode=mode)


def sample_task_mode(rng: np.random.Generator, joint_probability: float = 0.2) -> TaskMode:
    """Bernoulli draw: JOINT_TARGET with the configured probability."""
    return TaskMode.JOINT_TARGET if rng.random() < joint_probability else TaskMode.MULTI_TALKER
