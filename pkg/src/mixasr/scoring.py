"""Text normalization and (permutation-minimal) error-rate scoring."""

from __future__ import annotations

import itertools
import unicodedata
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import ArityError, UndefinedRate


class ScoringUnit(Enum):
    WORD = "word"
    CHARACTER = "char"


def _basic_normalize(s: str) -> str:
    out = []
    for ch in unicodedata.normalize("NFKC", s.lower()):
        if unicodedata.category(ch).startswith("P"):
            continue
        out.append(ch)
    return " ".join("".join(out).split())


# Language-specific rules are pluggable; this is a simplified stand-in
# for the full published normalizer, which can be registered here when
# exact comparability with external systems matters.
_NORMALIZERS = {"default": _basic_normalize}


def register_normalizer(language: str, fn) -> None:
    _NORMALIZERS[language] = fn


def normalize_text(s: str, language: str = "en") -> str:
    """Lowercase, strip punctuation, collapse whitespace (idempotent)."""
    fn = _NORMALIZERS.get(language, _NORMALIZERS["default"])
    return fn(s)


def to_units(s: str, unit: ScoringUnit) -> list[str]:
    """Split a normalized string into scoring units.

    WORD splits on whitespace; CHARACTER yields non-space code points.
    """
    if unit == ScoringUnit.WORD:
        return s.split()
    return [ch for ch in s if not ch.isspace()]


@dataclass
class ErrorCounts:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def rate(self) -> float:
        if self.ref_len == 0:
            raise UndefinedRate("error rate undefined for an empty reference")
        return self.errors / self.ref_len

    def __add__(self, other: "ErrorCounts") -> "ErrorCounts":
        return ErrorCounts(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.ref_len + other.ref_len,
        )


def edit_distance(ref_units: list[str], hyp_units: list[str]) -> ErrorCounts:
    """Minimal S+D+I alignment via dynamic programming.

    Backtrace ties prefer substitution over insertion over deletion.
    """
    inventory = {u: i for i, u in enumerate(dict.fromkeys(ref_units + hyp_units))}
    ref_ids = np.asarray([inventory[u] for u in ref_units], dtype=np.int64)
    hyp_ids = np.asarray([inventory[u] for u in hyp_units], dtype=np.int64)
    s, d, i = kernels.edit_counts(ref_ids, hyp_ids)
    return ErrorCounts(substitutions=int(s), deletions=int(d), insertions=int(i),
                       ref_len=len(ref_units))


@dataclass
class PermutationScore:
    rate: float
    permutation: tuple[int, ...]  # hypothesis i scored against reference permutation[i]
    pairs: list[ErrorCounts]  # counts per hypothesis under the best permutation
    total_errors: int
    total_ref_len: int


def min_permutation_error_rate(
    refs: list[str],
    hyps: list[str],
    unit: ScoringUnit = ScoringUnit.WORD,
    language: str = "en",
) -> PermutationScore:
    """Error rate under the assignment minimizing total raw errors.

    Exhaustive over all S! hypothesis-to-reference assignments; ties pick
    the lexicographically smallest permutation. Rate = min total errors /
    total reference units.
    """
    if len(refs) != len(hyps):
        raise ArityError(f"{len(refs)} references vs {len(hyps)} hypotheses")
    s = len(refs)
    ref_units = [to_units(normalize_text(r, language), unit) for r in refs]
    hyp_units = [to_units(normalize_text(h, language), unit) for h in hyps]
    pair = [[edit_distance(ref_units[t], hyp_units[i]) for t in range(s)] for i in range(s)]
    best_pi = None
    best_total = None
    for pi in itertools.permutations(range(s)):
        total = sum(pair[i][pi[i]].errors for i in range(s))
        if best_total is None or total < best_total:
            best_total = total
            best_pi = pi
    total_ref = sum(len(u) for u in ref_units)
    if total_ref == 0:
        raise UndefinedRate("all references empty")
    pairs = [pair[i][best_pi[i]] for i in range(s)]
    return PermutationScore(
        rate=best_total / total_ref,
        permutation=best_pi,
        pairs=pairs,
        total_errors=int(best_total),
        total_ref_len=int(total_ref),
    )


def target_talker_error_rate(
    target_ref: str,
    chosen_hyp: str,
    unit: ScoringUnit = ScoringUnit.WORD,
    language: str = "en",
) -> ErrorCounts:
    """Standard single-pair counts; a wrong identifier pick inflates this
    naturally (no oracle correction is applied)."""
    ref_units = to_units(normalize_text(target_ref, language), unit)
    hyp_units = to_units(normalize_text(chosen_hyp, language), unit)
    if not ref_units:
        raise UndefinedRate("empty reference")
    return edit_distance(ref_units, hyp_units)


def tti_accuracy(selected_indices, true_indices) -> float:
    """Fraction of exact matches between picked and true branch indices."""
    sel = np.asarray(selected_indices)
    true = np.asarray(true_indices)
    if sel.shape != true.shape:
        raise ArityError(f"shape mismatch: {sel.shape} vs {true.shape}")
    if sel.size == 0:
        raise ArityError("empty index sequences")
    return float(np.mean(sel == true))
