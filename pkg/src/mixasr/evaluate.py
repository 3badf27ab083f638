"""Corpus evaluation: permutation-minimal rates, identifier accuracy, reports.

Corpus rates micro-average: total minimal errors over total reference
units. For the target task, the "true" branch for identifier accuracy is
the branch the scoring permutation assigns to the target reference.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import ManifestDataset
from .errors import EmptyCorpus, ModeError
from .model import JointModel
from .objective import TaskMode
from .scoring import (
    ScoringUnit,
    min_permutation_error_rate,
    target_talker_error_rate,
    tti_accuracy,
)


@dataclass
class UtteranceRow:
    id: str
    errors: int
    ref_len: int
    permutation: tuple[int, ...]
    tti_pick: int | None = None
    tti_truth: int | None = None
    target_errors: int | None = None
    target_ref_len: int | None = None
    hyps: list = field(default_factory=list)


@dataclass
class EvalReport:
    task: str
    unit: str
    n_utterances: int
    total_errors: int
    total_ref_len: int
    corpus_rate: float
    rows: list[UtteranceRow]
    tti_accuracy: float | None = None
    target_total_errors: int | None = None
    target_total_ref_len: int | None = None
    target_rate: float | None = None

    def to_json(self) -> dict:
        out = {
            "task": self.task,
            "unit": self.unit,
            "n_utterances": self.n_utterances,
            "total_errors": self.total_errors,
            "total_ref_len": self.total_ref_len,
            "corpus_rate": self.corpus_rate,
        }
        if self.task == "target":
            out["tti_accuracy"] = self.tti_accuracy
            out["target_total_errors"] = self.target_total_errors
            out["target_total_ref_len"] = self.target_total_ref_len
            out["target_rate"] = self.target_rate
        return out

    def write(self, out_dir: str | Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "report.json", "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, indent=2, sort_keys=True)
        with open(out_dir / "utterances.csv", "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            w.writerow(["id", "errors", "ref_len", "permutation", "tti_pick", "tti_truth"])
            for r in self.rows:
                w.writerow([
                    r.id,
                    r.errors,
                    r.ref_len,
                    " ".join(map(str, r.permutation)),
                    "" if r.tti_pick is None else r.tti_pick,
                    "" if r.tti_truth is None else r.tti_truth,
                ])


def evaluate_corpus(
    model: JointModel,
    dataset: ManifestDataset,
    task: str = "multi",
    unit: ScoringUnit = ScoringUnit.WORD,
    max_decode_len: int = 32,
) -> EvalReport:
    """Decode every branch of every utterance and score the corpus."""
    if len(dataset) == 0:
        raise EmptyCorpus(f"manifest {dataset.manifest.path} has no examples")
    if task not in ("multi", "target"):
        raise ModeError(f"unknown task {task!r}")
    joint = task == "target"
    vocab = model.foundation.vocab
    rows: list[UtteranceRow] = []
    total_errors = 0
    total_ref = 0
    target_errors = 0
    target_ref = 0
    picks: list[int] = []
    truths: list[int] = []
    for i in range(len(dataset)):
        entry = dataset.entries[i]
        if joint and not entry.has_enrollment:
            raise ModeError(f"example {entry.id!r} lacks enrollment for the target task")
        feats, valid = dataset.features(
            i, TaskMode.JOINT_TARGET if joint else TaskMode.MULTI_TALKER
        )
        result = model.transcribe_example(
            feats.astype(model.foundation.config.np_dtype),
            valid,
            joint=joint,
            max_len=max_decode_len,
        )
        hyps = [vocab.decode(r.tokens) for r in result.branches]
        refs = list(entry.transcripts)
        score = min_permutation_error_rate(refs, hyps, unit, entry.language)
        row = UtteranceRow(
            id=entry.id,
            errors=score.total_errors,
            ref_len=score.total_ref_len,
            permutation=score.permutation,
            hyps=hyps,
        )
        total_errors += score.total_errors
        total_ref += score.total_ref_len
        if joint:
            tidx = int(entry.target_index)
            pick = int(result.picked_branch)
            truth = score.permutation.index(tidx)
            counts = target_talker_error_rate(refs[tidx], hyps[pick], unit, entry.language)
            row.tti_pick = pick
            row.tti_truth = truth
            row.target_errors = counts.errors
            row.target_ref_len = counts.ref_len
            target_errors += counts.errors
            target_ref += counts.ref_len
            picks.append(pick)
            truths.append(truth)
        rows.append(row)
    report = EvalReport(
        task=task,
        unit=unit.value,
        n_utterances=len(rows),
        total_errors=total_errors,
        total_ref_len=total_ref,
        corpus_rate=total_errors / total_ref,
        rows=rows,
    )
    if joint:
        report.tti_accuracy = tti_accuracy(picks, truths)
        report.target_total_errors = target_errors
        report.target_total_ref_len = target_ref
        report.target_rate = target_errors / max(target_ref, 1)
    return report
