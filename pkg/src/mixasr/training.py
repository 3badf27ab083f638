"""Training loops for both stages, with resumable step-derived RNG.

Stage "foundation" trains the whole encoder-decoder on single-talker data
(one reference per example, no separator). Stage "adapter" loads a frozen
foundation checkpoint and trains only the separator, identifier and soft
prompt under the 80/20 multi/joint task sampling.

All per-step randomness (task mode, batch indices) derives from
(seed, step), so resuming from a checkpoint replays the exact run.
"""

from __future__ import annotations

import json
import time
from collections import Counter
from pathlib import Path

import numpy as np

from .checkpoint import checkpoint_meta, load_checkpoint, load_optimizer_state, save_checkpoint
from .config import RunConfig
from .dataset import ManifestDataset
from .errors import CheckpointError, ConfigError
from .features import FeatureExtractor
from .foundation import FoundationConfig, FoundationModel, Vocabulary
from .identifier import TargetTalkerIdentifier
from .manifest import read_manifest
from .model import JointModel, ParameterPartition, StepOutput, partition_parameters
from .objective import TaskMode, sample_task_mode
from .optim import AdamW, linear_lr
from .prompt import SoftPrompt
from .scoring import normalize_text
from .separator import Sidecar

_RNG_MODE = 0
_RNG_BATCH = 1


def step_rng(seed: int, step: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, step, purpose)))


def train_step(model: JointModel, optimizer: AdamW, batch, lam: float, lr: float) -> StepOutput:
    """One forward/backward/update touching only the optimizer's params."""
    out = model.compute_losses(batch, lam)
    optimizer.zero_grad()
    out.total.backward()
    optimizer.step(lr)
    return out


def vocabulary_from_manifest(manifest_path: str, languages=("en",)) -> Vocabulary:
    """Word inventory built from every transcript in a manifest."""
    manifest = read_manifest(manifest_path)
    words = set()
    for entry in manifest.entries:
        for t in entry.transcripts:
            words.update(normalize_text(t, entry.language).split())
    return Vocabulary(sorted(words), languages=languages)


def build_foundation_model(config: RunConfig) -> JointModel:
    fc = config.foundation
    if fc.words:
        vocab = Vocabulary(list(fc.words), languages=fc.languages)
    else:
        vocab = vocabulary_from_manifest(config.paths.train_manifest, fc.languages)
        fc.words = list(vocab.words)
    foundation = FoundationModel(fc, vocab, seed=config.seed)
    return JointModel(foundation)


def build_adapter_model(config: RunConfig) -> tuple[JointModel, ParameterPartition]:
    """Frozen foundation from its checkpoint plus fresh trainable modules."""
    if not config.paths.foundation_checkpoint:
        raise ConfigError("adapter stage requires paths.foundation_checkpoint")
    base, meta = load_checkpoint(config.paths.foundation_checkpoint)
    if meta.get("stage") not in ("foundation", "adapter"):
        raise CheckpointError(f"unexpected stage {meta.get('stage')!r} in foundation checkpoint")
    foundation = base.foundation
    fc = foundation.config
    config.foundation = fc
    dt = fc.np_dtype
    sidecar = Sidecar(config.sidecar, fc.channels, dt, seed=config.seed)
    tti = None
    if config.use_tti:
        tti = TargetTalkerIdentifier(fc.channels, config.prefix_frames, dt, seed=config.seed)
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x5077)))
    prompt = SoftPrompt(config.prompt_length, fc.channels, rng=rng, dtype=dt)
    model = JointModel(foundation, sidecar, tti, prompt)
    partition = partition_parameters(model)
    return model, partition


class Trainer:
    def __init__(
        self,
        config: RunConfig,
        model: JointModel,
        dataset: ManifestDataset,
        trainable: dict,
        start_step: int = 0,
        optimizer_state: dict | None = None,
    ):
        config.validate()
        self.config = config
        self.model = model
        self.dataset = dataset
        opt = config.optimizer
        self.optimizer = AdamW(
            trainable,
            lr=opt.lr_start,
            betas=(opt.beta1, opt.beta2),
            weight_decay=opt.weight_decay,
        )
        if optimizer_state is not None:
            self.optimizer.load_state_dict(optimizer_state)
        self.step = start_step
        self._joint_capable = (
            self.model.tti is not None
            and config.joint_probability > 0.0
            and any(e.has_enrollment for e in dataset.entries)
        )

    def _sample_mode(self, step: int) -> TaskMode:
        if not self._joint_capable:
            return TaskMode.MULTI_TALKER
        return sample_task_mode(step_rng(self.config.seed, step, _RNG_MODE),
                                self.config.joint_probability)

    def _sample_batch(self, step: int, mode: TaskMode):
        rng = step_rng(self.config.seed, step, _RNG_BATCH)
        n = len(self.dataset)
        size = min(self.config.optimizer.batch_size, n)
        idx = rng.choice(n, size=size, replace=False)
        return self.dataset.collate(idx, mode)

    def run(self, n_steps: int, out_dir: str | Path | None = None, quiet: bool = True):
        """Run n_steps from the current step; returns the log records."""
        out_dir = Path(out_dir) if out_dir is not None else None
        log_f = None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            log_f = open(out_dir / "train_log.jsonl", "a", encoding="utf-8")
        records = []
        opt_cfg = self.config.optimizer
        started = time.time()
        try:
            for _ in range(n_steps):
                step = self.step
                mode = self._sample_mode(step)
                batch = self._sample_batch(step, mode)
                lr = linear_lr(step, opt_cfg.total_steps, opt_cfg.lr_start, opt_cfg.lr_end)
                out = train_step(self.model, self.optimizer, batch, self.config.lambda_tti, lr)
                hist = Counter("".join(map(str, a.pi)) for a in out.assignments)
                record = {
                    "step": step,
                    "mode": mode.value,
                    "l_asr": out.bundle.l_asr,
                    "l_tti": out.bundle.l_tti,
                    "total": out.bundle.total,
                    "lr": lr,
                    "pi_hist": dict(sorted(hist.items())),
                }
                records.append(record)
                if log_f is not None:
                    log_f.write(json.dumps(record) + "\n")
                self.step += 1
                if (
                    out_dir is not None
                    and self.config.checkpoint_interval > 0
                    and self.step % self.config.checkpoint_interval == 0
                ):
                    self.save(out_dir / "checkpoints" / f"step_{self.step:06d}")
                if not quiet and (step % 50 == 0 or step == self.step - 1):
                    rate = len(records) / max(time.time() - started, 1e-9)
                    print(
                        f"step {step} mode={mode.value} total={out.bundle.total:.4f} "
                        f"lr={lr:.2e} ({rate:.2f} steps/s)",
                        flush=True,
                    )
        finally:
            if log_f is not None:
                log_f.close()
        if out_dir is not None:
            self.save(out_dir / "checkpoints" / "final")
        return records

    def save(self, directory: str | Path) -> Path:
        partition = None
        if self.config.stage == "adapter":
            partition = partition_parameters(self.model)
        meta = checkpoint_meta(
            self.model,
            step=self.step,
            seed=self.config.seed,
            run_config=self.config.to_dict(),
            partition=partition,
            stage=self.config.stage,
        )
        return save_checkpoint(directory, self.model, meta, self.optimizer.state_dict())


def make_extractor(fc: FoundationConfig) -> FeatureExtractor:
    return FeatureExtractor(
        sample_rate_hz=fc.sample_rate_hz,
        n_mels=fc.n_mels,
        max_input_seconds=fc.max_input_seconds,
        fixed_window=fc.fixed_window,
    )


def prepare_training(config: RunConfig, resume: str | None = None):
    """Build (trainer, dataset) for a config, fresh or resumed."""
    config.validate()
    if resume is not None:
        model, meta = load_checkpoint(resume)
        stored = meta.get("run_config", {})
        if stored and stored != config.to_dict():
            diffs = _dict_diff(stored, config.to_dict())
            raise CheckpointError(f"resume config differs from checkpoint: {diffs}")
        if config.stage == "adapter":
            partition = partition_parameters(model)
            trainable = partition.trainable
        else:
            trainable = dict(model.named_parameters())
            for p in trainable.values():
                p.requires_grad = True
        config.foundation = model.foundation.config
        start = int(meta.get("step", 0))
        opt_state = load_optimizer_state(resume)
    else:
        if config.stage == "foundation":
            model = build_foundation_model(config)
            trainable = dict(model.named_parameters())
        else:
            model, partition = build_adapter_model(config)
            trainable = partition.trainable
        start = 0
        opt_state = None
    extractor = make_extractor(model.foundation.config)
    dataset = ManifestDataset(
        config.paths.train_manifest,
        extractor,
        model.foundation.vocab,
        max_input_seconds=model.foundation.config.max_input_seconds,
    )
    trainer = Trainer(config, model, dataset, trainable, start_step=start,
                      optimizer_state=opt_state)
    return trainer, dataset


def _dict_diff(a: dict, b: dict, prefix: str = "") -> list[str]:
    diffs = []
    for key in sorted(set(a) | set(b)):
        va, vb = a.get(key), b.get(key)
        if isinstance(va, dict) and isinstance(vb, dict):
            diffs.extend(_dict_diff(va, vb, prefix + key + "."))
        elif va != vb:
            diffs.append(f"{prefix}{key}: {va!r} != {vb!r}")
    return diffs[:8]
