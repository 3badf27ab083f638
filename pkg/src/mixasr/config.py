"""Run configuration: nested dataclasses with YAML round-tripping.

Field defaults reproduce the reference training recipe: separator with
K=8, R=3 inserted after encoder block 2; soft prompt length 4; identifier
loss weight 0.01; joint-task probability 0.2; AdamW from 2e-4 decaying
linearly to 1e-4; 200k steps at batch 16. Desk-scale runs override steps,
batch, and model size in their config files.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .foundation import FoundationConfig
from .separator import SidecarConfig


@dataclass
class OptimizerConfig:
    lr_start: float = 2e-4
    lr_end: float = 1e-4
    total_steps: int = 200_000
    batch_size: int = 16
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999


@dataclass
class PathsConfig:
    train_manifest: str = ""
    dev_manifest: str = ""
    out_dir: str = "runs/default"
    foundation_checkpoint: str = ""  # required for the adapter stage


@dataclass
class RunConfig:
    foundation: FoundationConfig = field(default_factory=FoundationConfig)
    sidecar: SidecarConfig = field(default_factory=SidecarConfig)
    prompt_length: int = 4
    enrollment_seconds: float = 3.0
    lambda_tti: float = 0.01
    joint_probability: float = 0.2
    use_tti: bool = True
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    seed: int = 0
    stage: str = "adapter"  # "foundation" pretrains everything single-talker
    checkpoint_interval: int = 500
    max_decode_len: int = 32

    def validate(self) -> None:
        self.foundation.validate()
        self.sidecar.validate()
        if self.stage not in ("foundation", "adapter"):
            raise ConfigError(f"unknown stage {self.stage!r}")
        if self.prompt_length < 0:
            raise ConfigError("prompt_length must be >= 0")
        if not 0.0 <= self.joint_probability <= 1.0:
            raise ConfigError("joint_probability must be in [0, 1]")
        if self.joint_probability > 0 and not self.use_tti and self.stage == "adapter":
            raise ConfigError("joint_probability > 0 requires use_tti")
        if self.enrollment_seconds <= 0:
            raise ConfigError("enrollment_seconds must be positive")

    @property
    def prefix_frames(self) -> int:
        return int(self.enrollment_seconds * 1000) // 20

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["foundation"]["languages"] = list(self.foundation.languages)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        try:
            fdict = dict(data.pop("foundation", {}))
            if "languages" in fdict:
                fdict["languages"] = tuple(fdict["languages"])
            foundation = FoundationConfig(**fdict)
            sidecar = SidecarConfig(**data.pop("sidecar", {}))
            optimizer = OptimizerConfig(**data.pop("optimizer", {}))
            paths = PathsConfig(**data.pop("paths", {}))
            return cls(
                foundation=foundation,
                sidecar=sidecar,
                optimizer=optimizer,
                paths=paths,
                **data,
            )
        except TypeError as exc:
            raise ConfigError(f"bad config field: {exc}")

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f)
        if not isinstance(data, dict):
            raise ConfigError(f"{path} does not contain a mapping")
        return cls.from_dict(data)

    def apply_overrides(self, overrides: list[str]) -> "RunConfig":
        """Apply `section.key=value` strings (CLI flags beat file values)."""
        data = self.to_dict()
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, raw = item.split("=", 1)
            node = data
            parts = key.split(".")
            for part in parts[:-1]:
                if part not in node or not isinstance(node[part], dict):
                    raise ConfigError(f"unknown config section {part!r} in {key!r}")
                node = node[part]
            leaf = parts[-1]
            if leaf not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node[leaf] = yaml.safe_load(raw)
        return RunConfig.from_dict(data)
