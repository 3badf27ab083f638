"""Checkpoint directories: meta.json + params.npz (+ optim.npz).

meta.json holds the run config, the parameter-partition report, the step
count and seeds; params.npz holds every named parameter array under its
namespace ("foundation/...", "sidecar/...", "tti/...", "prompt/...").
Loading rebuilds the model from the stored config and validates names and
shapes exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .foundation import FoundationConfig, FoundationModel, Vocabulary
from .identifier import TargetTalkerIdentifier
from .model import JointModel, ParameterPartition
from .prompt import SoftPrompt
from .separator import Sidecar, SidecarConfig

META_FILE = "meta.json"
PARAMS_FILE = "params.npz"
OPTIM_FILE = "optim.npz"


def _param_key(name: str) -> str:
    return name.replace(".", "/", 1)


def save_checkpoint(
    directory: str | Path,
    model: JointModel,
    meta: dict,
    optimizer_state: dict | None = None,
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arrays = {_param_key(name): p.data for name, p in model.named_parameters()}
    np.savez(directory / PARAMS_FILE, **arrays)
    with open(directory / META_FILE, "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
    if optimizer_state is not None:
        flat = {}
        for key, val in optimizer_state.items():
            flat[key] = np.asarray(val)
        np.savez(directory / OPTIM_FILE, **flat)
    return directory


def checkpoint_meta(
    model: JointModel,
    step: int,
    seed: int,
    run_config: dict | None = None,
    partition: ParameterPartition | None = None,
    stage: str = "adapter",
) -> dict:
    fc = model.foundation.config
    meta = {
        "stage": stage,
        "step": int(step),
        "seed": int(seed),
        "run_config": run_config or {},
        "foundation_config": {
            "words": list(fc.words),
            "n_mels": fc.n_mels,
            "n_encoder_blocks": fc.n_encoder_blocks,
            "n_decoder_blocks": fc.n_decoder_blocks,
            "channels": fc.channels,
            "n_heads": fc.n_heads,
            "insertion_index": fc.insertion_index,
            "max_input_seconds": fc.max_input_seconds,
            "fixed_window": fc.fixed_window,
            "sample_rate_hz": fc.sample_rate_hz,
            "languages": list(fc.languages),
            "language": fc.language,
            "max_decoder_positions": fc.max_decoder_positions,
            "dtype": fc.dtype,
        },
        "sidecar_config": None,
        "tti_prefix_frames": None,
        "prompt_length": None,
    }
    if model.sidecar is not None:
        sc = model.sidecar.config
        meta["sidecar_config"] = {
            "n_blocks_per_repeat": sc.n_blocks_per_repeat,
            "n_repeats": sc.n_repeats,
            "kernel_size": sc.kernel_size,
            "bottleneck_channels": sc.bottleneck_channels,
            "hidden_channels": sc.hidden_channels,
            "n_speakers": sc.n_speakers,
        }
    if model.tti is not None:
        meta["tti_prefix_frames"] = model.tti.prefix_frames
    if model.prompt is not None:
        meta["prompt_length"] = model.prompt.length
    if partition is not None:
        meta["partition_report"] = partition.report()
    return meta


def build_model_from_meta(meta: dict) -> JointModel:
    fc_dict = dict(meta["foundation_config"])
    fc_dict["languages"] = tuple(fc_dict.get("languages", ("en",)))
    config = FoundationConfig(**fc_dict)
    vocab = Vocabulary(list(config.words), languages=config.languages)
    foundation = FoundationModel(config, vocab)
    sidecar = None
    tti = None
    prompt = None
    dt = config.np_dtype
    if meta.get("sidecar_config"):
        sidecar = Sidecar(SidecarConfig(**meta["sidecar_config"]), config.channels, dt)
    if meta.get("tti_prefix_frames"):
        tti = TargetTalkerIdentifier(config.channels, int(meta["tti_prefix_frames"]), dt)
    if meta.get("prompt_length") is not None:
        prompt = SoftPrompt(int(meta["prompt_length"]), config.channels, dtype=dt)
    return JointModel(foundation, sidecar, tti, prompt)


def load_checkpoint(directory: str | Path) -> tuple[JointModel, dict]:
    """Rebuild the model and load its arrays, validating names and shapes."""
    directory = Path(directory)
    meta_path = directory / META_FILE
    params_path = directory / PARAMS_FILE
    if not meta_path.exists() or not params_path.exists():
        raise CheckpointError(f"{directory} is not a checkpoint directory")
    with open(meta_path, encoding="utf-8") as f:
        meta = json.load(f)
    try:
        model = build_model_from_meta(meta)
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed checkpoint meta: {exc}")
    with np.load(params_path) as arrays:
        stored = {k: arrays[k] for k in arrays.files}
    expected = {_param_key(name): p for name, p in model.named_parameters()}
    missing = sorted(set(expected) - set(stored))
    extra = sorted(set(stored) - set(expected))
    if missing or extra:
        raise CheckpointError(
            f"parameter name mismatch: missing {missing[:4]}, unexpected {extra[:4]}"
        )
    for key, p in expected.items():
        arr = stored[key]
        if arr.shape != p.data.shape:
            raise CheckpointError(
                f"shape mismatch for {key}: stored {arr.shape}, expected {p.data.shape}"
            )
        p.data = arr.astype(p.data.dtype, copy=False)
    return model, meta


def load_optimizer_state(directory: str | Path) -> dict | None:
    path = Path(directory) / OPTIM_FILE
    if not path.exists():
        return None
    with np.load(path) as arrays:
        return {k: arrays[k] for k in arrays.files}
