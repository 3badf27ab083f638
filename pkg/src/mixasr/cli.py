"""Command-line interface: simulate / train / eval / transcribe (+ toy).

Every command is deterministic under a fixed --seed. On failure a single
machine-readable JSON error line goes to stderr and the exit code is
nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .audio import read_wav, time_stretch_to_limit, trim_enrollment, write_wav
from .checkpoint import load_checkpoint
from .config import RunConfig
from .dataset import ManifestDataset
from .errors import (
    CapabilityError,
    EnrollmentTooShort,
    ManifestError,
    MixasrError,
)
from .evaluate import evaluate_corpus
from .manifest import ManifestEntry, read_manifest, write_manifest
from .scoring import ScoringUnit
from .simulate import (
    MixtureExample,
    Reference,
    SourceUtterance,
    assemble_joint_input,
    simulate_delayed,
    simulate_left_aligned,
)
from .toydata import ToySpec, generate_singles
from .training import make_extractor, prepare_training


def cmd_toy(args) -> int:
    spec = ToySpec(n_speakers=args.speakers)
    out = Path(args.out)
    paths = generate_singles(out, seed=args.seed, spec=spec)
    _write_toy_configs(out, args.seed)
    print(json.dumps({
        "singles_train": str(paths["train"]),
        "singles_dev": str(paths["dev"]),
        "configs": [str(out / "config_foundation.yaml"), str(out / "config_adapter.yaml")],
    }))
    return 0


def _write_toy_configs(out: Path, seed: int) -> None:
    base = RunConfig()
    base.seed = seed
    base.foundation.channels = 64
    base.foundation.n_encoder_blocks = 4
    base.foundation.n_decoder_blocks = 2
    base.foundation.n_heads = 4
    base.foundation.dtype = "float32"
    base.foundation.max_decoder_positions = 64

    foundation = RunConfig.from_dict(base.to_dict())
    foundation.stage = "foundation"
    foundation.optimizer.total_steps = 1500
    foundation.optimizer.batch_size = 16
    foundation.optimizer.lr_start = 1e-3
    foundation.optimizer.lr_end = 2e-4
    foundation.checkpoint_interval = 0
    foundation.paths.train_manifest = str(out / "singles_train.jsonl")
    foundation.paths.dev_manifest = str(out / "singles_dev.jsonl")
    foundation.paths.out_dir = str(out / "runs" / "foundation")
    foundation.save(out / "config_foundation.yaml")

    adapter = RunConfig.from_dict(base.to_dict())
    adapter.stage = "adapter"
    adapter.optimizer.total_steps = 2500
    adapter.optimizer.batch_size = 8
    adapter.checkpoint_interval = 500
    adapter.paths.train_manifest = str(out / "mix_train" / "manifest.jsonl")
    adapter.paths.dev_manifest = str(out / "mix_test" / "manifest.jsonl")
    adapter.paths.out_dir = str(out / "runs" / "adapter")
    adapter.paths.foundation_checkpoint = str(
        out / "runs" / "foundation" / "checkpoints" / "final"
    )
    adapter.save(out / "config_adapter.yaml")


def cmd_simulate(args) -> int:
    source = read_manifest(args.source)
    singles = [e for e in source.entries if len(e.speakers) == 1]
    if not singles:
        raise ManifestError(f"{args.source} has no single-talker utterances")
    by_speaker: dict[str, list] = {}
    for e in singles:
        clip = source.load_example(e).mixture
        by_speaker.setdefault(e.speakers[0], []).append((e, clip))
    speakers = sorted(by_speaker)
    if len(speakers) < args.speakers:
        raise ManifestError(
            f"need {args.speakers} distinct speakers, manifest has {len(speakers)}"
        )
    out = Path(args.out)
    (out / "mixtures").mkdir(parents=True, exist_ok=True)
    (out / "enrollments").mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(args.count):
        rng = np.random.default_rng(np.random.SeedSequence((args.seed, 0x1517, i)))
        chosen = rng.choice(len(speakers), size=args.speakers, replace=False)
        sources = []
        used: dict[str, str] = {}
        for spk_i in chosen:
            spk = speakers[int(spk_i)]
            pool = [
                (e, c) for e, c in by_speaker[spk]
                if c.duration_seconds <= args.max_source_seconds
            ] or by_speaker[spk]
            e, c = pool[int(rng.integers(0, len(pool)))]
            used[spk] = e.id
            sources.append(SourceUtterance(clip=c, transcript=e.transcripts[0], speaker_id=spk))
        example_id = f"mix_{i:05d}"
        if args.protocol == "left_aligned":
            example = simulate_left_aligned(sources, example_id=example_id)
        else:
            example = simulate_delayed(
                sources, rng, min_delay_s=args.min_delay, example_id=example_id
            )
        target_index = int(rng.integers(0, args.speakers))
        target_speaker = example.references[target_index].speaker_id
        enr_pool = [
            (e, c) for e, c in by_speaker[target_speaker]
            if c.duration_seconds >= args.enrollment_seconds and e.id != used[target_speaker]
        ]
        if not enr_pool:
            enr_pool = [
                (e, c) for e, c in by_speaker[target_speaker]
                if c.duration_seconds >= args.enrollment_seconds
            ]
        if not enr_pool:
            raise EnrollmentTooShort(
                f"speaker {target_speaker} has no utterance of at least "
                f"{args.enrollment_seconds}s for enrollment"
            )
        enr_entry, enr_clip = enr_pool[int(rng.integers(0, len(enr_pool)))]
        enrollment = trim_enrollment(enr_clip, args.enrollment_seconds, rng)
        mix_rel = f"mixtures/{example_id}.wav"
        enr_rel = f"enrollments/{example_id}.wav"
        write_wav(out / mix_rel, example.mixture)
        write_wav(out / enr_rel, enrollment)
        entries.append(
            ManifestEntry(
                id=example_id,
                audio=mix_rel,
                speakers=[r.speaker_id for r in example.references],
                transcripts=[r.transcript for r in example.references],
                delays_s=example.delays_s,
                enrollment=enr_rel,
                target_index=target_index,
                enrollment_speaker=target_speaker,
            )
        )
    write_manifest(
        out / "manifest.jsonl",
        entries,
        header={
            "seed": args.seed,
            "protocol": args.protocol,
            "speakers": args.speakers,
            "source": str(args.source),
            "enrollment_seconds": args.enrollment_seconds,
        },
    )
    print(json.dumps({"manifest": str(out / "manifest.jsonl"), "examples": len(entries)}))
    return 0


def cmd_train(args) -> int:
    config = RunConfig.load(args.config)
    if args.set:
        config = config.apply_overrides(args.set)
    trainer, _ = prepare_training(config, resume=args.resume)
    out_dir = Path(config.paths.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config.save(out_dir / "config.yaml")  # echo the effective config
    remaining = config.optimizer.total_steps - trainer.step
    if args.steps is not None:
        remaining = min(remaining, args.steps)
    trainer.run(max(remaining, 0), out_dir=out_dir, quiet=args.quiet)
    print(json.dumps({
        "out_dir": str(out_dir),
        "final_checkpoint": str(out_dir / "checkpoints" / "final"),
        "steps_run": max(remaining, 0),
        "step": trainer.step,
    }))
    return 0


def cmd_eval(args) -> int:
    model, _meta = load_checkpoint(args.checkpoint)
    if args.task == "target" and model.tti is None:
        raise CapabilityError("checkpoint has no identifier; cannot run the target task")
    extractor = make_extractor(model.foundation.config)
    dataset = ManifestDataset(
        args.manifest, extractor, model.foundation.vocab,
        max_input_seconds=model.foundation.config.max_input_seconds,
    )
    unit = ScoringUnit.WORD if args.unit == "word" else ScoringUnit.CHARACTER
    report = evaluate_corpus(model, dataset, task=args.task, unit=unit,
                             max_decode_len=args.max_len)
    out = Path(args.out)
    report.write(out)
    print(json.dumps(report.to_json()))
    return 0


def cmd_transcribe(args) -> int:
    model, _meta = load_checkpoint(args.checkpoint)
    config = model.foundation.config
    audio = read_wav(args.audio)
    joint = args.enrollment is not None
    if joint:
        if model.tti is None:
            raise CapabilityError("checkpoint has no identifier; cannot use an enrollment")
        enr_seconds = model.tti.prefix_frames / 50.0
        enrollment = trim_enrollment(read_wav(args.enrollment), enr_seconds, rng=None)
        example = MixtureExample(
            id="cli",
            mixture=audio,
            references=[Reference("", "")] * model.n_speakers,
            delays_s=[0.0] * model.n_speakers,
            target_index=0,
            enrollment=enrollment,
        )
        clip = assemble_joint_input(example, config.max_input_seconds)
    else:
        if args.discard_non_target:
            raise CapabilityError("--discard-non-target requires --enrollment")
        clip = time_stretch_to_limit(audio, config.max_input_seconds)
    extractor = make_extractor(config)
    fmap = extractor(clip)
    result = model.transcribe_example(
        fmap.values.astype(config.np_dtype),
        fmap.t_feat,
        joint=joint,
        max_len=args.max_len,
        discard_non_target=args.discard_non_target,
    )
    vocab = model.foundation.vocab
    payload = {
        "transcripts": [
            None if r is None else vocab.decode(r.tokens) for r in result.branches
        ],
        "truncated": [None if r is None else r.truncated for r in result.branches],
        "decoder_calls": result.decoder_calls,
    }
    if joint:
        payload["picked_branch"] = result.picked_branch
        payload["tti_probs"] = [float(p) for p in result.tti_probs]
    print(json.dumps(payload))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mixasr",
        description="Joint multi-talker and target-talker ASR on a frozen foundation model",
    )
    sub = p.add_subparsers(dest="command", required=True)

    toy = sub.add_parser("toy", help="generate the synthetic single-talker corpus")
    toy.add_argument("--out", required=True)
    toy.add_argument("--seed", type=int, default=0)
    toy.add_argument("--speakers", type=int, default=6)
    toy.set_defaults(func=cmd_toy)

    sim = sub.add_parser("simulate", help="simulate multi-talker mixtures")
    sim.add_argument("--source", required=True, help="single-talker source manifest")
    sim.add_argument("--protocol", choices=["left_aligned", "delayed"], default="left_aligned")
    sim.add_argument("--speakers", type=int, default=2)
    sim.add_argument("--count", type=int, default=500)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.add_argument("--enrollment-seconds", type=float, default=3.0)
    sim.add_argument("--min-delay", type=float, default=0.5)
    sim.add_argument("--max-source-seconds", type=float, default=2.5)
    sim.set_defaults(func=cmd_simulate)

    tr = sub.add_parser("train", help="train a stage from a config file")
    tr.add_argument("--config", required=True)
    tr.add_argument("--resume", default=None, help="checkpoint directory to resume from")
    tr.add_argument("--steps", type=int, default=None, help="cap the number of steps this run")
    tr.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config value (repeatable)")
    tr.add_argument("--quiet", action="store_true")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="score a manifest with a checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--task", choices=["multi", "target"], default="multi")
    ev.add_argument("--unit", choices=["word", "char"], default="word")
    ev.add_argument("--out", required=True)
    ev.add_argument("--max-len", type=int, default=32)
    ev.set_defaults(func=cmd_eval)

    ts = sub.add_parser("transcribe", help="transcribe one audio file")
    ts.add_argument("--checkpoint", required=True)
    ts.add_argument("--audio", required=True)
    ts.add_argument("--enrollment", default=None)
    ts.add_argument("--discard-non-target", action="store_true")
    ts.add_argument("--max-len", type=int, default=32)
    ts.set_defaults(func=cmd_transcribe)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MixasrError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
