"""Synthetic desk-scale corpus with spectrally distinguishable speakers.

Each (speaker, word) pair is a tone at the center frequency of its own
mel filter: speaker s owns a contiguous band of filters, word w picks the
filter within the band. Utterances are word-tone sequences with attack/
release envelopes, amplitude jitter, slight frequency jitter, and a noise
floor, so models must generalize rather than match bit patterns. Speakers
are separable by band, which is what the separator and identifier need to
learn; transcription must ignore the band and report the word sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, write_wav
from .errors import ConfigError
from .features import mel_center_frequencies
from .manifest import ManifestEntry, write_manifest

LEXICON = [
    "zero", "one", "two", "three", "four",
    "five", "six", "seven", "eight", "nine",
]


@dataclass
class ToySpec:
    n_speakers: int = 6
    sample_rate_hz: int = 16000
    n_mels: int = 80
    base_filter: int = 12
    word_seconds: float = 0.2
    tone_seconds: float = 0.16
    noise_level: float = 0.003
    amp: float = 0.3
    short_words: tuple[int, int] = (3, 6)  # inclusive range
    long_words: tuple[int, int] = (16, 19)
    n_short_per_speaker: int = 100
    n_long_per_speaker: int = 8
    n_dev_per_speaker: int = 10
    n_dev_long_per_speaker: int = 3

    def validate(self) -> None:
        top = self.base_filter + self.n_speakers * len(LEXICON)
        if top > self.n_mels - 4:
            raise ConfigError(
                f"{self.n_speakers} speakers x {len(LEXICON)} words needs filters up "
                f"to {top}, beyond the usable range of {self.n_mels} mel filters"
            )

    def speaker_ids(self) -> list[str]:
        return [f"spk{i:02d}" for i in range(self.n_speakers)]

    def tone_frequency(self, speaker_index: int, word_index: int) -> float:
        centers = mel_center_frequencies(self.sample_rate_hz, self.n_mels)
        return float(centers[self.base_filter + speaker_index * len(LEXICON) + word_index])


def synth_utterance(
    words: list[str], speaker_index: int, spec: ToySpec, rng: np.random.Generator
) -> AudioClip:
    """One synthetic utterance: a tone per word in the speaker's band."""
    sr = spec.sample_rate_hz
    n_word = int(spec.word_seconds * sr)
    n_tone = int(spec.tone_seconds * sr)
    out = rng.normal(0.0, spec.noise_level, size=n_word * len(words))
    attack = int(0.012 * sr)
    release = int(0.024 * sr)
    env = np.ones(n_tone)
    env[:attack] = 0.5 - 0.5 * np.cos(np.pi * np.arange(attack) / attack)
    env[-release:] *= 0.5 + 0.5 * np.cos(np.pi * np.arange(release) / release)
    gain = rng.uniform(0.75, 1.0)
    for k, w in enumerate(words):
        widx = LEXICON.index(w)
        f = spec.tone_frequency(speaker_index, widx) * rng.uniform(0.99, 1.01)
        t = np.arange(n_tone) / sr
        phase = rng.uniform(0.0, 2 * np.pi)
        tone = np.sin(2 * np.pi * f * t + phase) * env
        amp = spec.amp * gain * rng.uniform(0.85, 1.15)
        start = k * n_word
        out[start:start + n_tone] += amp * tone
    return AudioClip(np.clip(out, -1.0, 1.0), sr)


def _random_words(rng: np.random.Generator, lo: int, hi: int) -> list[str]:
    n = int(rng.integers(lo, hi + 1))
    return [LEXICON[int(i)] for i in rng.integers(0, len(LEXICON), size=n)]


def generate_singles(
    out_dir: str | Path, seed: int = 0, spec: ToySpec | None = None
) -> dict[str, Path]:
    """Write the single-talker corpus: short and long utterances per speaker.

    Short utterances feed mixture simulation and foundation pretraining;
    long ones (>= 3 s) serve as enrollment sources. Returns the manifest
    paths for the train and dev splits.
    """
    spec = spec or ToySpec()
    spec.validate()
    out_dir = Path(out_dir)
    wav_dir = out_dir / "singles"
    wav_dir.mkdir(parents=True, exist_ok=True)
    splits = {"train": [], "dev": []}
    for s, speaker in enumerate(spec.speaker_ids()):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0x70F, s)))
        counts = (
            ("train", spec.n_short_per_speaker, spec.short_words),
            ("train", spec.n_long_per_speaker, spec.long_words),
            ("dev", spec.n_dev_per_speaker, spec.short_words),
            ("dev", spec.n_dev_long_per_speaker, spec.long_words),
        )
        serial = 0
        for split, n, (lo, hi) in counts:
            for _ in range(n):
                words = _random_words(rng, lo, hi)
                clip = synth_utterance(words, s, spec, rng)
                name = f"{speaker}_{serial:04d}.wav"
                write_wav(wav_dir / name, clip)
                splits[split].append(
                    ManifestEntry(
                        id=f"{speaker}_{serial:04d}",
                        audio=f"singles/{name}",
                        speakers=[speaker],
                        transcripts=[" ".join(words)],
                        delays_s=[0.0],
                    )
                )
                serial += 1
    paths = {}
    for split, entries in splits.items():
        path = out_dir / f"singles_{split}.jsonl"
        write_manifest(path, entries, header={"seed": seed, "kind": f"toy singles {split}"})
        paths[split] = path
    return paths
