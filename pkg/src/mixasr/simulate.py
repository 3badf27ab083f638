"""Multi-talker mixture simulation.

Two protocols: left-aligned (all sources start at t=0, the shorter fully
overlapped) and delayed (later speakers offset by uniformly sampled
delays, partially overlapped). Joint-task inputs prepend a 3 s enrollment
clip of the target speaker; when that would exceed the model's input
limit, the mixture alone is time-stretched so the enrollment keeps its
exact prefix-frame alignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip, concat, time_stretch_to_limit
from .errors import ArityError, ModeError, SpeakerCollision


@dataclass
class SourceUtterance:
    clip: AudioClip
    transcript: str
    speaker_id: str


@dataclass
class Reference:
    speaker_id: str
    transcript: str


@dataclass
class MixtureExample:
    """One simulated mixture plus everything needed to score or train on it."""

    id: str
    mixture: AudioClip
    references: list[Reference]
    delays_s: list[float]
    target_index: int | None = None
    enrollment: AudioClip | None = None
    enrollment_speaker_id: str | None = None
    language: str = "en"

    def __post_init__(self):
        if len(self.references) != len(self.delays_s):
            raise ArityError(
                f"{len(self.references)} references vs {len(self.delays_s)} delays"
            )
        if self.target_index is not None and not 0 <= self.target_index < len(self.references):
            raise ArityError(f"target index {self.target_index} out of range")

    @property
    def n_speakers(self) -> int:
        return len(self.references)

    @property
    def speaker_ids(self) -> list[str]:
        return [r.speaker_id for r in self.references]


def _check_sources(sources: list[SourceUtterance]) -> None:
    if len(sources) < 2:
        raise ArityError(f"need at least 2 sources, got {len(sources)}")
    ids = [s.speaker_id for s in sources]
    if len(set(ids)) != len(ids):
        raise SpeakerCollision(f"duplicate speaker ids in mixture: {ids}")
    rates = {s.clip.sample_rate_hz for s in sources}
    if len(rates) != 1:
        raise ArityError(f"mixed sample rates: {rates}")


def mix_at_delays(
    sources: list[SourceUtterance],
    delays_s: list[float],
    gains: list[float] | None = None,
    normalize: bool = True,
) -> AudioClip:
    """Sum gain-scaled sources at their delays.

    Mixture length is exactly max_i(delay_i + len_i) in samples. With unit
    gains and normalize=False the mixture equals the plain offset sum.
    """
    rate = sources[0].clip.sample_rate_hz
    if gains is None:
        gains = [1.0] * len(sources)
    offsets = [int(round(d * rate)) for d in delays_s]
    total = max(off + len(s.clip.samples) for off, s in zip(offsets, sources))
    out = np.zeros(total)
    for off, g, s in zip(offsets, gains, sources):
        out[off:off + len(s.clip.samples)] += g * s.clip.samples
    clip = AudioClip(out, rate)
    return clip.normalized(0.9) if normalize else clip


def simulate_left_aligned(
    sources: list[SourceUtterance],
    gains: list[float] | None = None,
    example_id: str = "",
    normalize: bool = True,
) -> MixtureExample:
    """All delays zero: the shorter sources fully overlap the longest."""
    _check_sources(sources)
    delays = [0.0] * len(sources)
    mixture = mix_at_delays(sources, delays, gains, normalize)
    return MixtureExample(
        id=example_id,
        mixture=mixture,
        references=[Reference(s.speaker_id, s.transcript) for s in sources],
        delays_s=delays,
    )


def simulate_delayed(
    sources: list[SourceUtterance],
    rng: np.random.Generator,
    gains: list[float] | None = None,
    min_delay_s: float = 0.5,
    example_id: str = "",
    normalize: bool = True,
) -> MixtureExample:
    """First speaker at zero; each later speaker's delay drawn uniformly
    between min_delay_s and the end of the audio placed so far."""
    _check_sources(sources)
    delays = [0.0]
    end = sources[0].clip.duration_seconds
    for s in sources[1:]:
        hi = max(end, min_delay_s)
        d = float(rng.uniform(min_delay_s, hi)) if hi > min_delay_s else min_delay_s
        delays.append(d)
        end = max(end, d + s.clip.duration_seconds)
    mixture = mix_at_delays(sources, delays, gains, normalize)
    return MixtureExample(
        id=example_id,
        mixture=mixture,
        references=[Reference(s.speaker_id, s.transcript) for s in sources],
        delays_s=delays,
    )


def assemble_joint_input(example: MixtureExample, max_input_seconds: float = 30.0) -> AudioClip:
    """Enrollment followed by the mixture, within the model's input limit.

    If the concatenation would exceed the limit, the mixture (never the
    enrollment, whose duration fixes the prefix frames) is stretched.
    """
    if example.enrollment is None:
        raise ModeError(f"example {example.id!r} has no enrollment clip")
    if example.enrollment_speaker_id is not None and (
        example.enrollment_speaker_id not in example.speaker_ids
    ):
        raise ModeError(
            f"enrollment speaker {example.enrollment_speaker_id!r} not among "
            f"mixture speakers {example.speaker_ids}"
        )
    budget = max_input_seconds - example.enrollment.duration_seconds
    mixture = time_stretch_to_limit(example.mixture, budget)
    return concat(example.enrollment, mixture)
