"""Waveform containers, WAV file I/O, and time-domain transforms."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, EnrollmentTooShort, InvalidAudio


@dataclass
class AudioClip:
    """Mono waveform with sample rate; the unit of all audio handling."""

    samples: np.ndarray
    sample_rate_hz: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise InvalidAudio(f"expected mono 1-D samples, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidAudio("non-finite samples")

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def normalized(self, peak: float = 0.9) -> "AudioClip":
        """Scale down so the absolute peak is at most `peak` (never scales up)."""
        top = np.abs(self.samples).max() if len(self.samples) else 0.0
        if top <= peak or top == 0.0:
            return self
        return AudioClip(self.samples * (peak / top), self.sample_rate_hz)


def read_wav(path: str | Path) -> AudioClip:
    """Read a 16-bit PCM mono WAV file."""
    with wave.open(str(path), "rb") as f:
        if f.getsampwidth() != 2:
            raise InvalidAudio(f"{path}: expected 16-bit PCM, got {8 * f.getsampwidth()}-bit")
        if f.getnchannels() != 1:
            raise InvalidAudio(f"{path}: expected mono, got {f.getnchannels()} channels")
        raw = f.readframes(f.getnframes())
        rate = f.getframerate()
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioClip(samples, rate)


def write_wav(path: str | Path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM mono WAV (samples clipped to [-1, 1])."""
    pcm = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.round(pcm * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(clip.sample_rate_hz)
        f.writeframes(pcm.tobytes())


def concat(a: AudioClip, b: AudioClip) -> AudioClip:
    if a.sample_rate_hz != b.sample_rate_hz:
        raise InvalidAudio("sample rate mismatch in concatenation")
    return AudioClip(np.concatenate([a.samples, b.samples]), a.sample_rate_hz)


def trim_enrollment(clip: AudioClip, seconds: float = 3.0, rng: np.random.Generator | None = None) -> AudioClip:
    """Cut a contiguous window of `seconds` at a uniformly sampled start.

    Raises EnrollmentTooShort when the clip cannot supply the window; the
    caller is expected to pick another utterance of the same speaker.
    """
    n_needed = int(round(seconds * clip.sample_rate_hz))
    if len(clip.samples) < n_needed:
        raise EnrollmentTooShort(
            f"clip of {clip.duration_seconds:.2f}s shorter than {seconds}s enrollment"
        )
    slack = len(clip.samples) - n_needed
    start = 0 if slack == 0 or rng is None else int(rng.integers(0, slack + 1))
    return AudioClip(clip.samples[start:start + n_needed], clip.sample_rate_hz)


# -- pitch-preserving time stretch -------------------------------------------

_STRETCH_NFFT = 1024
_STRETCH_HOP = 256


def _frame(x: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    n_frames = 1 + max(0, (len(x) - n_fft)) // hop
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def _stft(x: np.ndarray, n_fft: int, hop: int, window: np.ndarray) -> np.ndarray:
    pad = n_fft // 2
    xp = np.pad(x, pad, mode="reflect" if len(x) > pad else "constant")
    frames = _frame(xp, n_fft, hop) * window[None, :]
    return np.fft.rfft(frames, axis=1).T  # (bins, frames)

def _istft(spec: np.ndarray, n_fft: int, hop: int, window: np.ndarray) -> np.ndarray:
    frames = np.fft.irfft(spec.T, n=n_fft, axis=1) * window[None, :]
    n_frames = frames.shape[0]
    out = np.zeros((n_frames - 1) * hop + n_fft)
    norm = np.zeros_like(out)
    wsq = window ** 2
    for i in range(n_frames):
        out[i * hop:i * hop + n_fft] += frames[i]
        norm[i * hop:i * hop + n_fft] += wsq
    out /= np.maximum(norm, 1e-8)
    pad = n_fft // 2
    return out[pad:-pad] if len(out) > 2 * pad else out


def _phase_vocoder(spec: np.ndarray, rate: float, n_fft: int, hop: int) -> np.ndarray:
    n_bins, n_frames = spec.shape
    steps = np.arange(0, n_frames, rate)
    advance = 2.0 * np.pi * hop * np.arange(n_bins) / n_fft
    padded = np.pad(spec, [(0, 0), (0, 2)])
    out = np.zeros((n_bins, len(steps)), dtype=complex)
    phase = np.angle(spec[:, 0])
    for i, step in enumerate(steps):
        j = int(step)
        frac = step - j
        s0 = padded[:, j]
        s1 = padded[:, j + 1]
        mag = (1.0 - frac) * np.abs(s0) + frac * np.abs(s1)
        out[:, i] = mag * np.exp(1j * phase)
        dphi = np.angle(s1) - np.angle(s0) - advance
        dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
        phase = phase + advance + dphi
    return out


def time_stretch(clip: AudioClip, factor: float) -> AudioClip:
    """Phase-vocoder stretch to `factor` times the original duration."""
    if factor <= 0:
        raise ConfigError(f"stretch factor must be positive, got {factor}")
    window = np.hanning(_STRETCH_NFFT)
    spec = _stft(clip.samples, _STRETCH_NFFT, _STRETCH_HOP, window)
    stretched = _phase_vocoder(spec, 1.0 / factor, _STRETCH_NFFT, _STRETCH_HOP)
    y = _istft(stretched, _STRETCH_NFFT, _STRETCH_HOP, window)
    n_target = int(round(len(clip.samples) * factor))
    if len(y) >= n_target:
        y = y[:n_target]
    else:
        y = np.pad(y, (0, n_target - len(y)))
    return AudioClip(np.clip(y, -1.0, 1.0), clip.sample_rate_hz)


def time_stretch_to_limit(clip: AudioClip, limit_s: float) -> AudioClip:
    """Stretch only when the clip exceeds `limit_s`; identity otherwise."""
    if limit_s <= 0:
        raise ConfigError(f"duration limit must be positive, got {limit_s}")
    if clip.duration_seconds <= limit_s:
        return clip
    out = time_stretch(clip, limit_s / clip.duration_seconds)
    max_samples = int(limit_s * clip.sample_rate_hz)
    if len(out.samples) > max_samples:
        out = AudioClip(out.samples[:max_samples], clip.sample_rate_hz)
    return out
