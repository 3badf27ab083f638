"""Log-Mel filterbank frontend.

Frame arithmetic is load-bearing for the rest of the system: a feature
frame every 10 ms, a stride-2 conv stem, hence one encoder frame every
20 ms. For a clip of d seconds, T_feat = floor(d * 100) and
T_enc = floor(d * 50); a 3.0 s enrollment is exactly 150 encoder frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip
from .errors import InvalidAudio, SampleRateMismatch

HOP_MS = 10
ENCODER_FRAME_MS = 20
LOG_FLOOR = 1e-10


def feature_frames(n_samples: int, sample_rate_hz: int) -> int:
    return n_samples // (sample_rate_hz * HOP_MS // 1000)


def encoder_frames_from_features(t_feat: int) -> int:
    return t_feat // 2


def encoder_frames_for_seconds(seconds: float) -> int:
    """Encoder frames covering `seconds` of audio (20 ms per frame)."""
    return int(np.floor(seconds * 1000.0 / ENCODER_FRAME_MS))


@dataclass
class FeatureMap:
    """Log-Mel features for one clip, shape (n_mels, T_feat)."""

    values: np.ndarray
    n_mels: int = 80
    feature_hop_ms: int = HOP_MS
    encoder_frame_ms: int = ENCODER_FRAME_MS

    @property
    def t_feat(self) -> int:
        return self.values.shape[1]

    @property
    def t_enc(self) -> int:
        return encoder_frames_from_features(self.t_feat)


def mel_filterbank(sample_rate_hz: int, n_fft: int, n_mels: int) -> np.ndarray:
    """HTK-style triangular mel filters, (n_mels, n_fft//2 + 1)."""

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    f_max = sample_rate_hz / 2.0
    mel_pts = np.linspace(0.0, hz_to_mel(f_max), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    bin_freqs = np.linspace(0.0, f_max, n_fft // 2 + 1)
    fb = np.zeros((n_mels, len(bin_freqs)))
    for m in range(n_mels):
        lo, center, hi = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (bin_freqs - lo) / max(center - lo, 1e-9)
        down = (hi - bin_freqs) / max(hi - center, 1e-9)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def mel_center_frequencies(sample_rate_hz: int, n_mels: int) -> np.ndarray:
    """Center frequency (Hz) of each mel filter."""
    f_max = sample_rate_hz / 2.0
    mel_pts = np.linspace(0.0, 2595.0 * np.log10(1.0 + f_max / 700.0), n_mels + 2)
    return 700.0 * (10.0 ** (mel_pts[1:-1] / 2595.0) - 1.0)


class FeatureExtractor:
    """Waveform -> per-utterance scaled log-Mel features.

    25 ms Hann window, 10 ms hop, log10 floored at 1e-10, values clamped
    to (max - 8) and affinely mapped by (x + 4) / 4, computed per clip.
    """

    def __init__(
        self,
        sample_rate_hz: int = 16000,
        n_mels: int = 80,
        max_input_seconds: float = 30.0,
        fixed_window: bool = False,
    ):
        self.sample_rate_hz = sample_rate_hz
        self.n_mels = n_mels
        self.max_input_seconds = max_input_seconds
        self.fixed_window = fixed_window
        self.win_length = sample_rate_hz * 25 // 1000
        self.hop_length = sample_rate_hz * HOP_MS // 1000
        self.n_fft = self.win_length
        self._window = np.hanning(self.win_length)
        self._filters = mel_filterbank(sample_rate_hz, self.n_fft, n_mels)

    def __call__(self, clip: AudioClip) -> FeatureMap:
        if clip.sample_rate_hz != self.sample_rate_hz:
            raise SampleRateMismatch(
                f"clip at {clip.sample_rate_hz} Hz, extractor expects {self.sample_rate_hz} Hz"
            )
        if not np.all(np.isfinite(clip.samples)):
            raise InvalidAudio("non-finite samples")
        x = clip.samples
        n_full = int(self.max_input_seconds * self.sample_rate_hz)
        if len(x) > n_full:
            raise InvalidAudio(
                f"clip of {clip.duration_seconds:.2f}s exceeds the "
                f"{self.max_input_seconds:.0f}s limit; stretch it first"
            )
        if len(x) < self.hop_length:
            raise InvalidAudio("clip shorter than one feature frame")
        if self.fixed_window:
            x = np.pad(x, (0, n_full - len(x)))
        t_feat = len(x) // self.hop_length
        # pad the tail so frame t covers [t*hop, t*hop + win) for all t
        need = (t_feat - 1) * self.hop_length + self.win_length
        if need > len(x):
            x = np.pad(x, (0, need - len(x)))
        idx = np.arange(self.win_length)[None, :] + self.hop_length * np.arange(t_feat)[:, None]
        frames = x[idx] * self._window[None, :]
        power = np.abs(np.fft.rfft(frames, n=self.n_fft, axis=1)) ** 2
        mel = power @ self._filters.T  # (T, n_mels)
        logmel = np.log10(np.maximum(mel, LOG_FLOOR))
        logmel = np.maximum(logmel, logmel.max() - 8.0)
        logmel = (logmel + 4.0) / 4.0
        return FeatureMap(values=logmel.T.copy(), n_mels=self.n_mels)
