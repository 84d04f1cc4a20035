"""Spectral front end: STFT, mel filterbank, log-mel rendering, time stretch.

Conventions used throughout the toolkit:

* STFT frames are reflect-centered; a signal of N samples yields
  floor(N / hop) + 1 frames.
* The mel scale is HTK-style, m(f) = 2595 * log10(1 + f / 700), and filter
  rows are peak-normalized after being sampled at the FFT bin frequencies.
* Mel values are natural-log compressed power with floor 1e-5.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio_io import AudioClip

LOG_FLOOR = 1e-5
N_MELS = 80


@dataclass(frozen=True)
class StftFrameSpec:
    window_size: int = 1024
    hop_size: int = 275

    def __post_init__(self):
        if self.hop_size > self.window_size:
            raise ValueError("hop_size must not exceed window_size")

    def frame_count(self, n_samples: int) -> int:
        return n_samples // self.hop_size + 1


@dataclass
class MelSpectrogram:
    """80 x T log-mel matrix plus the parameters that produced it."""

    values: np.ndarray
    sample_rate: int
    frame_spec: StftFrameSpec
    source_id: str = field(default="")

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != N_MELS:
            raise ValueError(f"mel matrix must be {N_MELS} x T, got {self.values.shape}")

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def _hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _reflect_indices(n: int, positions: np.ndarray) -> np.ndarray:
    # even ("reflect") extension valid for any padding amount
    if n == 1:
        return np.zeros(len(positions), dtype=np.int64)
    period = 2 * n - 2
    idx = np.abs(positions) % period
    return np.where(idx >= n, period - idx, idx)


def stft_magnitude(clip: AudioClip, spec: StftFrameSpec = StftFrameSpec()) -> np.ndarray:
    """Magnitude STFT, shape (window_size/2 + 1, floor(N/hop) + 1)."""
    x = clip.samples
    if len(x) < 1:
        raise ValueError("empty clip")
    win = spec.window_size
    hop = spec.hop_size
    half = win // 2
    pos = np.arange(-half, len(x) + half)
    padded = x[_reflect_indices(len(x), pos)]
    n_frames = spec.frame_count(len(x))
    starts = np.arange(n_frames) * hop
    frames = padded[starts[:, None] + np.arange(win)[None, :]]
    spectrum = np.fft.rfft(frames * _hann(win), axis=1)
    return np.abs(spectrum).T


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    sample_rate: int,
    n_fft_bins: int = 513,
    n_mels: int = N_MELS,
    f_min: float = 0.0,
    f_max: float | None = None,
) -> np.ndarray:
    """Triangular mel filters with unit peak, shape (n_mels, n_fft_bins)."""
    if f_max is None:
        f_max = sample_rate / 2.0
    if not (0.0 <= f_min < f_max <= sample_rate / 2.0):
        raise ValueError(f"invalid frequency range [{f_min}, {f_max}] at rate {sample_rate}")
    if n_mels < 1:
        raise ValueError("n_mels must be >= 1")

    n_fft = 2 * (n_fft_bins - 1)
    bin_freqs = np.arange(n_fft_bins) * (sample_rate / n_fft)
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))

    left = edges[:-2, None]
    center = edges[1:-1, None]
    right = edges[2:, None]
    rising = (bin_freqs[None, :] - left) / np.maximum(center - left, 1e-12)
    falling = (right - bin_freqs[None, :]) / np.maximum(right - center, 1e-12)
    fb = np.maximum(0.0, np.minimum(rising, falling))

    peaks = fb.max(axis=1)
    nonzero = peaks > 0
    fb[nonzero] /= peaks[nonzero, None]
    return fb


_FB_CACHE: dict[tuple, np.ndarray] = {}


def _cached_filterbank(sample_rate: int, n_fft_bins: int) -> np.ndarray:
    key = (sample_rate, n_fft_bins)
    if key not in _FB_CACHE:
        _FB_CACHE[key] = mel_filterbank(sample_rate, n_fft_bins, N_MELS, 0.0, sample_rate / 2.0)
    return _FB_CACHE[key]


def mel_spectrogram(clip: AudioClip, spec: StftFrameSpec = StftFrameSpec()) -> MelSpectrogram:
    """Log-power mel spectrogram of a 44.1 kHz clip."""
    if clip.sample_rate != 44100:
        raise ValueError(f"mel_spectrogram expects 44100 Hz input, got {clip.sample_rate}")
    mag = stft_magnitude(clip, spec)
    fb = _cached_filterbank(clip.sample_rate, mag.shape[0])
    power = fb @ (mag * mag)
    values = np.log(np.maximum(power, LOG_FLOOR))
    return MelSpectrogram(
        values=values,
        sample_rate=clip.sample_rate,
        frame_spec=spec,
        source_id=clip.source_path or "",
    )


_STRETCH_WIN = 2048
_STRETCH_HOP = 512
MIN_STRETCH_RATIO = 0.25
MAX_STRETCH_RATIO = 4.0


def time_stretch(clip: AudioClip, target_length: int) -> AudioClip:
    """Phase-vocoder stretch to exactly `target_length` samples.

    Pitch is preserved; the stretch ratio target/current must lie in
    [0.25, 4.0].  Equal lengths are an exact pass-through.
    """
    n_in = len(clip.samples)
    if n_in < _STRETCH_WIN:
        raise ValueError(f"clip too short to stretch ({n_in} < {_STRETCH_WIN} samples)")
    ratio = target_length / n_in
    if not (MIN_STRETCH_RATIO <= ratio <= MAX_STRETCH_RATIO):
        raise ValueError(
            f"stretch ratio {ratio:.4f} outside [{MIN_STRETCH_RATIO}, {MAX_STRETCH_RATIO}]"
        )
    if target_length == n_in:
        return AudioClip(clip.samples.copy(), clip.sample_rate, clip.source_path)

    win = _STRETCH_WIN
    hop_s = _STRETCH_HOP
    hop_a = hop_s * n_in / target_length
    n_frames = int(np.ceil(target_length / hop_s)) + 2
    a_pos = np.round(np.arange(n_frames) * hop_a).astype(np.int64)

    left = win // 2
    right = max(0, int(a_pos[-1]) + win - (left + n_in))
    xp = np.concatenate([np.zeros(left), clip.samples, np.zeros(right)])
    window = _hann(win)
    frames = xp[a_pos[:, None] + np.arange(win)[None, :]] * window
    spectrum = np.fft.rfft(frames, axis=1)
    mag = np.abs(spectrum)
    phase = np.angle(spectrum)

    omega = 2.0 * np.pi * np.arange(win // 2 + 1) / win
    out_phase = np.empty_like(phase)
    out_phase[0] = phase[0]
    two_pi = 2.0 * np.pi
    for t in range(1, n_frames):
        dp = a_pos[t] - a_pos[t - 1]
        delta = phase[t] - phase[t - 1] - omega * dp
        delta -= two_pi * np.round(delta / two_pi)
        inst = omega + delta / dp
        out_phase[t] = out_phase[t - 1] + inst * hop_s

    resynth = np.fft.irfft(mag * np.exp(1j * out_phase), n=win, axis=1) * window
    total = (n_frames - 1) * hop_s + win
    acc = np.zeros(total)
    norm = np.zeros(total)
    wsq = window * window
    for t in range(n_frames):
        sl = slice(t * hop_s, t * hop_s + win)
        acc[sl] += resynth[t]
        norm[sl] += wsq
    out = acc / np.maximum(norm, 1e-8)

    start = win // 2
    out = out[start : start + target_length]
    if len(out) < target_length:
        out = np.pad(out, (0, target_length - len(out)))
    return AudioClip(out, clip.sample_rate, clip.source_path)
