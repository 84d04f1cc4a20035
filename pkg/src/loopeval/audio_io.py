"""WAV decode/encode, stereo downmix, and band-limited resampling.

The stdlib `wave` module cannot read IEEE-float WAVs, so the RIFF parsing is
done by hand.  Accepted input: PCM 16-bit, PCM 24-bit, or IEEE float 32-bit,
mono or stereo, any sample rate.  Output is always PCM 16-bit mono.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class AudioDecodeError(Exception):
    """Raised when a WAV file cannot be decoded."""


@dataclass
class AudioClip:
    """Mono audio: float samples with nominal range [-1, 1] plus a rate."""

    samples: np.ndarray
    sample_rate: int
    source_path: str | None = field(default=None)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioClip samples must be one-dimensional")
        if self.sample_rate <= 0:
            raise ValueError("AudioClip sample_rate must be positive")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


_PCM = 1
_IEEE_FLOAT = 3
_EXTENSIBLE = 0xFFFE


def _parse_chunks(data: bytes, path: Path):
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise AudioDecodeError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    chunks = {}
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        if body_start + size > len(data):
            # tolerate a truncated final data chunk only if it is non-empty
            size = len(data) - body_start
            if size <= 0:
                raise AudioDecodeError(f"{path}: truncated {cid!r} chunk")
        if cid in (b"fmt ", b"data") and cid not in chunks:
            chunks[cid] = data[body_start : body_start + size]
        pos = body_start + size + (size & 1)  # chunks are word-aligned
    if b"fmt " not in chunks or b"data" not in chunks:
        raise AudioDecodeError(f"{path}: missing fmt or data chunk")
    return chunks[b"fmt "], chunks[b"data"]


def read_wav(path) -> AudioClip:
    """Decode a WAV file to a mono AudioClip.

    Integer formats are scaled to [-1, 1] by dividing by 2^(bits-1); stereo
    is downmixed as (L+R)/2.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise AudioDecodeError(f"{path}: unreadable ({exc})") from exc

    fmt, payload = _parse_chunks(raw, path)
    if len(fmt) < 16:
        raise AudioDecodeError(f"{path}: malformed fmt chunk")
    tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if tag == _EXTENSIBLE:
        if len(fmt) < 26:
            raise AudioDecodeError(f"{path}: malformed extensible fmt chunk")
        (tag,) = struct.unpack_from("<H", fmt, 24)  # first bytes of SubFormat
    if channels not in (1, 2):
        raise AudioDecodeError(f"{path}: {channels} channels (only 1 or 2 supported)")
    if rate <= 0:
        raise AudioDecodeError(f"{path}: invalid sample rate {rate}")

    if tag == _PCM and bits == 16:
        frames = np.frombuffer(payload[: len(payload) - len(payload) % (2 * channels)], dtype="<i2")
        x = frames.astype(np.float64) / 32768.0
    elif tag == _PCM and bits == 24:
        usable = len(payload) - len(payload) % (3 * channels)
        b = np.frombuffer(payload[:usable], dtype=np.uint8).reshape(-1, 3)
        v = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        x = v.astype(np.float64) / float(1 << 23)
    elif tag == _IEEE_FLOAT and bits == 32:
        frames = np.frombuffer(payload[: len(payload) - len(payload) % (4 * channels)], dtype="<f4")
        x = frames.astype(np.float64)
    else:
        raise AudioDecodeError(f"{path}: unsupported format tag={tag} bits={bits}")

    if channels == 2:
        x = x[: len(x) - len(x) % 2].reshape(-1, 2)
        x = (x[:, 0] + x[:, 1]) / 2.0
    if len(x) == 0:
        raise AudioDecodeError(f"{path}: no audio frames")
    return AudioClip(samples=x, sample_rate=rate, source_path=str(path))


def write_wav(clip: AudioClip, path) -> None:
    """Write a clip as PCM 16-bit mono; values are clamped to [-1, 1]."""
    x = np.clip(clip.samples, -1.0, 1.0)
    v = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    payload = v.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        _PCM,
        1,
        clip.sample_rate,
        clip.sample_rate * 2,
        2,
        16,
        b"data",
        len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


_KAISER_BETA = 8.0
_HALF_TAPS = 32


def _sinc_weights(frac_positions: np.ndarray, cutoff: float) -> np.ndarray:
    """Kaiser-windowed sinc taps at offsets (positions x 64 taps)."""
    w = np.sinc(cutoff * frac_positions) * cutoff
    arg = frac_positions / _HALF_TAPS
    window = np.where(
        np.abs(arg) <= 1.0,
        np.i0(_KAISER_BETA * np.sqrt(np.maximum(0.0, 1.0 - arg * arg))) / np.i0(_KAISER_BETA),
        0.0,
    )
    return w * window


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Windowed-sinc resampling (Kaiser beta=8, 32 taps per side).

    Pass-through (bit-exact) when the rates already match.  Output length is
    round(n * target_rate / input_rate).
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), clip.sample_rate, clip.source_path)

    x = clip.samples
    n_in = len(x)
    n_out = int(round(n_in * target_rate / clip.sample_rate))
    ratio = clip.sample_rate / target_rate  # input samples per output sample
    cutoff = min(1.0, target_rate / clip.sample_rate)

    out = np.empty(n_out)
    taps = np.arange(-_HALF_TAPS + 1, _HALF_TAPS + 1)  # 64 taps
    block = 65536
    for start in range(0, n_out, block):
        stop = min(start + block, n_out)
        t = np.arange(start, stop) * ratio
        base = np.floor(t).astype(np.int64)
        idx = base[:, None] + taps[None, :]
        frac = t[:, None] - idx
        weights = _sinc_weights(frac, cutoff)
        valid = (idx >= 0) & (idx < n_in)
        gathered = np.where(valid, x[np.clip(idx, 0, n_in - 1)], 0.0)
        out[start:stop] = np.sum(gathered * weights, axis=1)
    return AudioClip(out, target_rate, clip.source_path)
