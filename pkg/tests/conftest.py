import struct

import numpy as np
import pytest

from loopeval.audio_io import AudioClip


def make_wav_bytes(frames: np.ndarray, sample_rate: int, fmt: str) -> bytes:
    """Hand-rolled WAV encoder, independent of the package's writer.

    `frames` is (n,) mono or (n, 2) stereo float in [-1, 1].
    fmt: 'pcm16', 'pcm24', or 'float32'.
    """
    frames = np.atleast_2d(frames.T).T  # (n,) -> (n, 1)
    if frames.ndim == 1:
        frames = frames[:, None]
    channels = frames.shape[1]

    if fmt == "pcm16":
        tag, bits = 1, 16
        ints = np.clip(np.round(frames * 32768.0), -32768, 32767).astype("<i2")
        payload = ints.tobytes()
    elif fmt == "pcm24":
        tag, bits = 1, 24
        ints = np.clip(np.round(frames * float(1 << 23)), -(1 << 23), (1 << 23) - 1).astype(
            np.int64
        )
        flat = ints.reshape(-1)
        raw = bytearray()
        for v in flat:
            raw += struct.pack("<i", int(v))[:3]
        payload = bytes(raw)
    elif fmt == "float32":
        tag, bits = 3, 32
        payload = frames.astype("<f4").tobytes()
    else:
        raise ValueError(fmt)

    block = channels * bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        tag,
        channels,
        sample_rate,
        sample_rate * block,
        block,
        bits,
        b"data",
        len(payload),
    )
    return header + payload


def sine(freq: float, seconds: float, rate: int = 44100, amp: float = 0.5) -> AudioClip:
    t = np.arange(int(round(seconds * rate))) / rate
    return AudioClip(amp * np.sin(2.0 * np.pi * freq * t), rate)


def dominant_frequency(samples: np.ndarray, rate: int) -> float:
    spectrum = np.abs(np.fft.rfft(samples))
    spectrum[0] = 0.0
    return float(np.argmax(spectrum) * rate / len(samples))


@pytest.fixture
def tone_wav(tmp_path):
    def _make(name, freq=440.0, seconds=2.0, rate=44100, fmt="pcm16", stereo=False):
        clip = sine(freq, seconds, rate)
        frames = clip.samples
        if stereo:
            frames = np.stack([frames, frames], axis=1)
        path = tmp_path / name
        path.write_bytes(make_wav_bytes(frames, rate, fmt))
        return path

    return _make
