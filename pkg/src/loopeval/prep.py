"""Corpus preparation: slice loops at downbeats, normalize tempo, render mels.

The end product of `prepare_dataset` is a directory of 80x320 LTEN tensors
(one per bar) plus a JSON manifest describing where each bar came from and
why any bar was dropped.  Output is byte-deterministic for identical inputs.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsp, tensorio
from .audio_io import AudioClip, AudioDecodeError, read_wav, resample

CANONICAL_RATE = 44100
TARGET_BAR_SAMPLES = 88200  # four beats at 120 BPM, 44.1 kHz
FIXED_FRAMES = 320
BPM_MIN = 30.0
BPM_MAX = 480.0

STATUS_OK = "ok"
STATUS_DROP_TEMPO = "dropped:tempo_range"
STATUS_DROP_RATIO = "dropped:stretch_ratio"


class AnnotationError(Exception):
    """Raised for unusable downbeat annotations."""


@dataclass
class DownbeatAnnotation:
    source_path: str
    downbeat_times: list[float]

    def __post_init__(self):
        times = list(self.downbeat_times)
        if any(t < 0 for t in times):
            raise AnnotationError(f"{self.source_path}: negative downbeat time")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise AnnotationError(f"{self.source_path}: downbeats not strictly increasing")
        self.downbeat_times = times


@dataclass
class BarRecord:
    mel: dsp.MelSpectrogram
    origin: str
    bar_index: int
    original_bpm: float

    def __post_init__(self):
        if self.mel.values.shape != (80, FIXED_FRAMES):
            raise ValueError(f"bar mel must be 80x{FIXED_FRAMES}, got {self.mel.values.shape}")
        if not (BPM_MIN <= self.original_bpm <= BPM_MAX):
            raise ValueError(f"original_bpm {self.original_bpm} outside [{BPM_MIN}, {BPM_MAX}]")


def worker_count() -> int:
    """Worker cap from LOOPEVAL_THREADS (0 or unset = auto)."""
    raw = os.environ.get("LOOPEVAL_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, n)


def slice_bars(
    clip: AudioClip, annotation: DownbeatAnnotation
) -> tuple[list[tuple[AudioClip, float]], int]:
    """Cut one sub-clip per consecutive downbeat pair.

    A bar spans [t_i, t_{i+1}) and its tempo is 4 beats over that span.
    Bars with tempo outside [30, 480] BPM are dropped; the second return
    value counts them.
    """
    times = annotation.downbeat_times
    if len(times) < 2:
        raise AnnotationError(f"{annotation.source_path}: need at least 2 downbeats")
    duration = clip.duration
    if any(t >= duration for t in times):
        raise AnnotationError(f"{annotation.source_path}: downbeat beyond clip duration")
    return _slice_at_boundaries(clip, times)


def _slice_at_boundaries(
    clip: AudioClip, boundaries: list[float]
) -> tuple[list[tuple[AudioClip, float]], int]:
    bars = []
    dropped = 0
    for t0, t1 in zip(boundaries, boundaries[1:]):
        bpm = 4.0 * 60.0 / (t1 - t0)
        if not (BPM_MIN <= bpm <= BPM_MAX):
            dropped += 1
            continue
        i0 = int(round(t0 * clip.sample_rate))
        i1 = int(round(t1 * clip.sample_rate))
        bars.append(
            (AudioClip(clip.samples[i0:i1].copy(), clip.sample_rate, clip.source_path), bpm)
        )
    return bars, dropped


def grid_slice(clip: AudioClip, bpm: float, offset: float = 0.0) -> DownbeatAnnotation:
    """Fixed-grid downbeats at offset + k * (240 / bpm), below clip duration."""
    if not (BPM_MIN <= bpm <= BPM_MAX):
        raise ValueError(f"grid bpm {bpm} outside [{BPM_MIN}, {BPM_MAX}]")
    duration = clip.duration
    if not (0.0 <= offset < duration):
        raise ValueError(f"offset {offset} outside [0, {duration})")
    period = 240.0 / bpm
    times = []
    k = 0
    while True:
        t = offset + k * period
        if t >= duration:
            break
        times.append(t)
        k += 1
    return DownbeatAnnotation(source_path=clip.source_path or "", downbeat_times=times)


def normalize_bar(bar: AudioClip, target_samples: int = TARGET_BAR_SAMPLES) -> AudioClip:
    """Stretch a bar to the canonical length (120 BPM <-> 88200 samples)."""
    return dsp.time_stretch(bar, target_samples)


def render_fixed_mel(bar: AudioClip) -> dsp.MelSpectrogram:
    """80x320 log-mel of a tempo-normalized bar (drops the 321st frame)."""
    if len(bar.samples) != TARGET_BAR_SAMPLES:
        raise ValueError(f"expected {TARGET_BAR_SAMPLES} samples, got {len(bar.samples)}")
    mel = dsp.mel_spectrogram(bar)
    return _crop_frames(mel, FIXED_FRAMES)


def _crop_frames(mel: dsp.MelSpectrogram, n_frames: int) -> dsp.MelSpectrogram:
    if mel.n_frames < n_frames:
        raise ValueError(f"mel has {mel.n_frames} frames, cannot crop to {n_frames}")
    return dsp.MelSpectrogram(
        values=mel.values[:, :n_frames].copy(),
        sample_rate=mel.sample_rate,
        frame_spec=mel.frame_spec,
        source_id=mel.source_id,
    )


def read_annotation_csv(path) -> dict[str, list[float]]:
    """Parse `path,downbeat_seconds` rows grouped per audio path."""
    table: dict[str, list[float]] = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["path", "downbeat_seconds"]:
                raise AnnotationError(f"{path}: expected header 'path,downbeat_seconds'")
            for lineno, row in enumerate(reader, start=2):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) < 2:
                    raise AnnotationError(f"{path}:{lineno}: malformed row {row!r}")
                table.setdefault(row[0].strip(), []).append(float(row[1]))
    except OSError as exc:
        raise AnnotationError(f"{path}: unreadable annotation file ({exc})") from exc
    except ValueError as exc:
        raise AnnotationError(f"{path}: bad downbeat value ({exc})") from exc
    return table


def _grid_boundaries(clip: AudioClip, bpm: float) -> list[float]:
    """Grid downbeats plus the clip end when it closes the final bar exactly."""
    ann = grid_slice(clip, bpm, 0.0)
    times = list(ann.downbeat_times)
    period = 240.0 / bpm
    duration = clip.duration
    half_sample = 0.5 / clip.sample_rate
    if times and abs((duration - times[-1]) - period) <= half_sample:
        times.append(duration)
    return times


@dataclass
class PrepSummary:
    bars_written: int
    bars_dropped_tempo: int
    bars_dropped_ratio: int
    files_processed: int
    manifest_path: str

    @property
    def total_dropped(self) -> int:
        return self.bars_dropped_tempo + self.bars_dropped_ratio


def _tensor_name(rel: str, bar_index: int) -> str:
    stem = rel.replace("\\", "/").replace("/", "__")
    if stem.lower().endswith(".wav"):
        stem = stem[:-4]
    return f"{stem}__bar{bar_index:04d}.lten"


def _process_file(
    rel: str,
    wav_path: Path,
    boundaries_for,
    target_samples: int,
    target_rate: int,
) -> list[dict]:
    clip = read_wav(wav_path)
    clip = resample(clip, target_rate)
    boundaries = boundaries_for(rel, clip)

    entries: list[dict] = []
    for index, (t0, t1) in enumerate(zip(boundaries, boundaries[1:])):
        bpm = 4.0 * 60.0 / (t1 - t0)
        entry = {
            "tensor_file": None,
            "origin": rel,
            "bar_index": index,
            "original_bpm": bpm,
            "status": STATUS_OK,
        }
        if not (BPM_MIN <= bpm <= BPM_MAX):
            entry["status"] = STATUS_DROP_TEMPO
            entries.append(entry)
            continue
        i0 = int(round(t0 * clip.sample_rate))
        i1 = int(round(t1 * clip.sample_rate))
        bar = AudioClip(clip.samples[i0:i1].copy(), clip.sample_rate, clip.source_path)
        ratio = target_samples / len(bar.samples)
        if not (dsp.MIN_STRETCH_RATIO <= ratio <= dsp.MAX_STRETCH_RATIO):
            entry["status"] = STATUS_DROP_RATIO
            entries.append(entry)
            continue
        normalized = normalize_bar(bar, target_samples)
        mel = dsp.mel_spectrogram(normalized)
        mel = _crop_frames(mel, mel.n_frames - 1)
        entry["tensor_file"] = _tensor_name(rel, index)
        entry["_mel"] = mel.values
        entries.append(entry)
    return entries


def prepare_dataset(
    input_dir,
    out_dir,
    annotations=None,
    grid_bpm: float | None = None,
    target_bpm: float = 120.0,
    bar_beats: int = 4,
    sample_rate: int = CANONICAL_RATE,
) -> PrepSummary:
    """Decode, slice, tempo-normalize, and mel-render every WAV under a dir.

    Slicing uses the annotation CSV when given, otherwise a fixed grid at
    `grid_bpm`.  One LTEN tensor is written per surviving bar, and
    `manifest.json` lists every bar (kept or dropped) in lexicographic
    order of origin path then bar index.
    """
    input_dir = Path(input_dir)
    out_dir = Path(out_dir)
    wavs = sorted(p for p in input_dir.rglob("*") if p.is_file() and p.suffix.lower() == ".wav")
    if not wavs:
        raise FileNotFoundError(f"{input_dir}: no WAV files found")
    if annotations is None and grid_bpm is None:
        raise ValueError("need either an annotation file or a grid bpm")

    annotation_table = read_annotation_csv(annotations) if annotations is not None else None
    target_samples = int(round(bar_beats * 60.0 / target_bpm * sample_rate))

    def boundaries_for(rel: str, clip: AudioClip) -> list[float]:
        if annotation_table is not None:
            if rel not in annotation_table:
                raise AnnotationError(f"annotation file has no rows for '{rel}'")
            ann = DownbeatAnnotation(source_path=rel, downbeat_times=annotation_table[rel])
            if len(ann.downbeat_times) < 2:
                raise AnnotationError(f"{rel}: need at least 2 downbeats")
            if any(t >= clip.duration for t in ann.downbeat_times):
                raise AnnotationError(f"{rel}: downbeat beyond clip duration")
            return ann.downbeat_times
        return _grid_boundaries(clip, grid_bpm)

    rels = [p.relative_to(input_dir).as_posix() for p in wavs]
    jobs = list(zip(rels, wavs))
    results: list[list[dict]] = [None] * len(jobs)  # type: ignore[list-item]

    def run(i: int) -> None:
        rel, wav_path = jobs[i]
        results[i] = _process_file(rel, wav_path, boundaries_for, target_samples, sample_rate)

    n_workers = min(worker_count(), len(jobs))
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(run, range(len(jobs))))
    else:
        for i in range(len(jobs)):
            run(i)

    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    written = dropped_tempo = dropped_ratio = 0
    for per_file in results:
        for entry in per_file:
            mel_values = entry.pop("_mel", None)
            if mel_values is not None:
                tensorio.write_lten(out_dir / entry["tensor_file"], mel_values)
                written += 1
            elif entry["status"] == STATUS_DROP_TEMPO:
                dropped_tempo += 1
            elif entry["status"] == STATUS_DROP_RATIO:
                dropped_ratio += 1
            manifest.append(entry)

    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return PrepSummary(
        bars_written=written,
        bars_dropped_tempo=dropped_tempo,
        bars_dropped_ratio=dropped_ratio,
        files_processed=len(jobs),
        manifest_path=str(manifest_path),
    )


def load_bar_records(prepared_dir) -> list[BarRecord]:
    """Rehydrate the surviving bars of a prepared directory from its manifest."""
    prepared_dir = Path(prepared_dir)
    manifest_path = prepared_dir / "manifest.json"
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    records = []
    for entry in manifest:
        if entry["status"] != STATUS_OK or not entry["tensor_file"]:
            continue
        values = tensorio.read_lten(prepared_dir / entry["tensor_file"]).astype(np.float64)
        mel = dsp.MelSpectrogram(
            values=values,
            sample_rate=CANONICAL_RATE,
            frame_spec=dsp.StftFrameSpec(),
            source_id=entry["origin"],
        )
        records.append(
            BarRecord(
                mel=mel,
                origin=entry["origin"],
                bar_index=entry["bar_index"],
                original_bpm=entry["original_bpm"],
            )
        )
    return records


def load_prepared_mels(prepared_dir) -> tuple[np.ndarray, list[str]]:
    """Load every *.lten mel in a prepared directory, sorted by name.

    Returns (stack of shape (N, 80, T), tensor file names).
    """
    prepared_dir = Path(prepared_dir)
    files = sorted(p.name for p in prepared_dir.glob("*.lten"))
    if not files:
        raise FileNotFoundError(f"{prepared_dir}: no .lten tensors found")
    mels = []
    for name in files:
        arr = tensorio.read_lten(prepared_dir / name)
        if arr.ndim != 2:
            raise ValueError(f"{name}: expected a 2-D mel tensor, got shape {arr.shape}")
        mels.append(arr.astype(np.float64))
    shapes = {m.shape for m in mels}
    if len(shapes) != 1:
        raise ValueError(f"{prepared_dir}: inconsistent mel shapes {sorted(shapes)}")
    return np.stack(mels), files
