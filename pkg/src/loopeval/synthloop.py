"""Procedural 120 BPM drum-loop synthesis with a controllable diversity knob.

Not meant to sound good: meant to exercise the evaluation pipeline with sets
whose diversity ordering is known by construction.  All randomness comes from
xoshiro256** streams derived from the run seed, so identical calls produce
byte-identical WAV trees.

Diversity levels:

* ``collapsed`` repeats one (kit, pattern) combination; every file is
  bit-identical.  The combination is a sparse "breakdown" bar (hats only),
  a deliberate outlier relative to the regular pattern family.
* ``low`` draws each loop from a fixed 4-kit x 4-pattern palette.
* ``high`` draws a fresh kit and pattern per loop; a small fraction
  (1/400) of loops are breakdown bars so the reference family includes the
  collapsed combination's neighborhood.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, write_wav
from .rng import Xoshiro256StarStar, noise, split_seed

SAMPLE_RATE = 44100
BAR_SAMPLES = 88200
N_STEPS = 16
DIVERSITY_LEVELS = ("collapsed", "low", "high")

# step i starts at floor(i * 88200 / 16): widths alternate 5512/5513
_STEP_STARTS = [(i * BAR_SAMPLES) // N_STEPS for i in range(N_STEPS)]


@dataclass(frozen=True)
class KitSpec:
    kick_pitch_start: float
    kick_pitch_end: float
    kick_decay: float
    snare_tone: float
    snare_noise_mix: float
    snare_decay: float
    hat_cutoff: float
    hat_decay: float
    noise_seed: int

    def __post_init__(self):
        for name, value in (
            ("kick_decay", self.kick_decay),
            ("snare_decay", self.snare_decay),
            ("hat_decay", self.hat_decay),
        ):
            if not (0.0 < value <= 0.5):
                raise ValueError(f"{name} must lie in (0, 0.5], got {value}")
        for name, value in (
            ("kick_pitch_start", self.kick_pitch_start),
            ("kick_pitch_end", self.kick_pitch_end),
            ("snare_tone", self.snare_tone),
            ("hat_cutoff", self.hat_cutoff),
        ):
            if not (20.0 < value < 18000.0):
                raise ValueError(f"{name} must lie in (20, 18000) Hz, got {value}")
        if not (0.0 <= self.snare_noise_mix <= 1.0):
            raise ValueError("snare_noise_mix must lie in [0, 1]")


@dataclass(frozen=True)
class PatternSpec:
    """16-step velocity grids per voice; 0 means no onset."""

    kick: tuple[float, ...]
    snare: tuple[float, ...]
    hat: tuple[float, ...]

    def __post_init__(self):
        for name, grid in (("kick", self.kick), ("snare", self.snare), ("hat", self.hat)):
            if len(grid) != N_STEPS:
                raise ValueError(f"{name} grid must have {N_STEPS} steps")
            if any(not (0.0 <= v <= 1.0) for v in grid):
                raise ValueError(f"{name} velocities must lie in [0, 1]")
        if not any(v > 0 for grid in (self.kick, self.snare, self.hat) for v in grid):
            raise ValueError("pattern must contain at least one onset")


def _env(n: int, decay: float) -> np.ndarray:
    t = np.arange(n) / SAMPLE_RATE
    return np.exp(-5.0 * t / decay)


def _burst_len(decay: float) -> int:
    return min(BAR_SAMPLES, int(round(decay * SAMPLE_RATE * 1.6)))


def _kick_hit(kit: KitSpec) -> np.ndarray:
    n = _burst_len(kit.kick_decay)
    t = np.arange(n) / SAMPLE_RATE
    glide = np.exp(-t / (kit.kick_decay * 0.25))
    freq = kit.kick_pitch_end + (kit.kick_pitch_start - kit.kick_pitch_end) * glide
    phase = 2.0 * np.pi * np.cumsum(freq) / SAMPLE_RATE
    return np.sin(phase) * _env(n, kit.kick_decay)


def _snare_hit(kit: KitSpec) -> np.ndarray:
    n = _burst_len(kit.snare_decay)
    t = np.arange(n) / SAMPLE_RATE
    tone = np.sin(2.0 * np.pi * kit.snare_tone * t)
    rough = noise(split_seed(kit.noise_seed, 1), n)
    mixed = (1.0 - kit.snare_noise_mix) * tone + kit.snare_noise_mix * rough
    return mixed * _env(n, kit.snare_decay)


def _one_pole_highpass(x: np.ndarray, cutoff: float) -> np.ndarray:
    rc = 1.0 / (2.0 * np.pi * cutoff)
    dt = 1.0 / SAMPLE_RATE
    alpha = rc / (rc + dt)
    y = np.empty_like(x)
    prev_y = 0.0
    prev_x = 0.0
    for i in range(len(x)):  # short burst; IIR recursion stays a plain loop
        prev_y = alpha * (prev_y + x[i] - prev_x)
        prev_x = x[i]
        y[i] = prev_y
    return y


def _hat_hit(kit: KitSpec) -> np.ndarray:
    n = _burst_len(kit.hat_decay)
    rough = noise(split_seed(kit.noise_seed, 2), n)
    return _one_pole_highpass(rough, kit.hat_cutoff) * _env(n, kit.hat_decay)


def synth_bar(kit: KitSpec, pattern: PatternSpec) -> AudioClip:
    """Render one 2-second, 16-step bar; peak-normalized to 0.9."""
    voices = (
        (_kick_hit(kit), pattern.kick),
        (_snare_hit(kit), pattern.snare),
        (_hat_hit(kit), pattern.hat),
    )
    out = np.zeros(BAR_SAMPLES)
    for hit, grid in voices:
        for step, velocity in enumerate(grid):
            if velocity <= 0.0:
                continue
            start = _STEP_STARTS[step]
            span = min(len(hit), BAR_SAMPLES - start)
            out[start : start + span] += velocity * hit[:span]
    peak = np.max(np.abs(out))
    if peak > 0.0:
        out *= 0.9 / peak
    return AudioClip(out, SAMPLE_RATE)


# -- random kit/pattern families ------------------------------------------------


def _random_kit(rng: Xoshiro256StarStar) -> KitSpec:
    return KitSpec(
        kick_pitch_start=rng.uniform(80.0, 200.0),
        kick_pitch_end=rng.uniform(35.0, 60.0),
        kick_decay=rng.uniform(0.08, 0.3),
        snare_tone=rng.uniform(150.0, 400.0),
        snare_noise_mix=rng.uniform(0.3, 0.9),
        snare_decay=rng.uniform(0.05, 0.2),
        hat_cutoff=rng.uniform(4000.0, 12000.0),
        hat_decay=rng.uniform(0.02, 0.1),
        noise_seed=rng.next_u64(),
    )


def _random_pattern(rng: Xoshiro256StarStar) -> PatternSpec:
    kick = [0.0] * N_STEPS
    snare = [0.0] * N_STEPS
    hat = [0.0] * N_STEPS
    kick[0] = 1.0
    kick[8] = rng.uniform(0.7, 1.0)
    for _ in range(rng.randbelow(4)):
        kick[rng.randbelow(N_STEPS)] = rng.uniform(0.4, 1.0)
    snare[4] = rng.uniform(0.7, 1.0)
    snare[12] = rng.uniform(0.7, 1.0)
    if rng.random() < 0.35:
        snare[rng.randbelow(N_STEPS)] = rng.uniform(0.3, 0.8)
    hat_stride = rng.choice([1, 2, 4])
    for step in range(0, N_STEPS, hat_stride):
        hat[step] = rng.uniform(0.3, 0.8)
    return PatternSpec(kick=tuple(kick), snare=tuple(snare), hat=tuple(hat))


def _breakdown_kit(rng: Xoshiro256StarStar) -> KitSpec:
    """Sparse outlier family: quiet hats only, very short decays."""
    return KitSpec(
        kick_pitch_start=rng.uniform(80.0, 200.0),
        kick_pitch_end=rng.uniform(35.0, 60.0),
        kick_decay=rng.uniform(0.08, 0.3),
        snare_tone=rng.uniform(150.0, 400.0),
        snare_noise_mix=rng.uniform(0.3, 0.9),
        snare_decay=rng.uniform(0.05, 0.2),
        hat_cutoff=rng.uniform(13000.0, 16000.0),
        hat_decay=rng.uniform(0.01, 0.02),
        noise_seed=rng.next_u64(),
    )


def _breakdown_pattern(rng: Xoshiro256StarStar) -> PatternSpec:
    hat = [0.0] * N_STEPS
    hat[0] = rng.uniform(0.1, 0.2)
    hat[10] = rng.uniform(0.05, 0.15)
    return PatternSpec(
        kick=tuple([0.0] * N_STEPS),
        snare=tuple([0.0] * N_STEPS),
        hat=tuple(hat),
    )


BREAKDOWN_RATE = 1.0 / 400.0


def _loop_spec(diversity: str, seed: int, index: int, palette) -> tuple[KitSpec, PatternSpec]:
    stream = Xoshiro256StarStar(split_seed(seed, index))
    if diversity == "collapsed":
        rng = Xoshiro256StarStar(split_seed(seed, -1))
        return _breakdown_kit(rng), _breakdown_pattern(rng)
    if diversity == "low":
        kits, patterns = palette
        return stream.choice(kits), stream.choice(patterns)
    if stream.random() < BREAKDOWN_RATE:
        return _breakdown_kit(stream), _breakdown_pattern(stream)
    return _random_kit(stream), _random_pattern(stream)


def generate_set(count: int, diversity: str, seed: int, out_dir) -> dict:
    """Write `count` loops plus a manifest recording every spec used."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if diversity not in DIVERSITY_LEVELS:
        raise ValueError(f"diversity must be one of {DIVERSITY_LEVELS}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    palette = None
    if diversity == "low":
        rng = Xoshiro256StarStar(split_seed(seed, -2))
        palette = (
            [_random_kit(rng) for _ in range(4)],
            [_random_pattern(rng) for _ in range(4)],
        )

    loops = []
    for index in range(count):
        kit, pattern = _loop_spec(diversity, seed, index, palette)
        clip = synth_bar(kit, pattern)
        name = f"loop_{index:05d}.wav"
        write_wav(clip, out_dir / name)
        loops.append(
            {
                "file": name,
                "kit": {**asdict(kit), "noise_seed": str(kit.noise_seed)},
                "pattern": asdict(pattern),
            }
        )

    manifest = {
        "generator": "synthloop",
        "count": count,
        "diversity": diversity,
        "seed": seed,
        "sample_rate": SAMPLE_RATE,
        "bar_samples": BAR_SAMPLES,
        "loops": loops,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
