"""Walk one loop through the preparation pipeline, step by step.

decode -> slice at downbeats -> stretch to 2-second bars -> 80x320 log-mel

Run:  python demos/02_mel_pipeline.py   (after demo 01)
"""

from pathlib import Path

import numpy as np

from loopeval import (
    DownbeatAnnotation,
    grid_slice,
    normalize_bar,
    read_wav,
    render_fixed_mel,
    slice_bars,
    time_stretch,
)

wav = sorted(Path("demo_output/01_loops/high").glob("*.wav"))[0]
clip = read_wav(wav)
print(f"decoded {wav.name}: {len(clip.samples)} samples at {clip.sample_rate} Hz "
      f"({clip.duration:.3f} s)")

# these loops are already one bar at 120 BPM; pretend we only know the grid
annotation = grid_slice(clip, bpm=120.0, offset=0.0)
print("grid downbeats:", annotation.downbeat_times)

# a bar between downbeats [t0, t1) implies a tempo of 4 beats over that span
bars, dropped = slice_bars(
    read_wav(wav), DownbeatAnnotation(str(wav), [0.0, 1.0]),
)
print(f"slicing with a fake 1-second bar: tempo {bars[0][1]:.0f} BPM "
      f"(stretch ratio {88200 / len(bars[0][0].samples):.2f})")

bar, bpm = bars[0]
normalized = normalize_bar(bar)
print(f"normalized: {len(bar.samples)} -> {len(normalized.samples)} samples")

mel = render_fixed_mel(normalized)
print(f"mel tensor: {mel.values.shape}, value range "
      f"[{mel.values.min():.2f}, {mel.values.max():.2f}] (floor = ln 1e-5 = -11.51)")

# crude terminal picture: frame energy over time
energy = (mel.values - mel.values.min()).sum(axis=0)
scaled = (energy / energy.max() * 60).astype(int)
print("\nframe energy (one row per 20 frames):")
for start in range(0, 320, 20):
    bar_len = int(scaled[start : start + 20].mean())
    print(f"  f{start:3d} " + "#" * bar_len)

# pitch preservation: stretching a tone does not transpose it
tone = read_wav(wav)
stretched = time_stretch(tone, int(len(tone.samples) * 1.5))
print(f"\nstretched {len(tone.samples)} -> {len(stretched.samples)} samples "
      "(pitch preserved by the phase vocoder)")
print(f"spectral mass unchanged within a few percent: "
      f"{np.abs(stretched.samples).mean() / np.abs(tone.samples).mean():.2f}x amplitude ratio")
