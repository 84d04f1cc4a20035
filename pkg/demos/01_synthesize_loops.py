"""Generate procedural drum loops at the three diversity levels.

The synthesizer is the toolkit's stand-in for a trained generator: it writes
one-bar 120 BPM WAV files whose diversity is known by construction, so every
metric downstream has an expected ordering to recover.

Run:  python demos/01_synthesize_loops.py
"""

import json
from pathlib import Path

from loopeval import generate_set

OUT = Path("demo_output/01_loops")

for level in ("collapsed", "low", "high"):
    manifest = generate_set(count=8, diversity=level, seed=42, out_dir=OUT / level)
    files = sorted(p.name for p in (OUT / level).glob("*.wav"))
    print(f"{level:>9}: {len(files)} bars -> {OUT / level}")

# identical seeds give byte-identical output; the manifest records every spec
manifest_path = OUT / "high" / "manifest.json"
doc = json.loads(manifest_path.read_text())
first = doc["loops"][0]
print("\nfirst high-diversity loop spec:")
print("  kit:", {k: round(v, 2) if isinstance(v, float) else "..." for k, v in first["kit"].items()})
print("  kick grid:", first["pattern"]["kick"])
print("\nListen to the WAVs, or continue with demos/02_mel_pipeline.py")
