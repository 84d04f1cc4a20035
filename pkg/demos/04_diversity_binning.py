"""Diversity measurement: k-means bins, the per-bin z-test, and JSD.

Key property: when two samples really come from the same distribution, the
fraction of "statistically different" bins should match the significance
level of the test (NDB/K ~ alpha).  Mode collapse sends it toward 1.

Run:  python demos/04_diversity_binning.py
"""

import numpy as np

from loopeval import assign_bins, jsd, kmeans_fit, ndb

rng = np.random.default_rng(11)
centers = rng.normal(scale=4.0, size=(6, 5))


def draw(n, only_mode=None):
    which = rng.integers(0, len(centers), size=n) if only_mode is None else np.full(n, only_mode)
    return centers[which] + rng.normal(size=(n, 5))


reference = draw(5000)
model = kmeans_fit(reference, k=50, seed=0)
print(f"clustered {model.reference_total} reference points into {model.k} bins")
print(f"bin occupancy: min {model.reference_counts.min()}, "
      f"median {int(np.median(model.reference_counts))}, max {model.reference_counts.max()}")

for name, sample in [
    ("same distribution", draw(5000)),
    ("one mode only (collapse)", draw(5000, only_mode=2)),
]:
    counts = assign_bins(model, sample)
    result = ndb(model, counts, alpha=0.05)
    print(f"\n{name}:")
    print(f"  NDB/K = {result.ndb}/{model.k} = {result.ndb_over_k:.3f}   "
          f"(alpha = 0.05, z critical = {result.params['z_critical']:.3f})")
    print(f"  JSD   = {result.jsd:.4f}")

# JSD alone on hand-sized histograms
print("\nJSD endpoints:", jsd(np.array([1, 1]), np.array([1, 1])),
      "(identical) ...", jsd(np.array([1, 0]), np.array([0, 1])), "(disjoint)")
