"""Inception score and Frechet distance on transparent toy inputs.

Both metrics have closed-form behavior on simple inputs, which makes their
implementations auditable without any audio at all.

Run:  python demos/03_quality_metrics.py
"""

import numpy as np

from loopeval import (
    GaussianStats,
    PosteriorSet,
    fit_gaussian,
    frechet_distance,
    inception_score,
)

rng = np.random.default_rng(7)

# --- inception score ---------------------------------------------------------
# confident AND diverse posteriors score high; uniform rows score exactly 1
c = 10
confident_diverse = np.tile(np.eye(c), (20, 1)) * 0.991 + 0.001
confident_diverse /= confident_diverse.sum(axis=1, keepdims=True)
uniform = np.full((200, c), 1.0 / c)
collapsed = np.zeros((200, c))
collapsed[:, 3] = 1.0

for name, matrix in [
    ("confident + diverse", confident_diverse),
    ("uniform (unconfident)", uniform),
    ("confident but collapsed", collapsed),
]:
    ps = PosteriorSet(matrix=matrix, class_names=[f"g{i}" for i in range(c)])
    result = inception_score(ps, splits=4, seed=0)
    print(f"IS {name:>24}: {result.mean:.3f} +/- {result.std:.3f}   (bounds [1, {c}])")

# --- Frechet distance --------------------------------------------------------
# identical embedding distributions -> 0; the farther apart, the larger
real = rng.normal(size=(500, 16))
print()
for shift in (0.0, 0.5, 2.0):
    fake = rng.normal(size=(500, 16)) + shift
    value = frechet_distance(fit_gaussian(real), fit_gaussian(fake))
    print(f"FAD with mean shift {shift:>3}: {value:8.3f}")

# the 1-D closed form: |mu_r - mu_g|^2 + (sigma_r - sigma_g)^2
a = GaussianStats(np.array([0.0]), np.array([[1.0]]), 10)
b = GaussianStats(np.array([1.0]), np.array([[4.0]]), 10)
print(f"\n1-D closed form check: {frechet_distance(a, b)} (expected 2.0)")
