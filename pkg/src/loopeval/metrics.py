"""Quality metrics over feature sets: inception score and Frechet distance.

Both operate purely on arrays: posteriors p(y|x) for the inception score,
embedding matrices (through Gaussian moment fitting) for the Frechet
distance.  Natural logarithms throughout the inception score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import PosteriorSet
from .rng import Xoshiro256StarStar

MARGINAL_FLOOR = 1e-12
_EIG_CLIP_REL = 1e-8
_EIG_ERROR_REL = 1e-6


@dataclass
class GaussianStats:
    """Mean vector and (unbiased, symmetrized) covariance of a sample."""

    mean: np.ndarray
    covariance: np.ndarray
    sample_count: int

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.covariance = np.asarray(self.covariance, dtype=np.float64)
        if self.sample_count < 2:
            raise ValueError("GaussianStats needs at least 2 samples")
        d = len(self.mean)
        if self.covariance.shape != (d, d):
            raise ValueError("covariance shape does not match mean dimension")
        if not np.allclose(self.covariance, self.covariance.T, atol=1e-9):
            raise ValueError("covariance must be symmetric within 1e-9")
        self.covariance = (self.covariance + self.covariance.T) / 2.0


@dataclass
class IsResult:
    mean: float
    std: float
    split_count: int
    split_scores: list[float]


def fit_gaussian(embeddings: np.ndarray) -> GaussianStats:
    """Column means and unbiased (N-1) covariance, symmetrized."""
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("embeddings must be N x D")
    if x.shape[0] < 2:
        raise ValueError(f"need at least 2 embeddings, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite embedding values")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (x.shape[0] - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean=mean, covariance=cov, sample_count=x.shape[0])


def _psd_sqrt(sigma: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(sigma)
    scale = float(np.max(np.abs(vals))) if len(vals) else 0.0
    if scale > 0 and vals.min() < -_EIG_ERROR_REL * scale:
        raise ValueError(
            f"matrix is not PSD beyond numerical noise (min eigenvalue {vals.min():.3e}, "
            f"scale {scale:.3e})"
        )
    vals = np.maximum(vals, 0.0)
    return (vecs * np.sqrt(vals)) @ vecs.T


def trace_sqrt_product(sigma_r: np.ndarray, sigma_g: np.ndarray) -> float:
    """tr(sqrt(sqrt(Sr) Sg sqrt(Sr))), the cross term of the Frechet distance.

    The two matrix square roots go through symmetric eigendecompositions with
    negative-eigenvalue clipping (values below -1e-6 * scale are rejected as
    genuinely non-PSD input).  The outer trace-of-sqrt is evaluated as the
    nuclear norm of sqrt(Sr) @ sqrt(Sg): identical mathematically, but it
    avoids squaring the eigenvalue noise, which matters for rank-deficient
    covariances (fewer samples than dimensions).
    """
    sr = np.asarray(sigma_r, dtype=np.float64)
    sg = np.asarray(sigma_g, dtype=np.float64)
    if sr.shape != sg.shape or sr.ndim != 2 or sr.shape[0] != sr.shape[1]:
        raise ValueError(f"covariances must be square and same shape: {sr.shape} vs {sg.shape}")
    cross = _psd_sqrt(sr) @ _psd_sqrt(sg)
    return float(np.sum(np.linalg.svd(cross, compute_uv=False)))


def frechet_distance(real: GaussianStats, generated: GaussianStats) -> float:
    """||mu_r - mu_g||^2 + tr(Sr + Sg - 2 sqrt(Sr Sg)); 0 for identical stats."""
    if real.mean.shape != generated.mean.shape:
        raise ValueError(
            f"dimension mismatch: {real.mean.shape} vs {generated.mean.shape}"
        )
    mean_term = float(np.sum((real.mean - generated.mean) ** 2))
    cross = trace_sqrt_product(real.covariance, generated.covariance)
    value = mean_term + float(np.trace(real.covariance) + np.trace(generated.covariance)) - 2.0 * cross
    if abs(value) <= 1e-8:  # numerical noise band around zero
        value = 0.0
    return value


def inception_score(posteriors: PosteriorSet, splits: int = 10, seed: int = 0) -> IsResult:
    """exp(mean KL between per-row posteriors and the split marginal).

    Rows are shuffled with the seed and divided into `splits` contiguous
    near-equal parts; the result is the mean and population std of the
    per-split scores.
    """
    p = posteriors.matrix
    n, n_classes = p.shape
    if splits < 1:
        raise ValueError("splits must be >= 1")
    if n < splits:
        raise ValueError(f"{n} rows cannot fill {splits} splits")

    order = np.arange(n)
    rng = Xoshiro256StarStar(seed)
    rng.shuffle(order)
    shuffled = p[order]

    # first (n % splits) parts take one extra row
    base = n // splits
    extra = n % splits
    sizes = [base + 1 if i < extra else base for i in range(splits)]

    scores = []
    start = 0
    for size in sizes:
        part = shuffled[start : start + size]
        start += size
        marginal = np.maximum(part.mean(axis=0), MARGINAL_FLOOR)
        terms = np.where(part > 0.0, part * (np.log(np.maximum(part, 1e-300)) - np.log(marginal)), 0.0)
        score = float(np.exp(terms.sum(axis=1).mean()))
        assert 1.0 - 1e-9 <= score <= n_classes + 1e-9, f"split score {score} outside [1, C]"
        scores.append(score)

    arr = np.asarray(scores)
    return IsResult(
        mean=float(arr.mean()),
        std=float(arr.std()),  # population std across splits
        split_count=splits,
        split_scores=scores,
    )
