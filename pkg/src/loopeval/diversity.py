"""Diversity metrics: k-means bin occupancy, per-bin z-tests, and JSD.

The reference set is clustered once (k-means++ seeding, Lloyd refinement,
deterministic given the seed); generated samples are then assigned to the
frozen bins.  A bin counts as "statistically different" when the pooled
two-proportion z statistic exceeds the two-sided critical value at the
chosen significance level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import Xoshiro256StarStar

MAX_LLOYD_ITERATIONS = 300


def normal_ppf(q: float) -> float:
    """Inverse standard-normal CDF (Acklam's rational fit + one Newton step).

    normal_ppf(0.975) = 1.959964 to the printed precision.
    """
    if not (0.0 < q < 1.0):
        raise ValueError("q must lie in (0, 1)")
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
    p_low = 0.02425
    if q < p_low:
        u = math.sqrt(-2.0 * math.log(q))
        x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) / \
            ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0)
    elif q <= 1.0 - p_low:
        u = q - 0.5
        r = u * u
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    else:
        u = math.sqrt(-2.0 * math.log(1.0 - q))
        x = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) / \
            ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0)
    # one Newton refinement against the erfc-based CDF
    cdf = 0.5 * math.erfc(-x / math.sqrt(2.0))
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if pdf > 0.0:
        x -= (cdf - q) / pdf
    return x


@dataclass
class ClusterModel:
    """K centroids (in standardized space) plus reference bin occupancy."""

    centroids: np.ndarray
    reference_counts: np.ndarray
    standardizer_mean: np.ndarray
    standardizer_std: np.ndarray
    seed: int
    k: int

    def __post_init__(self):
        if self.centroids.shape[0] != self.k:
            raise ValueError("centroid count does not match k")
        if int(self.reference_counts.sum()) < self.k:
            raise ValueError("reference counts must cover every bin")

    @property
    def reference_total(self) -> int:
        return int(self.reference_counts.sum())


@dataclass
class DiversityResult:
    ndb: int
    ndb_over_k: float
    jsd: float
    per_bin: list[tuple[int, int, float, bool]]
    params: dict = field(default_factory=dict)


def _standardize_fit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)  # zero-variance dims pass through
    return mean, std


def _nearest_with_dist(
    x: np.ndarray, centroids: np.ndarray, x_norms: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per row (ties to the lowest index) plus its distance^2."""
    if x_norms is None:
        x_norms = np.sum(x * x, axis=1)
    d = (
        x_norms[:, None]
        - 2.0 * (x @ centroids.T)
        + np.sum(centroids * centroids, axis=1)[None, :]
    )
    labels = np.argmin(d, axis=1)
    return labels, np.maximum(d[np.arange(len(labels)), labels], 0.0)


def _nearest(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return _nearest_with_dist(x, centroids)[0]


def _kmeanspp_init(
    x: np.ndarray, k: int, rng: Xoshiro256StarStar, x_norms: np.ndarray
) -> np.ndarray:
    n = x.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.randbelow(n)

    def dist_to(idx: int) -> np.ndarray:
        # ||x - x[idx]||^2 via the expansion; clipped against rounding noise
        return np.maximum(x_norms - 2.0 * (x @ x[idx]) + x_norms[idx], 0.0)

    d2 = dist_to(int(chosen[0]))
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            raise ValueError(
                f"cannot seed {k} clusters: only {j} distinct points in the input"
            )
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
        idx = min(idx, n - 1)
        chosen[j] = idx
        d2 = np.minimum(d2, dist_to(idx))
    return x[chosen].copy()


def kmeans_fit(vectors: np.ndarray, k: int, seed: int = 0) -> ClusterModel:
    """Deterministic k-means over standardized rows.

    Steps: per-dimension standardization with the input's own statistics,
    k-means++ seeding driven by xoshiro256**(seed), then Lloyd iterations
    until assignments stop changing (or 300 iterations).  Empty clusters are
    repaired by seizing the point currently farthest from its centroid.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("vectors must be N x D")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input values")
    n = x.shape[0]
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError(f"need at least k={k} vectors, got {n}")

    mean, std = _standardize_fit(x)
    xs = (x - mean) / std
    xs_norms = np.sum(xs * xs, axis=1)

    rng = Xoshiro256StarStar(seed)
    centroids = _kmeanspp_init(xs, k, rng, xs_norms)

    labels, dist_own = _nearest_with_dist(xs, centroids, xs_norms)
    prev_inertia = math.inf
    for _ in range(MAX_LLOYD_ITERATIONS):
        # centroid update in deterministic index order (stable sort + reduceat)
        order = np.argsort(labels, kind="stable")
        sorted_labels = labels[order]
        boundaries = np.searchsorted(sorted_labels, np.arange(k), side="left")
        counts = np.bincount(labels, minlength=k)
        sums = np.add.reduceat(xs[order], boundaries, axis=0)
        sums[counts == 0] = 0.0
        new_centroids = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], centroids)

        empty = np.where(counts == 0)[0]
        if len(empty):
            seizable = dist_own.copy()
            for bin_index in empty:
                pick = int(np.argmax(seizable))
                new_centroids[bin_index] = xs[pick]
                seizable[pick] = -1.0  # a point may be seized only once

        new_labels, dist_own = _nearest_with_dist(xs, new_centroids, xs_norms)
        inertia = float(dist_own.sum())
        assert inertia <= prev_inertia * (1.0 + 1e-9) + 1e-9, "Lloyd inertia increased"
        prev_inertia = inertia
        centroids = new_centroids
        if np.array_equal(new_labels, labels) and not len(empty):
            labels = new_labels
            break
        labels = new_labels

    counts = np.bincount(labels, minlength=k)
    if np.any(counts == 0):
        raise ValueError("k-means ended with an empty cluster; input has too few distinct points")
    c_norms = np.sum(centroids * centroids, axis=1)
    d_cc = c_norms[:, None] - 2.0 * (centroids @ centroids.T) + c_norms[None, :]
    np.fill_diagonal(d_cc, np.inf)
    # the expansion rounds near zero; verify suspicious pairs exactly
    for i, j in np.argwhere(d_cc < 1e-9):
        if i < j and np.array_equal(centroids[i], centroids[j]):
            raise ValueError("centroids are not pairwise distinct; input degenerate for this k")

    return ClusterModel(
        centroids=centroids,
        reference_counts=counts.astype(np.int64),
        standardizer_mean=mean,
        standardizer_std=std,
        seed=seed,
        k=k,
    )


def assign_bins(model: ClusterModel, vectors: np.ndarray) -> np.ndarray:
    """Histogram of nearest-centroid assignments for new vectors."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.centroids.shape[1]:
        raise ValueError(
            f"vectors must be M x {model.centroids.shape[1]}, got {x.shape}"
        )
    if x.shape[0] < 1:
        raise ValueError("need at least one vector")
    xs = (x - model.standardizer_mean) / model.standardizer_std
    labels = _nearest(xs, model.centroids)
    return np.bincount(labels, minlength=model.k).astype(np.int64)


def ndb(model: ClusterModel, generated_counts: np.ndarray, alpha: float = 0.05) -> DiversityResult:
    """Count bins whose occupancy proportions differ significantly.

    Pooled two-proportion z-test per bin, two-sided at level alpha; bins with
    zero pooled standard error are never different.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    n_hat = np.asarray(generated_counts, dtype=np.int64)
    if n_hat.shape != (model.k,):
        raise ValueError(f"generated counts must have shape ({model.k},)")
    n_gen = int(n_hat.sum())
    if n_gen < 1:
        raise ValueError("generated counts sum to zero")

    n_ref_counts = model.reference_counts
    n_ref = model.reference_total
    crit = normal_ppf(1.0 - alpha / 2.0)

    p_r = n_ref_counts / n_ref
    p_g = n_hat / n_gen
    pooled = (n_ref_counts + n_hat) / (n_ref + n_gen)
    se = np.sqrt(pooled * (1.0 - pooled) * (1.0 / n_ref + 1.0 / n_gen))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0.0, (p_r - p_g) / se, 0.0)
    different = (se > 0.0) & (np.abs(z) > crit)

    count = int(different.sum())
    per_bin = [
        (int(n_ref_counts[i]), int(n_hat[i]), float(z[i]), bool(different[i]))
        for i in range(model.k)
    ]
    return DiversityResult(
        ndb=count,
        ndb_over_k=count / model.k,
        jsd=jsd(n_ref_counts, n_hat),
        per_bin=per_bin,
        params={"alpha": alpha, "z_critical": crit, "n_ref": n_ref, "n_gen": n_gen},
    )


def jsd(p_counts: np.ndarray, q_counts: np.ndarray) -> float:
    """Jensen-Shannon divergence (base-2) between two count histograms."""
    p = np.asarray(p_counts, dtype=np.float64)
    q = np.asarray(q_counts, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"count shapes differ: {p.shape} vs {q.shape}")
    if p.sum() <= 0 or q.sum() <= 0:
        raise ValueError("count totals must be >= 1")
    p = p / p.sum()
    q = q / q.sum()
    m = (p + q) / 2.0

    def _kl(a, b):
        mask = a > 0.0
        return float(np.sum(a[mask] * np.log2(a[mask] / b[mask])))

    value = 0.5 * _kl(p, m) + 0.5 * _kl(q, m)
    return min(max(value, 0.0), 1.0)


def evaluate_diversity_vectors(
    reference: np.ndarray,
    generated: np.ndarray,
    k: int = 100,
    alpha: float = 0.05,
    seed: int = 0,
) -> DiversityResult:
    """Cluster the reference rows, assign the generated rows, run NDB + JSD."""
    ref_vec = np.asarray(reference, dtype=np.float64)
    gen_vec = np.asarray(generated, dtype=np.float64)
    model = kmeans_fit(ref_vec, k=k, seed=seed)
    generated_counts = assign_bins(model, gen_vec)
    result = ndb(model, generated_counts, alpha=alpha)
    result.params.update(
        {
            "k": k,
            "seed": seed,
            "vector_dim": int(ref_vec.shape[1]),
            "n_reference": int(ref_vec.shape[0]),
            "n_generated": int(gen_vec.shape[0]),
        }
    )
    return result


def evaluate_diversity(
    reference_mels: np.ndarray,
    generated_mels: np.ndarray,
    k: int = 100,
    alpha: float = 0.05,
    seed: int = 0,
) -> DiversityResult:
    """Full pipeline: flatten mels row-major, then cluster/assign/score."""
    ref = np.asarray(reference_mels, dtype=np.float64)
    gen = np.asarray(generated_mels, dtype=np.float64)
    if ref.ndim != 3 or gen.ndim != 3:
        raise ValueError("mel stacks must be (N, bands, frames)")
    if ref.shape[1:] != gen.shape[1:]:
        raise ValueError(f"mel shapes differ: {ref.shape[1:]} vs {gen.shape[1:]}")
    return evaluate_diversity_vectors(
        ref.reshape(ref.shape[0], -1), gen.reshape(gen.shape[0], -1), k=k, alpha=alpha, seed=seed
    )
