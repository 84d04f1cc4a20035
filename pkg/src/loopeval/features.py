"""Embeddings and class posteriors: the inputs the quality metrics consume.

Two built-in providers cover the desk-scale case: per-band mel statistics as
the embedding space, and an L2-regularized softmax classifier over those
statistics for class posteriors.  Externally computed features (LTEN or CSV)
can be ingested instead, so results from heavyweight audio models remain
comparable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensorio
from .dsp import MelSpectrogram

MELSTAT_DIM = 160
MELSTAT_PROVIDER = "melstat-v1"
ROW_SUM_TOLERANCE = 1e-3


class FeatureFormatError(Exception):
    """Raised for malformed embedding/posterior files."""


@dataclass
class Embedding:
    vector: np.ndarray
    provider_id: str
    clip_id: str

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if self.vector.ndim != 1:
            raise ValueError("embedding vector must be one-dimensional")
        if not np.all(np.isfinite(self.vector)):
            raise ValueError(f"{self.clip_id}: non-finite embedding values")


@dataclass
class PosteriorSet:
    """N x C class-probability rows; every row sums to 1."""

    matrix: np.ndarray
    class_names: list[str]
    provider_id: str = field(default="")

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ValueError("posterior matrix must be 2-D")
        n, c = self.matrix.shape
        if c < 2:
            raise ValueError("posteriors need at least 2 classes")
        if len(self.class_names) != c:
            raise ValueError(f"{len(self.class_names)} class names for {c} columns")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("non-finite posterior values")
        if np.any(self.matrix < 0.0) or np.any(self.matrix > 1.0):
            raise ValueError("posterior entries must lie in [0, 1]")
        sums = self.matrix.sum(axis=1)
        bad = np.where(np.abs(sums - 1.0) > 1e-6)[0]
        if len(bad):
            raise ValueError(f"posterior row {bad[0]} sums to {sums[bad[0]]!r}, not 1")

    @property
    def n_clips(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_classes(self) -> int:
        return self.matrix.shape[1]


def melstat_embed(mel: MelSpectrogram, clip_id: str = "") -> Embedding:
    """160-dim embedding: per-band mean then per-band std over frames."""
    values = mel.values
    if values.shape[0] != 80:
        raise ValueError(f"expected 80 mel bands, got {values.shape[0]}")
    if values.shape[1] != 320:
        raise ValueError(f"expected 320 frames, got {values.shape[1]}")
    means = values.mean(axis=1)
    stds = values.std(axis=1)  # population (N-denominator) std
    return Embedding(
        vector=np.concatenate([means, stds]),
        provider_id=MELSTAT_PROVIDER,
        clip_id=clip_id or mel.source_id,
    )


def embed_mel_stack(mels: np.ndarray) -> np.ndarray:
    """Vectorized melstat embedding of a (N, 80, 320) stack -> (N, 160)."""
    if mels.ndim != 3 or mels.shape[1] != 80 or mels.shape[2] != 320:
        raise ValueError(f"expected (N, 80, 320) stack, got {mels.shape}")
    means = mels.mean(axis=2)
    stds = mels.std(axis=2)
    return np.concatenate([means, stds], axis=1)


@dataclass
class SoftmaxClassifier:
    """Multinomial logistic regression with internal feature standardization."""

    weights: np.ndarray  # C x (D+1), bias in the last column
    class_names: list[str]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    standardize_internally: bool = True

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1] - 1

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    def save(self, path) -> None:
        doc = {
            "kind": "loopeval-softmax-classifier",
            "version": 1,
            "class_names": self.class_names,
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "weights": self.weights.tolist(),
            "standardize_internally": self.standardize_internally,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "SoftmaxClassifier":
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("kind") != "loopeval-softmax-classifier":
            raise FeatureFormatError(f"{path}: not a classifier model file")
        if not doc.get("standardize_internally", False):
            raise FeatureFormatError(
                f"{path}: model expects pre-standardized input, which predict_posteriors forbids"
            )
        return cls(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            class_names=list(doc["class_names"]),
            feature_mean=np.asarray(doc["feature_mean"], dtype=np.float64),
            feature_std=np.asarray(doc["feature_std"], dtype=np.float64),
            standardize_internally=True,
        )


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _ce_loss(w: np.ndarray, xa: np.ndarray, onehot: np.ndarray, l2: float) -> float:
    p = _softmax(xa @ w.T)
    ce = -np.mean(np.sum(onehot * np.log(np.maximum(p, 1e-300)), axis=1))
    return float(ce + 0.5 * l2 * np.sum(w[:, :-1] ** 2))


def _ce_grad(w: np.ndarray, xa: np.ndarray, onehot: np.ndarray, l2: float) -> np.ndarray:
    p = _softmax(xa @ w.T)
    g = (p - onehot).T @ xa / xa.shape[0]
    g[:, :-1] += l2 * w[:, :-1]  # bias column is not penalized
    return g


def train_classifier(
    features: np.ndarray,
    labels: np.ndarray,
    l2: float = 1e-3,
    step: float = 1.0,
    epochs: int = 500,
    seed: int = 0,
    class_names: list[str] | None = None,
) -> SoftmaxClassifier:
    """Full-batch gradient descent on mean cross-entropy + (l2/2)*||W||^2.

    Weights start at zero (the objective is convex, so no RNG is needed; the
    seed is recorded for provenance only).  The step is halved whenever an
    update would increase the loss, up to 10 halvings, so the recorded loss
    trajectory is non-increasing.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2:
        raise ValueError("features must be N x D")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature values")
    if len(y) != len(x):
        raise ValueError("labels/features length mismatch")
    classes = np.unique(y)
    n_classes = int(classes.max()) + 1 if len(classes) else 0
    if len(classes) < 2 or not np.array_equal(classes, np.arange(n_classes)):
        raise ValueError("labels must cover classes 0..C-1 with every class present")
    if len(x) < n_classes:
        raise ValueError("need at least one sample per class and N >= C")
    if l2 < 0:
        raise ValueError("l2 must be >= 0")

    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    xs = (x - mean) / std
    xa = np.concatenate([xs, np.ones((len(xs), 1))], axis=1)
    onehot = np.zeros((len(y), n_classes))
    onehot[np.arange(len(y)), y] = 1.0

    w = np.zeros((n_classes, xa.shape[1]))
    loss = _ce_loss(w, xa, onehot, l2)
    halvings = 0
    for _ in range(epochs):
        g = _ce_grad(w, xa, onehot, l2)
        w_next = w - step * g
        next_loss = _ce_loss(w_next, xa, onehot, l2)
        if next_loss > loss:
            if halvings >= 10:
                break
            step *= 0.5
            halvings += 1
            continue
        w = w_next
        loss = next_loss

    names = class_names if class_names is not None else [f"class{i}" for i in range(n_classes)]
    if len(names) != n_classes:
        raise ValueError("class_names length must equal the number of classes")
    return SoftmaxClassifier(
        weights=w,
        class_names=list(names),
        feature_mean=mean,
        feature_std=std,
    )


def predict_posteriors(model: SoftmaxClassifier, features: np.ndarray) -> PosteriorSet:
    """Class probabilities for raw (unstandardized) feature rows."""
    if not model.standardize_internally:
        raise ValueError("model is marked as taking pre-standardized input; refusing")
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.feature_dim:
        raise ValueError(f"features must be N x {model.feature_dim}, got {x.shape}")
    xs = (x - model.feature_mean) / model.feature_std
    xa = np.concatenate([xs, np.ones((len(xs), 1))], axis=1)
    p = _softmax(xa @ model.weights.T)
    p /= p.sum(axis=1, keepdims=True)
    return PosteriorSet(matrix=p, class_names=model.class_names, provider_id="softmax-classifier")


def training_accuracy(model: SoftmaxClassifier, features: np.ndarray, labels: np.ndarray) -> float:
    posteriors = predict_posteriors(model, features)
    predicted = posteriors.matrix.argmax(axis=1)
    return float(np.mean(predicted == np.asarray(labels)))


# -- ingestion ----------------------------------------------------------------


def _read_matrix_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    """CSV with header `clip_id,<c0>,<c1>,...` -> (ids, column names, matrix)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2:
            raise FeatureFormatError(f"{path}: missing or too-short CSV header")
        ids, rows = [], []
        width = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != width + 1:
                raise FeatureFormatError(f"{path}:{lineno}: expected {width + 1} columns")
            ids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise FeatureFormatError(f"{path}:{lineno}: non-numeric value ({exc})") from exc
    if not rows:
        raise FeatureFormatError(f"{path}: no data rows")
    return ids, header[1:], np.asarray(rows, dtype=np.float64)


def _load_matrix(path) -> tuple[list[str], list[str], np.ndarray]:
    path = Path(path)
    if path.suffix.lower() == ".lten":
        arr = tensorio.read_lten(path)
        if arr.ndim != 2:
            raise FeatureFormatError(f"{path}: expected a 2-D tensor, got shape {arr.shape}")
        matrix = arr.astype(np.float64)
        ids = [f"row{i}" for i in range(matrix.shape[0])]
        cols = [f"c{i}" for i in range(matrix.shape[1])]
        return ids, cols, matrix
    return _read_matrix_csv(path)


def load_embeddings(path) -> list[Embedding]:
    """Read embeddings from an LTEN matrix or a `clip_id,v0,...` CSV."""
    ids, _, matrix = _load_matrix(path)
    if not np.all(np.isfinite(matrix)):
        raise FeatureFormatError(f"{path}: non-finite embedding values")
    provider = Path(path).stem
    return [
        Embedding(vector=matrix[i], provider_id=provider, clip_id=ids[i])
        for i in range(matrix.shape[0])
    ]


def load_posteriors(path) -> PosteriorSet:
    """Read posteriors; rows within 1e-3 of summing to 1 are renormalized."""
    ids, cols, matrix = _load_matrix(path)
    if not np.all(np.isfinite(matrix)):
        raise FeatureFormatError(f"{path}: non-finite posterior values")
    if np.any(matrix < 0.0):
        row = int(np.where(matrix < 0.0)[0][0])
        raise FeatureFormatError(f"{path}: negative probability in row {row}")
    sums = matrix.sum(axis=1)
    bad = np.where(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE)[0]
    if len(bad):
        raise FeatureFormatError(
            f"{path}: row {int(bad[0])} sums to {sums[bad[0]]:.6f}, "
            f"outside 1 +/- {ROW_SUM_TOLERANCE}"
        )
    matrix = matrix / sums[:, None]
    return PosteriorSet(matrix=matrix, class_names=cols, provider_id=Path(path).stem)


def embeddings_matrix(embeddings: list[Embedding]) -> np.ndarray:
    """Stack an embedding list, checking the shared-dimension invariant."""
    if not embeddings:
        raise ValueError("empty embedding list")
    dims = {len(e.vector) for e in embeddings}
    if len(dims) != 1:
        raise ValueError(f"inconsistent embedding dimensions {sorted(dims)}")
    return np.stack([e.vector for e in embeddings])
