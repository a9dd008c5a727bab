"""Feature selection, normalization and binarization.

Everything between a raw expression matrix and the binary batches the RBM
consumes lives here:

- **Fisher score** ranks genes by ``(mu0 - mu1)^2 / (var0 + var1)`` with
  population variances. A zero-variance gene that still separates the
  classes scores ``inf``, above every finite score.
- **Min-max normalization** is fit on the training rows only and clips
  everything else into ``[0, 1]``; a constant feature maps to ``0.5``.
- **Binarization** expands each normalized value ``p`` into a column of
  ``n_replicas`` bits holding exactly ``round(p * n_replicas)`` ones (half
  up) in a seed-determined order, one independent shuffle per feature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from clampbm.models import (
    BitArray,
    ClampMode,
    ExpressionDataset,
    FloatArray,
    InvalidInputError,
    as_bits,
)

DEFAULT_REPLICAS = 1000
MIN_PER_CLASS = 2


@dataclass(frozen=True, eq=False)
class FeatureScores:
    scores: FloatArray
    ranking: tuple[int, ...]


@dataclass(frozen=True)
class FeatureSelection:
    """Selected column indices, in rank order, with their gene ids."""

    indices: tuple[int, ...]
    gene_ids: tuple[str, ...]


@dataclass(frozen=True, eq=False)
class NormalizationModel:
    minimum: FloatArray
    maximum: FloatArray

    def __post_init__(self) -> None:
        if self.minimum.shape != self.maximum.shape:
            raise InvalidInputError("normalizer minimum and maximum differ in length")
        if (self.maximum < self.minimum).any():
            raise InvalidInputError("normalizer maximum is below its minimum")

    @property
    def n_features(self) -> int:
        return int(self.minimum.size)


@dataclass(frozen=True, eq=False)
class BinaryBatch:
    """One patient as ``n_replicas`` binary rows of ``features ++ clamp``."""

    replicas: BitArray
    patient_index: int
    clamp_mode: ClampMode

    @property
    def n_replicas(self) -> int:
        return int(self.replicas.shape[0])

    @property
    def width(self) -> int:
        return int(self.replicas.shape[1])


def fisher_score(dataset: ExpressionDataset) -> FeatureScores:
    values = dataset.values
    if not np.isfinite(values).all():
        raise InvalidInputError("expression values must be finite to score features")
    group0 = values[dataset.labels == 0]
    group1 = values[dataset.labels == 1]
    if len(group0) < MIN_PER_CLASS or len(group1) < MIN_PER_CLASS:
        raise InvalidInputError(
            f"Fisher score needs at least {MIN_PER_CLASS} patients per class "
            f"(got {len(group0)} and {len(group1)})"
        )
    numerator = (group0.mean(axis=0) - group1.mean(axis=0)) ** 2
    denominator = group0.var(axis=0) + group1.var(axis=0)
    scores = np.zeros(values.shape[1])
    spread = denominator > 0
    scores[spread] = numerator[spread] / denominator[spread]
    scores[~spread & (numerator > 0)] = math.inf
    # Stable sort on the negated score keeps ascending index order among ties.
    ranking = np.argsort(-scores, kind="stable")
    return FeatureScores(scores=scores, ranking=tuple(int(i) for i in ranking))


def select_top_k(scores: FeatureScores, k: int) -> list[int]:
    if not 1 <= k <= len(scores.ranking):
        raise InvalidInputError(f"k must be between 1 and {len(scores.ranking)}, got {k}")
    return list(scores.ranking[:k])


def select_features(dataset: ExpressionDataset, k: int) -> FeatureSelection:
    """Fisher-score the dataset and keep the top ``k`` genes."""
    indices = select_top_k(fisher_score(dataset), k)
    return FeatureSelection(tuple(indices), tuple(dataset.gene_ids[i] for i in indices))


def fit_normalizer(train_values: FloatArray) -> NormalizationModel:
    values = np.asarray(train_values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] == 0:
        raise InvalidInputError("cannot fit a normalizer on an empty matrix")
    return NormalizationModel(minimum=values.min(axis=0), maximum=values.max(axis=0))


def apply_normalizer(model: NormalizationModel, values: FloatArray) -> FloatArray:
    matrix = np.asarray(values, dtype=np.float64)
    single = matrix.ndim == 1
    matrix = np.atleast_2d(matrix)
    if matrix.shape[1] != model.n_features:
        raise InvalidInputError(
            f"expected {model.n_features} features, got {matrix.shape[1]}"
        )
    span = model.maximum - model.minimum
    flat = span == 0
    safe_span = np.where(flat, 1.0, span)
    scaled = np.clip((matrix - model.minimum) / safe_span, 0.0, 1.0)
    scaled[:, flat] = 0.5
    return scaled[0] if single else scaled


def ones_count(p: float, n_replicas: int) -> int:
    """``round(p * n_replicas)`` with halves rounded up."""
    return math.floor(p * n_replicas + 0.5)


def binarize_patient(
    normalized: FloatArray,
    clamp: BitArray,
    n_replicas: int = DEFAULT_REPLICAS,
    seed: int = 0,
    *,
    patient_index: int = 0,
    clamp_mode: ClampMode = ClampMode.TRUE_LABEL,
) -> BinaryBatch:
    vector = np.asarray(normalized, dtype=np.float64)
    if n_replicas < 1:
        raise InvalidInputError("n_replicas must be at least 1")
    if vector.ndim != 1:
        raise InvalidInputError("a patient must be a single feature vector")
    if not ((vector >= 0) & (vector <= 1)).all():
        raise InvalidInputError("normalized features must lie in [0, 1]")
    counts = np.array([ones_count(float(p), n_replicas) for p in vector], dtype=np.int64)
    rng = np.random.default_rng(seed)
    # Independent random permutation per column: rank of a uniform draw.
    ranks = rng.random((n_replicas, vector.size)).argsort(axis=0).argsort(axis=0)
    features: NDArray[np.int8] = (ranks < counts).astype(np.int8)
    clamp_row = as_bits(clamp, "clamp").reshape(-1)
    clamp_bits = np.broadcast_to(clamp_row, (n_replicas, clamp_row.size))
    replicas = np.hstack([features, clamp_bits]).astype(np.int8)
    return BinaryBatch(replicas=replicas, patient_index=patient_index, clamp_mode=clamp_mode)
