"""RBM lifecycle: initialization, sampler-driven training, clamp classification.

Training compares data statistics of a patient batch (positive phase, hidden
units as probabilities) with model statistics from any
:class:`~clampbm.sampler.Sampler` (negative phase), and steps the
parameters by ``learning_rate`` times the difference. With the exact
sampler the step is exactly ``learning_rate`` times the gradient of the
batch's mean log-likelihood.

Classification appends the neutral clamp (all ones) to a normalized feature
vector, runs one mean-field up-down pass, and reads the class off the
largest reconstructed clamp unit.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from clampbm.features import (
    BinaryBatch,
    FeatureSelection,
    NormalizationModel,
    apply_normalizer,
)
from clampbm.models import (
    BitArray,
    ClampMode,
    FloatArray,
    InvalidInputError,
    RbmParameters,
    SampleSet,
)
from clampbm.sampler import Sampler, free_energy, log_partition, sigmoid
from clampbm.seeding import derive_seed, generator

logger = logging.getLogger(__name__)

INIT_STD = 0.01
DEFAULT_EPOCHS = 20


@dataclass(frozen=True)
class Hyperparameters:
    learning_rate: float
    n_hidden: int
    n_samples: int
    n_epochs: int = DEFAULT_EPOCHS
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise InvalidInputError(f"learning rate must be positive, got {self.learning_rate}")
        if self.n_hidden < 1 or self.n_samples < 1 or self.n_epochs < 1:
            raise InvalidInputError("n_hidden, n_samples and n_epochs must all be at least 1")


@dataclass(frozen=True)
class ClampSpec:
    """One-hot class clamps plus the all-ones neutral clamp used at inference."""

    n_classes: int = 2

    def __post_init__(self) -> None:
        if self.n_classes < 1:
            raise InvalidInputError("a clamp needs at least one class")

    def encode(self, label: int) -> BitArray:
        if not 0 <= label < self.n_classes:
            raise InvalidInputError(f"class {label} is outside 0..{self.n_classes - 1}")
        bits = np.zeros(self.n_classes, dtype=np.int8)
        bits[label] = 1
        return bits

    @property
    def neutral(self) -> BitArray:
        return np.ones(self.n_classes, dtype=np.int8)


@dataclass(frozen=True, eq=False)
class Gradient:
    visible_bias: FloatArray
    hidden_bias: FloatArray
    weights: FloatArray


def init_params(n_visible: int, n_hidden: int, seed: int = 0) -> RbmParameters:
    """Zero biases, weights drawn from ``N(0, 0.01^2)``."""
    if n_visible < 1 or n_hidden < 1:
        raise InvalidInputError("an RBM needs at least one visible and one hidden unit")
    rng = np.random.default_rng(seed)
    return RbmParameters(
        visible_bias=np.zeros(n_visible),
        hidden_bias=np.zeros(n_hidden),
        weights=rng.normal(0.0, INIT_STD, size=(n_visible, n_hidden)),
    )


def batch_gradient(params: RbmParameters, batch: BinaryBatch, samples: SampleSet) -> Gradient:
    """Positive minus negative statistics for one batch."""
    if batch.width != params.n_visible:
        raise InvalidInputError(
            f"batch vectors have {batch.width} units; the RBM has {params.n_visible} visible"
        )
    if samples.visible.shape[1] != params.n_visible or samples.hidden.shape[1] != params.n_hidden:
        raise InvalidInputError("sample set dimensions do not match the RBM")
    data = batch.replicas.astype(np.float64)
    hidden_prob = sigmoid(params.hidden_bias + data @ params.weights)
    positive_vh = data.T @ hidden_prob / data.shape[0]
    negative_v, negative_h, negative_vh = samples.expectations()
    return Gradient(
        visible_bias=data.mean(axis=0) - negative_v,
        hidden_bias=hidden_prob.mean(axis=0) - negative_h,
        weights=positive_vh - negative_vh,
    )


def apply_gradient(
    params: RbmParameters, gradient: Gradient, learning_rate: float
) -> RbmParameters:
    if learning_rate < 0:
        raise InvalidInputError(f"learning rate must be nonnegative, got {learning_rate}")
    return RbmParameters(
        visible_bias=params.visible_bias + learning_rate * gradient.visible_bias,
        hidden_bias=params.hidden_bias + learning_rate * gradient.hidden_bias,
        weights=params.weights + learning_rate * gradient.weights,
    )


def train_batch(
    params: RbmParameters,
    batch: BinaryBatch,
    sampler: Sampler,
    hyper: Hyperparameters,
    seed: int | None = None,
) -> RbmParameters:
    """One contrastive update; the sampler draws ``hyper.n_samples`` reads."""
    if batch.clamp_mode is not ClampMode.TRUE_LABEL:
        raise InvalidInputError("training batches must carry the true-label clamp")
    if batch.width != params.n_visible:
        raise InvalidInputError(
            f"batch vectors have {batch.width} units; the RBM has {params.n_visible} visible"
        )
    samples = sampler.sample(params, hyper.n_samples, hyper.seed if seed is None else seed)
    return apply_gradient(params, batch_gradient(params, batch, samples), hyper.learning_rate)


def train(
    params: RbmParameters,
    batches: Sequence[BinaryBatch],
    sampler: Sampler,
    hyper: Hyperparameters,
) -> RbmParameters:
    """``hyper.n_epochs`` passes, one update per batch, batches shuffled per epoch."""
    if not batches:
        raise InvalidInputError("training needs at least one batch")
    means = np.vstack([batch.replicas.mean(axis=0) for batch in batches])
    for epoch in range(hyper.n_epochs):
        order = generator(hyper.seed, "epoch", epoch).permutation(len(batches))
        for position, index in enumerate(order):
            update_seed = derive_seed(hyper.seed, "update", epoch, position)
            params = train_batch(params, batches[int(index)], sampler, hyper, update_seed)
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(
                "epoch %d/%d: reconstruction error %.6f",
                epoch + 1,
                hyper.n_epochs,
                reconstruction_error(params, means),
            )
    return params


def reconstruct(params: RbmParameters, visible: FloatArray) -> FloatArray:
    """One mean-field pass: ``sigmoid(a + W sigmoid(b + W^T v))``."""
    v = np.asarray(visible, dtype=np.float64)
    if v.shape[-1] != params.n_visible:
        raise InvalidInputError(f"expected {params.n_visible} visible values, got {v.shape[-1]}")
    hidden_prob = sigmoid(params.hidden_bias + v @ params.weights)
    return sigmoid(params.visible_bias + hidden_prob @ params.weights.T)


def reconstruction_error(params: RbmParameters, visible: FloatArray) -> float:
    """Mean squared difference between rows of ``visible`` and their reconstructions."""
    v = np.atleast_2d(np.asarray(visible, dtype=np.float64))
    return float(np.mean((reconstruct(params, v) - v) ** 2))


def classify(
    params: RbmParameters, features: FloatArray, clamp: ClampSpec
) -> tuple[int, FloatArray]:
    vector = np.asarray(features, dtype=np.float64)
    expected = params.n_visible - clamp.n_classes
    if vector.ndim != 1 or vector.size != expected:
        raise InvalidInputError(
            f"expected {expected} feature values for this model, got {vector.size}"
        )
    visible = np.concatenate([vector, clamp.neutral.astype(np.float64)])
    probabilities = reconstruct(params, visible)[expected:]
    # argmax takes the first maximum: ties go to the lower class index.
    return int(np.argmax(probabilities)), probabilities


def clamp_error(predicted: FloatArray, truth: FloatArray) -> float:
    """Squared Euclidean distance between reconstructed and true clamps."""
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise InvalidInputError(f"clamp lengths differ: {p.size} vs {t.size}")
    return float(np.sum((p - t) ** 2))


def log_likelihood(params: RbmParameters, visible: BitArray) -> float:
    """Mean exact ``log P(v)`` over the rows of ``visible``."""
    return float(np.mean(-free_energy(params, visible))) - log_partition(params)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Everything classification needs: the RBM and the preprocessing it was trained under."""

    params: RbmParameters
    normalizer: NormalizationModel
    selection: FeatureSelection
    clamp: ClampSpec
    hyper: Hyperparameters
    class_names: tuple[str, ...]

    def __post_init__(self) -> None:
        k = len(self.selection.indices)
        if self.normalizer.n_features != k:
            raise InvalidInputError(
                f"normalizer covers {self.normalizer.n_features} features, selection has {k}"
            )
        if self.params.n_visible != k + self.clamp.n_classes:
            raise InvalidInputError(
                f"RBM has {self.params.n_visible} visible units; "
                f"{k} features + {self.clamp.n_classes} clamp units expected"
            )
        if len(self.class_names) != self.clamp.n_classes:
            raise InvalidInputError("one class name per clamp unit is required")

    def predict(self, expression: FloatArray) -> tuple[int, FloatArray]:
        """Classify raw expression values of the selected genes, in selection order."""
        vector = np.asarray(expression, dtype=np.float64)
        if vector.ndim != 1 or vector.size != self.normalizer.n_features:
            raise InvalidInputError(
                f"expected {self.normalizer.n_features} feature values "
                f"({', '.join(self.selection.gene_ids)}), got {vector.size}"
            )
        return classify(self.params, apply_normalizer(self.normalizer, vector), self.clamp)
