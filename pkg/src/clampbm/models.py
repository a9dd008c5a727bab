"""Shared domain types: datasets, RBM parameters, sample sets, error categories."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]
BitArray = NDArray[np.int8]

DEFAULT_CLASS_NAMES = ("Adenocarcinoma", "Squamous cell carcinoma")


class InvalidInputError(ValueError):
    """An argument violates an operation's precondition (shape, range, count)."""


class CapacityError(Exception):
    """The problem is too large for the chosen method (enumeration, embedding)."""


class ClampMode(enum.Enum):
    TRUE_LABEL = "true-label"
    NEUTRAL = "neutral"


def as_bits(values: object, what: str) -> BitArray:
    """Validate a 0/1 vector or matrix and return it as int8."""
    array = np.asarray(values)
    if array.size and not np.isin(array, (0, 1)).all():
        raise InvalidInputError(f"{what} must contain only 0 and 1")
    return array.astype(np.int8)


@dataclass(frozen=True, eq=False)
class ExpressionDataset:
    """Patients x genes expression matrix with a binary class label per patient."""

    values: FloatArray
    gene_ids: tuple[str, ...]
    labels: NDArray[np.int64]
    patient_ids: tuple[str, ...] = ()
    class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if values.ndim != 2:
            raise InvalidInputError("expression values must be a patients x genes matrix")
        if values.shape[0] != labels.shape[0]:
            raise InvalidInputError(
                f"{values.shape[0]} patient rows but {labels.shape[0]} labels"
            )
        if values.shape[1] != len(self.gene_ids):
            raise InvalidInputError(
                f"{values.shape[1]} gene columns but {len(self.gene_ids)} gene ids"
            )
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise InvalidInputError("every label must be 0 or 1")
        patient_ids = self.patient_ids or tuple(f"P{i + 1:04d}" for i in range(values.shape[0]))
        if len(patient_ids) != values.shape[0]:
            raise InvalidInputError(
                f"{values.shape[0]} patient rows but {len(patient_ids)} patient ids"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "patient_ids", tuple(patient_ids))
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n_patients(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_genes(self) -> int:
        return int(self.values.shape[1])

    def select_genes(self, indices: list[int]) -> ExpressionDataset:
        """The dataset restricted to ``indices``, in that column order."""
        return ExpressionDataset(
            values=self.values[:, indices],
            gene_ids=tuple(self.gene_ids[i] for i in indices),
            labels=self.labels,
            patient_ids=self.patient_ids,
            class_names=self.class_names,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExpressionDataset):
            return NotImplemented
        return (
            self.gene_ids == other.gene_ids
            and self.patient_ids == other.patient_ids
            and self.class_names == other.class_names
            and np.array_equal(self.labels, other.labels)
            and self.values.shape == other.values.shape
            and bool((self.values == other.values).all())
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class RbmParameters:
    """Visible bias ``a``, hidden bias ``b`` and weights ``W`` (n_visible x n_hidden)."""

    visible_bias: FloatArray
    hidden_bias: FloatArray
    weights: FloatArray

    def __post_init__(self) -> None:
        a = np.asarray(self.visible_bias, dtype=np.float64)
        b = np.asarray(self.hidden_bias, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if a.ndim != 1 or b.ndim != 1 or w.shape != (a.size, b.size):
            raise InvalidInputError(
                f"inconsistent RBM dimensions: a{a.shape}, b{b.shape}, W{w.shape}"
            )
        if not (np.isfinite(a).all() and np.isfinite(b).all() and np.isfinite(w).all()):
            raise InvalidInputError("RBM parameters must be finite")
        object.__setattr__(self, "visible_bias", a)
        object.__setattr__(self, "hidden_bias", b)
        object.__setattr__(self, "weights", w)

    @property
    def n_visible(self) -> int:
        return int(self.visible_bias.size)

    @property
    def n_hidden(self) -> int:
        return int(self.hidden_bias.size)

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> RbmParameters:
        return cls(np.zeros(n_visible), np.zeros(n_hidden), np.zeros((n_visible, n_hidden)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RbmParameters):
            return NotImplemented
        return (
            np.array_equal(self.visible_bias, other.visible_bias)
            and np.array_equal(self.hidden_bias, other.hidden_bias)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None  # type: ignore[assignment]


def energies(params: RbmParameters, visible: BitArray, hidden: BitArray) -> FloatArray:
    """Row-wise ``E(v, h) = -a.v - b.h - v.W.h`` for matrices of states."""
    v = np.atleast_2d(visible).astype(np.float64)
    h = np.atleast_2d(hidden).astype(np.float64)
    return -(
        v @ params.visible_bias
        + h @ params.hidden_bias
        + np.einsum("ki,ij,kj->k", v, params.weights, h)
    )


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Weighted binary ``(v, h)`` configurations with their RBM energies.

    Rows of ``visible``/``hidden`` are configurations; ``weights`` are
    multiplicities (one per read) or probabilities (exact enumeration).
    Build through :meth:`from_states` so stored energies always match
    :func:`energies`.
    """

    visible: BitArray
    hidden: BitArray
    weights: FloatArray
    energies: FloatArray = field(repr=False)

    def __post_init__(self) -> None:
        total = float(np.sum(self.weights))
        if not np.isfinite(total) or total <= 0:
            raise InvalidInputError("sample weights must sum to a positive finite total")
        if (np.asarray(self.weights) < 0).any():
            raise InvalidInputError("sample weights must be nonnegative")
        if not (len(self.visible) == len(self.hidden) == len(self.weights) == len(self.energies)):
            raise InvalidInputError("sample set columns differ in length")

    @classmethod
    def from_states(
        cls,
        params: RbmParameters,
        visible: BitArray,
        hidden: BitArray,
        weights: FloatArray | None = None,
    ) -> SampleSet:
        visible = np.atleast_2d(visible).astype(np.int8)
        hidden = np.atleast_2d(hidden).astype(np.int8)
        if weights is None:
            weights = np.ones(len(visible))
        weights = np.asarray(weights, dtype=np.float64)
        return cls(visible, hidden, weights, energies(params, visible, hidden))

    def __len__(self) -> int:
        return int(self.weights.size)

    @property
    def probabilities(self) -> FloatArray:
        return np.asarray(self.weights / self.weights.sum(), dtype=np.float64)

    def expectations(self) -> tuple[FloatArray, FloatArray, FloatArray]:
        """Weighted ``<v>``, ``<h>`` and ``<v h^T>`` over the set."""
        p = self.probabilities
        v = self.visible.astype(np.float64)
        h = self.hidden.astype(np.float64)
        return p @ v, p @ h, (v * p[:, None]).T @ h

    def state_counts(self) -> dict[tuple[int, ...], float]:
        """Total weight per distinct ``v ++ h`` configuration."""
        counts: dict[tuple[int, ...], float] = {}
        for row, weight in zip(np.hstack([self.visible, self.hidden]), self.weights, strict=True):
            key = tuple(int(bit) for bit in row)
            counts[key] = counts.get(key, 0.0) + float(weight)
        return counts

    def modal_state(self) -> tuple[int, ...]:
        """The configuration carrying the most weight (lowest energy on ties)."""
        counts = self.state_counts()
        energy_of = {
            tuple(int(bit) for bit in row): float(e)
            for row, e in zip(np.hstack([self.visible, self.hidden]), self.energies, strict=True)
        }
        return min(counts, key=lambda state: (-counts[state], energy_of[state], state))


@dataclass(frozen=True, order=True)
class GridPoint:
    learning_rate: float
    n_hidden: int
    n_samples: int

    @property
    def label(self) -> str:
        return f"lr-{self.learning_rate!r}_hidden-{self.n_hidden}_samples-{self.n_samples}"

    def preference(self) -> tuple[int, int, float]:
        """Tie-break order among equally good points: cheaper first."""
        return (self.n_samples, self.n_hidden, self.learning_rate)


@dataclass(frozen=True)
class HyperparameterGrid:
    """Cartesian product, iterated learning rate, then hidden units, then samples."""

    learning_rates: tuple[float, ...]
    hidden_units: tuple[int, ...]
    sample_counts: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "learning_rates", tuple(float(x) for x in self.learning_rates))
        object.__setattr__(self, "hidden_units", tuple(int(x) for x in self.hidden_units))
        object.__setattr__(self, "sample_counts", tuple(int(x) for x in self.sample_counts))
        if any(not lr > 0 for lr in self.learning_rates):
            raise InvalidInputError("learning rates must be positive")
        if any(m < 1 for m in self.hidden_units):
            raise InvalidInputError("hidden unit counts must be at least 1")
        if any(s < 1 for s in self.sample_counts):
            raise InvalidInputError("sample counts must be at least 1")
        for name in ("learning_rates", "hidden_units", "sample_counts"):
            values = getattr(self, name)
            if len(set(values)) != len(values):
                raise InvalidInputError(f"{name.replace('_', ' ')} contain duplicates")

    @classmethod
    def default(cls) -> HyperparameterGrid:
        """1-3 hidden units x learning rates 0.25..1.25 x 1..2048 samples (180 points)."""
        return cls(
            learning_rates=(0.25, 0.5, 0.75, 1.0, 1.25),
            hidden_units=(1, 2, 3),
            sample_counts=tuple(2**power for power in range(12)),
        )

    def points(self) -> list[GridPoint]:
        return [
            GridPoint(lr, m, s)
            for lr in self.learning_rates
            for m in self.hidden_units
            for s in self.sample_counts
        ]

    def __len__(self) -> int:
        return len(self.learning_rates) * len(self.hidden_units) * len(self.sample_counts)


@dataclass(frozen=True)
class RunRecord:
    """One trained-and-scored repetition at one grid point.

    ``val_error`` is the mean clamp error over validation patients (NaN when
    the validation split is empty); ``raw_score`` counts correct test
    predictions.
    """

    point: GridPoint
    repetition: int
    val_error: float
    raw_score: int


@dataclass(frozen=True)
class SweepReport:
    records: tuple[RunRecord, ...]
    grid: HyperparameterGrid
    seed: int
    test_size: int
    repetitions: int = 3

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        expected = {point: set(range(self.repetitions)) for point in self.grid.points()}
        seen: dict[GridPoint, set[int]] = {point: set() for point in expected}
        for record in self.records:
            if record.point not in seen:
                raise InvalidInputError(f"record for {record.point.label} is outside the grid")
            if record.repetition in seen[record.point]:
                raise InvalidInputError(
                    f"duplicate repetition {record.repetition} at {record.point.label}"
                )
            if not 0 <= record.raw_score <= self.test_size:
                raise InvalidInputError(
                    f"raw score {record.raw_score} outside 0..{self.test_size}"
                )
            seen[record.point].add(record.repetition)
        for point, repetitions in seen.items():
            if repetitions != expected[point]:
                raise InvalidInputError(
                    f"{point.label} has {len(repetitions)} of {self.repetitions} repetitions"
                )

    def by_point(self) -> dict[GridPoint, list[RunRecord]]:
        grouped: dict[GridPoint, list[RunRecord]] = {}
        for record in self.records:
            grouped.setdefault(record.point, []).append(record)
        return grouped
