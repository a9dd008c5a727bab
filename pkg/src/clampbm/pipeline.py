"""The experiment: partition, preprocess, sweep, validate, test.

One sweep shares a single stratified partition and a single normalizer (fit
on the training patients). Every ``(grid point, repetition)`` run then
binarizes the training patients, trains a fresh RBM, scores the validation
patients by clamp error and counts correct test predictions. All randomness
is derived from the master seed by :mod:`clampbm.seeding`, so runs are
independent of execution order and can be farmed out to worker processes.
"""

from __future__ import annotations

import functools
import hashlib
import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import Future, ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from clampbm import storage
from clampbm.features import (
    DEFAULT_REPLICAS,
    BinaryBatch,
    FeatureSelection,
    NormalizationModel,
    apply_normalizer,
    binarize_patient,
    fit_normalizer,
)
from clampbm.models import (
    CapacityError,
    ExpressionDataset,
    FloatArray,
    GridPoint,
    HyperparameterGrid,
    InvalidInputError,
    RbmParameters,
    RunRecord,
    SweepReport,
)
from clampbm.rbm import (
    DEFAULT_EPOCHS,
    ClampSpec,
    Hyperparameters,
    TrainedModel,
    clamp_error,
    classify,
    init_params,
    train,
)
from clampbm.sampler import Sampler
from clampbm.seeding import derive_seed, generator

logger = logging.getLogger(__name__)

DEFAULT_SIZES = (80, 10, 14)
DEFAULT_REPETITIONS = 3

Progress = Callable[[RunRecord], None]


class GridPointError(Exception):
    """A run failed; carries the grid point and repetition it failed at."""

    def __init__(self, point: GridPoint, repetition: int, cause: BaseException) -> None:
        super().__init__(f"{point.label}, repetition {repetition}: {cause}")
        self.point = point
        self.repetition = repetition
        self.cause = cause


@dataclass(frozen=True)
class Partition:
    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


def _class_counts(cumulative: int, n_class0: int, n_class1: int) -> int:
    """Class-0 patients among the first ``cumulative`` assigned, proportionally rounded."""
    total = n_class0 + n_class1
    share = math.floor(cumulative * n_class0 / total + 0.5)
    return min(max(share, cumulative - n_class1, 0), n_class0, cumulative)


def partition(dataset: ExpressionDataset, sizes: Sequence[int], seed: int) -> Partition:
    """Stratified train/validation/test split.

    Cumulative split boundaries are rounded proportionally per class, so every
    split's class counts are within one patient of the dataset's proportions
    and the splits always add up.
    """
    sizes = tuple(int(size) for size in sizes)
    if len(sizes) != 3 or any(size < 0 for size in sizes):
        raise InvalidInputError("sizes must be three nonnegative counts (train, val, test)")
    if sum(sizes) != dataset.n_patients:
        raise InvalidInputError(
            f"split sizes {sizes} sum to {sum(sizes)}, but there are "
            f"{dataset.n_patients} patients"
        )
    rng = generator(seed, "partition")
    members = [rng.permutation(np.flatnonzero(dataset.labels == c)) for c in (0, 1)]
    n0, n1 = len(members[0]), len(members[1])

    splits: list[list[int]] = [[], [], []]
    assigned = [0, 0]
    cumulative = 0
    for index, size in enumerate(sizes):
        cumulative += size
        class0 = _class_counts(cumulative, n0, n1)
        for c, upto in ((0, class0), (1, cumulative - class0)):
            splits[index].extend(int(i) for i in members[c][assigned[c] : upto])
            assigned[c] = upto

    train_labels = dataset.labels[splits[0]]
    for c, name in enumerate(dataset.class_names):
        if not (train_labels == c).any():
            raise InvalidInputError(f"class {name!r} has no patients in the training split")
    return Partition(*(tuple(sorted(split)) for split in splits))


@dataclass(frozen=True, eq=False)
class Experiment:
    """A partitioned dataset with its training-fit normalizer, shared by every run."""

    dataset: ExpressionDataset
    partition: Partition
    normalizer: NormalizationModel
    normalized: FloatArray
    clamp: ClampSpec

    @classmethod
    def prepare(cls, dataset: ExpressionDataset, split: Partition) -> Experiment:
        if not split.train:
            raise InvalidInputError("the training split is empty")
        normalizer = fit_normalizer(dataset.values[list(split.train)])
        return cls(
            dataset=dataset,
            partition=split,
            normalizer=normalizer,
            normalized=apply_normalizer(normalizer, dataset.values),
            clamp=ClampSpec(len(dataset.class_names)),
        )

    @property
    def n_features(self) -> int:
        return self.dataset.n_genes

    def training_batches(self, seed: int, repetition: int, n_replicas: int) -> list[BinaryBatch]:
        return [
            binarize_patient(
                self.normalized[patient],
                self.clamp.encode(int(self.dataset.labels[patient])),
                n_replicas,
                derive_seed(seed, "binarize", repetition, patient),
                patient_index=patient,
            )
            for patient in self.partition.train
        ]


def _fit(
    experiment: Experiment,
    point: GridPoint,
    repetition: int,
    sampler: Sampler,
    seed: int,
    n_replicas: int,
    n_epochs: int,
) -> TrainedModel:
    run_seed = derive_seed(
        seed, "run", point.learning_rate, point.n_hidden, point.n_samples, repetition
    )
    hyper = Hyperparameters(
        learning_rate=point.learning_rate,
        n_hidden=point.n_hidden,
        n_samples=point.n_samples,
        n_epochs=n_epochs,
        seed=derive_seed(run_seed, "train"),
    )
    batches = experiment.training_batches(seed, repetition, n_replicas)
    params = init_params(
        experiment.n_features + experiment.clamp.n_classes,
        point.n_hidden,
        derive_seed(run_seed, "init"),
    )
    params = train(params, batches, sampler, hyper)
    selection = FeatureSelection(
        tuple(range(experiment.n_features)), experiment.dataset.gene_ids
    )
    return TrainedModel(
        params=params,
        normalizer=experiment.normalizer,
        selection=selection,
        clamp=experiment.clamp,
        hyper=hyper,
        class_names=experiment.dataset.class_names,
    )


def validation_error(model: TrainedModel, experiment: Experiment) -> float:
    """Mean clamp error over the validation patients; NaN when there are none."""
    errors = []
    for patient in experiment.partition.validation:
        _, probabilities = classify(model.params, experiment.normalized[patient], model.clamp)
        truth = model.clamp.encode(int(experiment.dataset.labels[patient]))
        errors.append(clamp_error(probabilities, truth))
    return math.fsum(errors) / len(errors) if errors else math.nan


def score_test(
    params: RbmParameters, partition: Partition, data: Experiment, clamp: ClampSpec
) -> int:
    """Number of test patients whose predicted class equals their label."""
    if not partition.test:
        raise InvalidInputError("the test split is empty")
    correct = 0
    for patient in partition.test:
        predicted, _ = classify(params, data.normalized[patient], clamp)
        correct += int(predicted == int(data.dataset.labels[patient]))
    return correct


def run_point(
    experiment: Experiment,
    point: GridPoint,
    repetition: int,
    sampler: Sampler,
    seed: int,
    *,
    n_replicas: int = DEFAULT_REPLICAS,
    n_epochs: int = DEFAULT_EPOCHS,
) -> RunRecord:
    """Train and score one repetition at one grid point."""
    model = _fit(experiment, point, repetition, sampler, seed, n_replicas, n_epochs)
    raw_score = (
        score_test(model.params, experiment.partition, experiment, model.clamp)
        if experiment.partition.test
        else 0
    )
    record = RunRecord(point, repetition, validation_error(model, experiment), raw_score)
    logger.info(
        "%s rep %d: validation error %.6f, raw score %d/%d",
        point.label,
        repetition,
        record.val_error,
        raw_score,
        len(experiment.partition.test),
    )
    return record


def sweep_fingerprint(
    dataset: ExpressionDataset,
    sampler: Sampler,
    seed: int,
    sizes: Sequence[int],
    n_replicas: int,
    n_epochs: int,
    repetitions: int,
) -> str:
    """Identifies the inputs a checkpoint was computed under."""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(dataset.values).tobytes())
    digest.update(np.ascontiguousarray(dataset.labels).tobytes())
    settings = (
        dataset.gene_ids,
        repr(sampler),
        int(seed),
        tuple(sizes),
        n_replicas,
        n_epochs,
        repetitions,
    )
    digest.update(repr(settings).encode("utf-8"))
    return "sha256:" + digest.hexdigest()


def _reuse_checkpoint(
    directory: Path,
    point: GridPoint,
    grid: HyperparameterGrid,
    fingerprint: str,
    repetitions: int,
) -> list[RunRecord] | None:
    path = storage.checkpoint_path(directory, point)
    if not path.is_file():
        return None
    checkpoint = storage.read_checkpoint(path)
    records = list(checkpoint.records)
    complete = sorted(r.repetition for r in records) == list(range(repetitions))
    if checkpoint.fingerprint != fingerprint or not complete:
        logger.warning("%s: checkpoint was written for other inputs; recomputing", path)
        return None
    logger.info("%s: reusing checkpoint", point.label)
    if checkpoint.grid != grid:
        storage.write_checkpoint(directory, replace(checkpoint, grid=grid))
    return records


def run_grid(
    dataset: ExpressionDataset,
    grid: HyperparameterGrid,
    sampler: Sampler,
    seed: int,
    *,
    sizes: Sequence[int] = DEFAULT_SIZES,
    n_replicas: int = DEFAULT_REPLICAS,
    n_epochs: int = DEFAULT_EPOCHS,
    repetitions: int = DEFAULT_REPETITIONS,
    jobs: int = 1,
    checkpoint_dir: Path | None = None,
    progress: Progress | None = None,
) -> SweepReport:
    """Every grid point times ``repetitions``, over one shared partition.

    With ``jobs > 1`` runs execute in a process pool; results are still
    collected and checkpointed in grid order, so the report does not depend
    on scheduling.
    """
    points = grid.points()
    if not points:
        raise InvalidInputError("the hyperparameter grid is empty")
    if repetitions < 1 or jobs < 1:
        raise InvalidInputError("repetitions and jobs must be at least 1")
    split = partition(dataset, sizes, derive_seed(seed, "partition"))
    experiment = Experiment.prepare(dataset, split)
    fingerprint = sweep_fingerprint(
        dataset, sampler, seed, sizes, n_replicas, n_epochs, repetitions
    )

    finished: dict[GridPoint, list[RunRecord]] = {}
    if checkpoint_dir is not None:
        for point in points:
            reused = _reuse_checkpoint(checkpoint_dir, point, grid, fingerprint, repetitions)
            if reused is not None:
                finished[point] = reused

    def collect(point: GridPoint, results: list[Callable[[], RunRecord]]) -> None:
        records = []
        for repetition, result in enumerate(results):
            try:
                record = result()
            except (InvalidInputError, CapacityError) as error:
                raise GridPointError(point, repetition, error) from error
            records.append(record)
            if progress is not None:
                progress(record)
        if checkpoint_dir is not None:
            storage.write_checkpoint(
                checkpoint_dir,
                storage.Checkpoint(
                    fingerprint, seed, len(split.test), point, tuple(records), grid
                ),
            )
        finished[point] = records

    pending = [point for point in points if point not in finished]
    options = {"n_replicas": n_replicas, "n_epochs": n_epochs}
    if jobs == 1:
        for point in pending:
            collect(
                point,
                [
                    functools.partial(
                        run_point, experiment, point, rep, sampler, seed, **options
                    )
                    for rep in range(repetitions)
                ],
            )
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures: dict[GridPoint, list[Future[RunRecord]]] = {
                point: [
                    pool.submit(run_point, experiment, point, rep, sampler, seed, **options)
                    for rep in range(repetitions)
                ]
                for point in pending
            }
            for point in pending:
                collect(point, [future.result for future in futures[point]])

    records = [record for point in points for record in finished[point]]
    return SweepReport(
        records=tuple(records),
        grid=grid,
        seed=seed,
        test_size=len(split.test),
        repetitions=repetitions,
    )


def _mean_validation_error(records: Sequence[RunRecord]) -> float:
    errors = [math.inf if math.isnan(r.val_error) else r.val_error for r in records]
    return math.fsum(errors) / len(errors)


def best_hyperparameters(report: SweepReport) -> GridPoint:
    """The point with the lowest mean validation error; cheaper points win ties."""
    grouped = report.by_point()
    if not grouped:
        raise InvalidInputError("the report has no records")
    return min(
        grouped,
        key=lambda point: (_mean_validation_error(grouped[point]), point.preference()),
    )


def train_model(
    dataset: ExpressionDataset,
    selection: FeatureSelection,
    point: GridPoint,
    sampler: Sampler,
    seed: int,
    *,
    sizes: Sequence[int] = DEFAULT_SIZES,
    n_replicas: int = DEFAULT_REPLICAS,
    n_epochs: int = DEFAULT_EPOCHS,
) -> tuple[TrainedModel, RunRecord]:
    """Fit one model at ``point`` on the training split of ``dataset``.

    ``selection`` indexes ``dataset``'s genes; the returned model carries it
    so raw patient vectors can be classified directly. The record holds the
    model's validation error and test score (0 when the test split is empty).
    """
    reduced = dataset.select_genes(list(selection.indices))
    experiment = Experiment.prepare(
        reduced, partition(reduced, sizes, derive_seed(seed, "partition"))
    )
    model = _fit(experiment, point, 0, sampler, seed, n_replicas, n_epochs)
    model = TrainedModel(
        params=model.params,
        normalizer=model.normalizer,
        selection=selection,
        clamp=model.clamp,
        hyper=model.hyper,
        class_names=model.class_names,
    )
    raw_score = (
        score_test(model.params, experiment.partition, experiment, model.clamp)
        if experiment.partition.test
        else 0
    )
    return model, RunRecord(point, 0, validation_error(model, experiment), raw_score)


def load_report(checkpoint_dir: Path) -> SweepReport:
    """Rebuild a finished sweep's report from its checkpoint directory."""
    checkpoints = storage.read_checkpoints(checkpoint_dir)
    if not checkpoints:
        raise InvalidInputError(f"{checkpoint_dir}: no checkpoints found")
    first = checkpoints[0]
    if any(c.fingerprint != first.fingerprint for c in checkpoints):
        raise InvalidInputError(f"{checkpoint_dir}: checkpoints come from different sweeps")
    stored = {c.grid for c in checkpoints}
    grid = stored.pop() if len(stored) == 1 and None not in stored else None
    if grid is None:
        # Checkpoints without a common stored grid fall back to sorted axes.
        grid = HyperparameterGrid(
            learning_rates=tuple(sorted({c.point.learning_rate for c in checkpoints})),
            hidden_units=tuple(sorted({c.point.n_hidden for c in checkpoints})),
            sample_counts=tuple(sorted({c.point.n_samples for c in checkpoints})),
        )
    by_point = {c.point: c.records for c in checkpoints}
    missing = [point.label for point in grid.points() if point not in by_point]
    if missing:
        raise InvalidInputError(
            f"{checkpoint_dir}: sweep is incomplete ({len(missing)} grid points missing, "
            f"first {missing[0]})"
        )
    return SweepReport(
        records=tuple(record for point in grid.points() for record in by_point[point]),
        grid=grid,
        seed=first.seed,
        test_size=first.test_size,
        repetitions=len(first.records),
    )
