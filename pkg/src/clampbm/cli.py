"""Command line interface: synth, features, sweep, train, classify, report."""

from __future__ import annotations

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pandas as pd
import typer

from clampbm import data, pipeline, report, storage
from clampbm.data import SyntheticSpec
from clampbm.features import FeatureSelection, fisher_score, select_features, select_top_k
from clampbm.models import (
    CapacityError,
    ExpressionDataset,
    FloatArray,
    GridPoint,
    InvalidInputError,
    RunRecord,
    SweepReport,
)
from clampbm.pipeline import GridPointError
from clampbm.sampler import SamplerKind, make_sampler
from clampbm.storage import ArtifactError, ConfigError

app = typer.Typer(no_args_is_help=True, add_completion=False)

EXIT_INVALID, EXIT_CAPACITY, EXIT_IO = 2, 3, 4

_LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def _category(error: BaseException) -> tuple[str, int]:
    if isinstance(error, GridPointError):
        return _category(error.cause)
    if isinstance(error, CapacityError):
        return "capacity", EXIT_CAPACITY
    if isinstance(error, ConfigError):
        return "configuration", EXIT_INVALID
    if isinstance(error, ArtifactError):
        return "model artifact", EXIT_INVALID
    if isinstance(error, OSError):
        return "i/o", EXIT_IO
    return "invalid input", EXIT_INVALID


def _fail(error: BaseException) -> typer.Exit:
    category, code = _category(error)
    message = str(error)
    if isinstance(error, OSError) and error.filename is not None:
        message = f"{error.filename}: {error.strerror}"
    typer.echo(f"clampbm: error: {category}: {message}")
    return typer.Exit(code)


@contextmanager
def _reported_errors() -> Iterator[None]:
    try:
        yield
    except (InvalidInputError, CapacityError, ConfigError, ArtifactError, GridPointError) as error:
        raise _fail(error) from None
    except OSError as error:
        raise _fail(error) from None


def _describe(point: GridPoint) -> str:
    return f"lr={point.learning_rate!r} hidden={point.n_hidden} samples={point.n_samples}"


def _print_best(sweep: SweepReport) -> None:
    best = pipeline.best_hyperparameters(sweep)
    records = sweep.by_point()[best]
    errors = [r.val_error for r in records]
    scores = ", ".join(str(r.raw_score) for r in records)
    typer.echo(
        f"clampbm: best: {_describe(best)} (mean validation error "
        f"{sum(errors) / len(errors):.6f}, raw scores {scores} of {sweep.test_size})"
    )


def _write_reports(sweep: SweepReport, csv_path: Path, json_path: Path) -> None:
    report.write_csv(sweep, csv_path)
    report.write_json(sweep, json_path)
    typer.echo(f"clampbm: wrote {len(sweep.records)} records to {csv_path} and {json_path}")


@app.callback()
def main(
    verbose: int = typer.Option(
        0, "--verbose", "-v", count=True, help="-v for progress logs, -vv for training detail."
    ),
) -> None:
    """Clamped RBM classification of gene expression data with pluggable samplers."""
    logging.basicConfig(
        level=_LOG_LEVELS[min(verbose, len(_LOG_LEVELS) - 1)],
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


@app.command()
def synth(
    matrix: Path = typer.Option(Path("expression.csv"), help="Expression matrix to write."),
    labels: Path = typer.Option(Path("labels.csv"), help="Label file to write."),
    n_patients: int = typer.Option(104, help="Number of patients."),
    n_genes: int = typer.Option(20_000, help="Number of genes."),
    n_informative: int = typer.Option(10, help="Genes whose mean differs by class."),
    separation: float = typer.Option(3.0, help="Class mean shift in standard deviations."),
    balance: float = typer.Option(0.5, help="Fraction of class-1 patients."),
    seed: int = typer.Option(0, help="Generator seed."),
) -> None:
    """Write a synthetic two-class expression dataset."""
    with _reported_errors():
        spec = SyntheticSpec(n_patients, n_genes, n_informative, separation, balance, seed)
        dataset = data.generate_synthetic(spec)
        data.save_expression_csv(dataset, matrix, labels)
    counts = np.bincount(dataset.labels, minlength=2)
    classes = ", ".join(
        f"{count} {name}" for count, name in zip(counts, dataset.class_names, strict=True)
    )
    typer.echo(
        f"clampbm: wrote {dataset.n_patients} patients x {dataset.n_genes} genes "
        f"({classes}) to {matrix} and {labels}"
    )


@app.command()
def features(
    matrix: Path = typer.Option(..., help="Expression matrix file."),
    labels: Path = typer.Option(..., help="Label file."),
    k: int = typer.Option(10, "--k", help="Number of top-scoring genes to keep."),
    out: Path = typer.Option(Path("reduced.csv"), help="Reduced matrix to write."),
    scores: Path = typer.Option(Path("scores.csv"), help="Ranked Fisher score table to write."),
) -> None:
    """Rank genes by Fisher score and keep the top k."""
    with _reported_errors():
        dataset = data.load_expression_csv(matrix, labels)
        ranked = fisher_score(dataset)
        keep = select_top_k(ranked, k)
        data.save_matrix(dataset.select_genes(keep), out)
        order = list(ranked.ranking)
        table = pd.DataFrame(
            {
                "rank": range(1, len(order) + 1),
                "gene": [dataset.gene_ids[i] for i in order],
                "column": order,
                "score": ranked.scores[order],
            }
        )
        table.to_csv(scores, index=False, lineterminator="\n")
    top = ", ".join(dataset.gene_ids[i] for i in keep[:5])
    more = ", ..." if k > 5 else ""
    typer.echo(f"clampbm: kept {k} of {dataset.n_genes} genes ({top}{more}) in {out}")
    typer.echo(f"clampbm: wrote ranked scores to {scores}")


def _load_selected(
    matrix: Path, labels: Path, k: int | None
) -> tuple[ExpressionDataset, FeatureSelection]:
    dataset = data.load_expression_csv(matrix, labels)
    if k is None:
        selection = FeatureSelection(tuple(range(dataset.n_genes)), dataset.gene_ids)
    else:
        selection = select_features(dataset, k)
    return dataset, selection


@app.command()
def sweep(
    matrix: Path = typer.Option(..., help="Expression matrix file (already reduced unless --k)."),
    labels: Path = typer.Option(..., help="Label file."),
    config: Path | None = typer.Option(
        None, help="TOML file with a [tool.clampbm.sweep] table; flags override it."
    ),
    lr: list[float] | None = typer.Option(None, "--lr", help="Learning rate (repeatable)."),
    hidden: list[int] | None = typer.Option(None, "--hidden", help="Hidden units (repeatable)."),
    samples: list[int] | None = typer.Option(
        None, "--samples", help="Negative-phase samples per update (repeatable)."
    ),
    sampler: SamplerKind | None = typer.Option(None, help="Negative-phase sampler."),
    seed: int | None = typer.Option(None, help="Master seed."),
    sizes: tuple[int, int, int] | None = typer.Option(
        None, help="Train, validation and test patient counts."
    ),
    replicas: int | None = typer.Option(None, help="Binary replicas per patient."),
    epochs: int | None = typer.Option(None, help="Training epochs per run."),
    repetitions: int | None = typer.Option(None, help="Runs per grid point."),
    jobs: int | None = typer.Option(None, help="Grid points trained in parallel."),
    k: int | None = typer.Option(None, "--k", help="Select the top k genes before splitting."),
    checkpoint_dir: Path | None = typer.Option(
        None, help="Directory of per-grid-point checkpoints; finished points are reused."
    ),
    csv: Path = typer.Option(Path("sweep.csv"), help="Record table to write."),
    json: Path = typer.Option(Path("sweep.json"), help="Summary to write."),
) -> None:
    """Train and score every grid point, three times each, and report the best."""
    with _reported_errors():
        file_values = storage.read_sweep_file(config) if config is not None else {}
        settings = storage.resolve_run_config(
            file_values,
            {
                "learning_rates": tuple(lr) if lr else None,
                "hidden_units": tuple(hidden) if hidden else None,
                "sample_counts": tuple(samples) if samples else None,
                "sampler": sampler.value if sampler else None,
                "seed": seed,
                "sizes": sizes,
                "n_replicas": replicas,
                "n_epochs": epochs,
                "repetitions": repetitions,
                "jobs": jobs,
                "k": k,
            },
        )
        dataset, selection = _load_selected(matrix, labels, settings.k)
        dataset = dataset.select_genes(list(selection.indices))
        total = len(settings.grid) * settings.repetitions
        typer.echo(
            f"clampbm: {len(settings.grid)} grid points x {settings.repetitions} "
            f"repetitions = {total} runs planned"
        )
        done = 0

        def progress(record: RunRecord) -> None:
            nonlocal done
            done += 1
            typer.echo(
                f"clampbm: [{done}/{total}] {_describe(record.point)} rep={record.repetition} "
                f"val_error={record.val_error:.6f} raw_score={record.raw_score}"
            )

        result = pipeline.run_grid(
            dataset,
            settings.grid,
            make_sampler(settings.sampler),
            settings.seed,
            sizes=settings.sizes,
            n_replicas=settings.n_replicas,
            n_epochs=settings.n_epochs,
            repetitions=settings.repetitions,
            jobs=settings.jobs,
            checkpoint_dir=checkpoint_dir,
            progress=progress,
        )
        _write_reports(result, csv, json)
    _print_best(result)


@app.command()
def train(
    matrix: Path = typer.Option(..., help="Expression matrix file."),
    labels: Path = typer.Option(..., help="Label file."),
    out: Path = typer.Option(Path("model.json"), help="Model artifact to write."),
    lr: float = typer.Option(0.75, "--lr", help="Learning rate."),
    hidden: int = typer.Option(3, "--hidden", help="Hidden units."),
    samples: int = typer.Option(1024, "--samples", help="Negative-phase samples per update."),
    sampler: SamplerKind = typer.Option(SamplerKind.GIBBS, help="Negative-phase sampler."),
    seed: int = typer.Option(0, help="Master seed."),
    sizes: tuple[int, int, int] = typer.Option(
        (80, 10, 14), help="Train, validation and test patient counts."
    ),
    replicas: int = typer.Option(1000, help="Binary replicas per patient."),
    epochs: int = typer.Option(20, help="Training epochs."),
    k: int | None = typer.Option(None, "--k", help="Select the top k genes first."),
) -> None:
    """Train one model at one grid point and write the model artifact."""
    with _reported_errors():
        dataset, selection = _load_selected(matrix, labels, k)
        point = GridPoint(lr, hidden, samples)
        model, record = pipeline.train_model(
            dataset,
            selection,
            point,
            make_sampler(sampler),
            seed,
            sizes=sizes,
            n_replicas=replicas,
            n_epochs=epochs,
        )
        storage.save_model(out, model)
    typer.echo(
        f"clampbm: trained {_describe(point)}: validation error {record.val_error:.6f}, "
        f"raw score {record.raw_score} of {sizes[2]}"
    )
    typer.echo(f"clampbm: model written to {out}")


def _feature_columns(
    model_genes: tuple[str, ...], columns: tuple[str, ...], values: FloatArray
) -> FloatArray:
    """The model's features from a vector file, by gene id or by position."""
    position = {name: index for index, name in enumerate(columns)}
    if all(gene in position for gene in model_genes):
        return values[:, [position[gene] for gene in model_genes]]
    if len(columns) == len(model_genes):
        return values
    raise InvalidInputError(
        f"expected {len(model_genes)} feature values ({', '.join(model_genes)}), "
        f"got {len(columns)}"
    )


@app.command()
def classify(
    model: Path = typer.Option(..., help="Model artifact written by 'clampbm train'."),
    vectors: Path = typer.Option(..., help="Matrix file of patients to classify."),
) -> None:
    """Predict each patient's class with the neutral clamp."""
    with _reported_errors():
        trained = storage.load_model(model)
        patients, columns, values = data.load_patient_vectors(vectors)
        selected = _feature_columns(trained.selection.gene_ids, columns, values)
        predictions = [trained.predict(row) for row in selected]
    for patient, (label, probabilities) in zip(patients, predictions, strict=True):
        clamp = ", ".join(f"{p:.6f}" for p in probabilities)
        typer.echo(f"clampbm: {patient}: {trained.class_names[label]} (clamp {clamp})")


@app.command("report")
def report_command(
    checkpoint_dir: Path = typer.Option(..., help="Checkpoint directory of a finished sweep."),
    csv: Path = typer.Option(Path("sweep.csv"), help="Record table to write."),
    json: Path = typer.Option(Path("sweep.json"), help="Summary to write."),
) -> None:
    """Rebuild the CSV and JSON reports from sweep checkpoints."""
    with _reported_errors():
        result = pipeline.load_report(checkpoint_dir)
        _write_reports(result, csv, json)
    _print_best(result)
