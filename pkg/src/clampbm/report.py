"""Sweep reports: the full record table as CSV and a JSON summary.

The summary's ``frequency_tables`` hold, per learning rate, how many runs
reached each raw score from 0 to the test-set size; these are the series of
a raw-score histogram grouped by learning rate. Mean raw scores per sample
count and per hidden-unit count show how accuracy moves along those axes.
"""

from __future__ import annotations

import enum
import json
import math
from collections.abc import Callable
from pathlib import Path
from typing import Any

import pandas as pd

from clampbm.models import GridPoint, SweepReport

CSV_COLUMNS = ("lr", "n_hidden", "n_samples", "rep", "val_error", "raw_score")


class ReportFormat(enum.StrEnum):
    CSV = "csv"
    JSON = "json"


def _nan_to_none(value: float) -> float | None:
    return None if math.isnan(value) else value


def records_frame(report: SweepReport) -> pd.DataFrame:
    rows = [
        (
            record.point.learning_rate,
            record.point.n_hidden,
            record.point.n_samples,
            record.repetition,
            record.val_error,
            record.raw_score,
        )
        for record in report.records
    ]
    return pd.DataFrame(rows, columns=list(CSV_COLUMNS))


def frequency_tables(report: SweepReport) -> dict[str, list[int]]:
    """Per learning rate, run counts indexed by raw score ``0..test_size``."""
    tables = {repr(lr): [0] * (report.test_size + 1) for lr in report.grid.learning_rates}
    for record in report.records:
        tables[repr(record.point.learning_rate)][record.raw_score] += 1
    return tables


def _mean_raw_score(report: SweepReport, key: Callable[[GridPoint], object]) -> dict[str, float]:
    groups: dict[str, list[int]] = {}
    for record in report.records:
        groups.setdefault(str(key(record.point)), []).append(record.raw_score)
    return {name: math.fsum(scores) / len(scores) for name, scores in groups.items()}


def mean_raw_score_by_samples(report: SweepReport) -> dict[str, float]:
    return _mean_raw_score(report, lambda point: point.n_samples)


def mean_raw_score_by_hidden(report: SweepReport) -> dict[str, float]:
    return _mean_raw_score(report, lambda point: point.n_hidden)


def summary(report: SweepReport) -> dict[str, Any]:
    points = []
    for point, records in report.by_point().items():
        errors = [r.val_error for r in records]
        points.append(
            {
                "lr": point.learning_rate,
                "n_hidden": point.n_hidden,
                "n_samples": point.n_samples,
                "mean_val_error": _nan_to_none(math.fsum(errors) / len(errors)),
                "raw_scores": [r.raw_score for r in records],
            }
        )
    return {
        "seed": report.seed,
        "test_size": report.test_size,
        "repetitions": report.repetitions,
        "n_runs": len(report.records),
        "grid": {
            "learning_rates": list(report.grid.learning_rates),
            "hidden_units": list(report.grid.hidden_units),
            "sample_counts": list(report.grid.sample_counts),
        },
        "points": points,
        "frequency_tables": frequency_tables(report),
        "mean_raw_score_by_samples": mean_raw_score_by_samples(report),
        "mean_raw_score_by_hidden": mean_raw_score_by_hidden(report),
    }


def emit_report(report: SweepReport, fmt: ReportFormat | str) -> str:
    """Render ``report`` as CSV records or the JSON summary."""
    fmt = ReportFormat(fmt)
    if fmt is ReportFormat.CSV:
        return str(records_frame(report).to_csv(index=False, lineterminator="\n"))
    return json.dumps(summary(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_csv(report: SweepReport, path: Path) -> None:
    Path(path).write_text(emit_report(report, ReportFormat.CSV), encoding="utf-8")


def write_json(report: SweepReport, path: Path) -> None:
    Path(path).write_text(emit_report(report, ReportFormat.JSON), encoding="utf-8")
