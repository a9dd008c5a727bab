"""Expression matrix ingestion and the synthetic stand-in dataset.

Matrix files are delimited tables (comma or tab, detected from the first
line): the first row holds gene identifiers after a corner cell, the first
column holds patient identifiers, and every other cell is a number::

    patient,TP53,EGFR,KRT5
    P0001,7.25,3.5,1.125
    P0002,6.0,4.75,9.5

Label files map patients to class names (``patient,class`` header). Class
names become indices either through an explicit list or alphabetically, so
"Adenocarcinoma" is 0 and "Squamous cell carcinoma" is 1 either way.
Missing values are a hard error; nothing is imputed.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from numpy.typing import NDArray

from clampbm.models import DEFAULT_CLASS_NAMES, ExpressionDataset, FloatArray, InvalidInputError


class DataFormatError(InvalidInputError):
    """A malformed expression or label file; the message carries the location."""


@dataclass(frozen=True)
class SyntheticSpec:
    """Two-class expression data with ``n_informative`` shifted genes.

    Informative genes are the first ``n_informative`` columns; in class 1
    their mean moves by ``class_separation`` within-class standard
    deviations (direction drawn per gene). ``class_balance`` is the fraction
    of class-1 patients.
    """

    n_patients: int = 104
    n_genes: int = 20_000
    n_informative: int = 10
    class_separation: float = 3.0
    class_balance: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_patients < 1 or self.n_genes < 1:
            raise InvalidInputError("n_patients and n_genes must be positive")
        if not 0 <= self.n_informative <= self.n_genes:
            raise InvalidInputError("n_informative must be between 0 and n_genes")
        if self.class_separation < 0:
            raise InvalidInputError("class_separation must be nonnegative")
        if not 0 < self.class_balance < 1:
            raise InvalidInputError("class_balance must lie strictly between 0 and 1")


def _sniff_delimiter(path: Path) -> str:
    with path.open(encoding="utf-8-sig") as handle:
        first = handle.readline()
    return "\t" if "\t" in first else ","


def _read_table(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(
            path,
            sep=_sniff_delimiter(path),
            header=None,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            encoding="utf-8-sig",
        )
    except pd.errors.EmptyDataError:
        raise DataFormatError(f"{path}: file is empty") from None
    except pd.errors.ParserError as error:
        raise DataFormatError(f"{path}: {error}") from None


def _require_unique(names: Sequence[str], what: str, path: Path) -> None:
    seen: set[str] = set()
    for name in names:
        if name in seen:
            raise DataFormatError(f"{path}: duplicate {what} {name!r}")
        seen.add(name)


def _parse_body(path: Path, cells: NDArray[np.str_], genes: Sequence[str]) -> FloatArray:
    try:
        values: FloatArray = cells.astype(np.float64)
    except ValueError:
        pass
    else:
        if np.isfinite(values).all():
            return values
    for row, col in np.ndindex(cells.shape):
        location = f"{path}: line {row + 2}, column {col + 2} ({genes[col]})"
        text = str(cells[row, col]).strip()
        if text == "":
            raise DataFormatError(f"{location}: missing value")
        try:
            number = float(text)
        except ValueError:
            raise DataFormatError(f"{location}: non-numeric value {text!r}") from None
        if not math.isfinite(number):
            raise DataFormatError(f"{location}: non-finite value {text!r}")
    raise DataFormatError(f"{path}: unreadable numeric body")


def load_patient_vectors(path: Path) -> tuple[tuple[str, ...], tuple[str, ...], FloatArray]:
    """Patient ids, column headers and values of an unlabelled matrix file."""
    matrix = _read_table(Path(path))
    if matrix.shape[0] < 2 or matrix.shape[1] < 2:
        raise DataFormatError(f"{path}: need a header row, an id column and data")
    columns = [str(g).strip() for g in matrix.iloc[0, 1:]]
    patients = [str(p).strip() for p in matrix.iloc[1:, 0]]
    _require_unique(patients, "patient identifier", Path(path))
    values = _parse_body(Path(path), matrix.iloc[1:, 1:].to_numpy(dtype=str), columns)
    return tuple(patients), tuple(columns), values


def load_expression_csv(
    matrix_path: Path,
    labels_path: Path,
    class_names: Sequence[str] | None = None,
) -> ExpressionDataset:
    """Read a matrix and its labels; rows follow the labels file order."""
    matrix = _read_table(Path(matrix_path))
    if matrix.shape[0] < 2 or matrix.shape[1] < 2:
        raise DataFormatError(f"{matrix_path}: need a header row, an id column and data")
    genes = [str(g).strip() for g in matrix.iloc[0, 1:]]
    patients = [str(p).strip() for p in matrix.iloc[1:, 0]]
    _require_unique(genes, "gene identifier", Path(matrix_path))
    _require_unique(patients, "patient identifier", Path(matrix_path))
    values = _parse_body(Path(matrix_path), matrix.iloc[1:, 1:].to_numpy(dtype=str), genes)

    table = _read_table(Path(labels_path))
    if table.shape[1] < 2:
        raise DataFormatError(f"{labels_path}: expected two columns (patient, class)")
    labelled = [str(p).strip() for p in table.iloc[1:, 0]]
    names = [str(c).strip() for c in table.iloc[1:, 1]]
    _require_unique(labelled, "patient identifier", Path(labels_path))

    row_of = {patient: index for index, patient in enumerate(patients)}
    for patient in labelled:
        if patient not in row_of:
            raise DataFormatError(f"{labels_path}: patient {patient!r} is not in {matrix_path}")
    unlabelled = sorted(set(patients) - set(labelled))
    if unlabelled:
        raise DataFormatError(f"{matrix_path}: patient {unlabelled[0]!r} has no label")

    mapping = list(class_names) if class_names is not None else sorted(set(names))
    if len(mapping) > 2:
        raise DataFormatError(f"{labels_path}: expected two classes, found {len(mapping)}")
    index_of = {name: index for index, name in enumerate(mapping)}
    for patient, name in zip(labelled, names, strict=True):
        if name not in index_of:
            raise DataFormatError(f"{labels_path}: patient {patient!r} has unknown class {name!r}")

    order = [row_of[patient] for patient in labelled]
    return ExpressionDataset(
        values=values[order],
        gene_ids=tuple(genes),
        labels=np.array([index_of[name] for name in names], dtype=np.int64),
        patient_ids=tuple(labelled),
        class_names=tuple(mapping),
    )


def save_matrix(dataset: ExpressionDataset, matrix_path: Path) -> None:
    frame = pd.DataFrame(
        dataset.values, index=list(dataset.patient_ids), columns=list(dataset.gene_ids)
    )
    frame.to_csv(matrix_path, index_label="patient", lineterminator="\n")


def save_labels(dataset: ExpressionDataset, labels_path: Path) -> None:
    labels = pd.DataFrame(
        {
            "patient": list(dataset.patient_ids),
            "class": [dataset.class_names[int(label)] for label in dataset.labels],
        }
    )
    labels.to_csv(labels_path, index=False, lineterminator="\n")


def save_expression_csv(dataset: ExpressionDataset, matrix_path: Path, labels_path: Path) -> None:
    """Write the two files :func:`load_expression_csv` reads back exactly."""
    save_matrix(dataset, matrix_path)
    save_labels(dataset, labels_path)


def generate_synthetic(spec: SyntheticSpec) -> ExpressionDataset:
    rng = np.random.default_rng(spec.seed)
    n_class1 = math.floor(spec.n_patients * spec.class_balance + 0.5)
    labels = np.array([0] * (spec.n_patients - n_class1) + [1] * n_class1, dtype=np.int64)
    rng.shuffle(labels)

    means = rng.uniform(4.0, 12.0, size=spec.n_genes)
    spreads = rng.uniform(0.5, 2.0, size=spec.n_genes)
    values = means + spreads * rng.standard_normal((spec.n_patients, spec.n_genes))
    informative = slice(0, spec.n_informative)
    direction = rng.choice([-1.0, 1.0], size=spec.n_informative)
    shift = direction * spec.class_separation * spreads[informative]
    values[labels == 1, informative] += shift

    return ExpressionDataset(
        values=values,
        gene_ids=tuple(f"G{index + 1:05d}" for index in range(spec.n_genes)),
        labels=labels,
        patient_ids=tuple(f"P{index + 1:04d}" for index in range(spec.n_patients)),
        class_names=DEFAULT_CLASS_NAMES,
    )
