"""Sweep configuration, per-grid-point checkpoints and the model artifact.

Configuration and checkpoints are TOML, read and written with tomlkit so a
``[tool.clampbm.sweep]`` table can sit in a hand-edited ``pyproject.toml``
without disturbing the rest of the file. The model artifact is a single JSON
document; its ``format_version`` is compared by major version, so readers
accept any ``1.x`` artifact and refuse ``2.0``.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import tomlkit
from packaging.version import InvalidVersion, Version
from tomlkit import TOMLDocument
from tomlkit.exceptions import ParseError

from clampbm.features import FeatureSelection, NormalizationModel
from clampbm.models import (
    FloatArray,
    GridPoint,
    HyperparameterGrid,
    InvalidInputError,
    RbmParameters,
    RunRecord,
)
from clampbm.rbm import ClampSpec, Hyperparameters, TrainedModel
from clampbm.sampler import SamplerKind

ARTIFACT_FORMAT = "clampbm-model"
ARTIFACT_VERSION = "1.0"

_DEFAULT_GRID = HyperparameterGrid.default()


class ConfigError(Exception):
    """A malformed value in the ``[tool.clampbm.sweep]`` configuration."""


class ArtifactError(Exception):
    """A model artifact that is unreadable or written by an incompatible version."""


@dataclass(frozen=True)
class RunConfig:
    """Resolved sweep settings: built-in defaults, then the config file, then flags."""

    learning_rates: tuple[float, ...] = _DEFAULT_GRID.learning_rates
    hidden_units: tuple[int, ...] = _DEFAULT_GRID.hidden_units
    sample_counts: tuple[int, ...] = _DEFAULT_GRID.sample_counts
    sampler: str = SamplerKind.GIBBS.value
    seed: int = 0
    sizes: tuple[int, int, int] = (80, 10, 14)
    n_replicas: int = 1000
    n_epochs: int = 20
    repetitions: int = 3
    jobs: int = 1
    k: int | None = None
    grid: HyperparameterGrid = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "grid",
            HyperparameterGrid(self.learning_rates, self.hidden_units, self.sample_counts),
        )
        if not self.grid.points():
            raise InvalidInputError("the grid needs at least one value on every axis")
        try:
            SamplerKind(self.sampler)
        except ValueError:
            choices = ", ".join(kind.value for kind in SamplerKind)
            raise InvalidInputError(
                f"unknown sampler {self.sampler!r} (choose from {choices})"
            ) from None
        if len(self.sizes) != 3 or any(size < 0 for size in self.sizes):
            raise InvalidInputError("sizes must be three nonnegative counts (train, val, test)")
        for name in ("n_replicas", "n_epochs", "repetitions", "jobs"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be at least 1")
        if self.k is not None and self.k < 1:
            raise InvalidInputError("k must be at least 1")


_FLOAT_LISTS = ("learning_rates",)
_INT_LISTS = ("hidden_units", "sample_counts")
_INTS = ("seed", "n_replicas", "n_epochs", "repetitions", "jobs", "k")


def load(path: Path) -> TOMLDocument:
    return tomlkit.parse(Path(path).read_text(encoding="utf-8"))


def _is_int(value: object) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: object) -> bool:
    return _is_int(value) or isinstance(value, float)


def read_sweep_file(path: Path) -> dict[str, Any]:
    try:
        doc = load(path)
    except ParseError as error:
        raise ConfigError(f"{path}: {error}") from None
    return read_sweep_table(doc)


def read_sweep_table(doc: TOMLDocument) -> dict[str, Any]:
    """The validated ``[tool.clampbm.sweep]`` values, as RunConfig keyword arguments."""
    table = doc.get("tool", {}).get("clampbm", {}).get("sweep")
    if table is None:
        return {}
    raw = table.unwrap() if hasattr(table, "unwrap") else dict(table)
    values: dict[str, Any] = {}
    for key, value in raw.items():
        where = f"[tool.clampbm.sweep] {key}"
        if key in _FLOAT_LISTS:
            if not isinstance(value, list) or not all(_is_number(item) for item in value):
                raise ConfigError(f"{where} must be a list of numbers")
            values[key] = tuple(float(item) for item in value)
        elif key in _INT_LISTS:
            if not isinstance(value, list) or not all(_is_int(item) for item in value):
                raise ConfigError(f"{where} must be a list of integers")
            values[key] = tuple(int(item) for item in value)
        elif key == "sizes":
            if not isinstance(value, list) or len(value) != 3 or not all(map(_is_int, value)):
                raise ConfigError(f"{where} must be a list of three integers")
            values[key] = tuple(int(item) for item in value)
        elif key == "sampler":
            if not isinstance(value, str):
                raise ConfigError(f"{where} must be a string")
            values[key] = str(value)
        elif key in _INTS:
            if not _is_int(value):
                raise ConfigError(f"{where} must be an integer")
            values[key] = int(value)
        else:
            raise ConfigError(f"unknown key {where}")
    return values


def resolve_run_config(
    file_values: Mapping[str, Any], overrides: Mapping[str, Any]
) -> RunConfig:
    """Layer non-``None`` flag values over file values over defaults."""
    merged = dict(file_values)
    merged.update({key: value for key, value in overrides.items() if value is not None})
    try:
        return RunConfig(**merged)
    except InvalidInputError as error:
        raise ConfigError(str(error)) from None


# --- Checkpoints ------------------------------------------------------------


@dataclass(frozen=True)
class Checkpoint:
    """A finished grid point and the sweep inputs it was computed under."""

    fingerprint: str
    seed: int
    test_size: int
    point: GridPoint
    records: tuple[RunRecord, ...]
    grid: HyperparameterGrid | None = None


def checkpoint_path(directory: Path, point: GridPoint) -> Path:
    return Path(directory) / f"{point.label}.toml"


def write_checkpoint(directory: Path, checkpoint: Checkpoint) -> Path:
    """Write one grid point's records; the file appears only once complete."""
    point = checkpoint.point
    doc = tomlkit.document()
    doc["fingerprint"] = checkpoint.fingerprint
    doc["seed"] = checkpoint.seed
    doc["test_size"] = checkpoint.test_size
    doc["learning_rate"] = point.learning_rate
    doc["n_hidden"] = point.n_hidden
    doc["n_samples"] = point.n_samples
    if checkpoint.grid is not None:
        axes = tomlkit.table()
        axes["learning_rates"] = list(checkpoint.grid.learning_rates)
        axes["hidden_units"] = list(checkpoint.grid.hidden_units)
        axes["sample_counts"] = list(checkpoint.grid.sample_counts)
        doc["grid"] = axes
    runs = tomlkit.aot()
    for record in sorted(checkpoint.records, key=lambda r: r.repetition):
        run = tomlkit.table()
        run["repetition"] = record.repetition
        run["val_error"] = record.val_error
        run["raw_score"] = record.raw_score
        runs.append(run)
    doc["runs"] = runs

    path = checkpoint_path(directory, point)
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_suffix(".toml.partial")
    partial.write_text(tomlkit.dumps(doc), encoding="utf-8")
    partial.replace(path)
    return path


def read_checkpoint(path: Path) -> Checkpoint:
    """The fingerprint and records stored in one checkpoint file."""
    try:
        data = load(path).unwrap()
        point = GridPoint(
            float(data["learning_rate"]), int(data["n_hidden"]), int(data["n_samples"])
        )
        records = [
            RunRecord(
                point=point,
                repetition=int(run["repetition"]),
                val_error=float(run["val_error"]),
                raw_score=int(run["raw_score"]),
            )
            for run in data.get("runs", [])
        ]
        axes = data.get("grid")
        grid = (
            HyperparameterGrid(
                tuple(axes["learning_rates"]),
                tuple(axes["hidden_units"]),
                tuple(axes["sample_counts"]),
            )
            if axes is not None
            else None
        )
        return Checkpoint(
            fingerprint=str(data["fingerprint"]),
            seed=int(data["seed"]),
            test_size=int(data["test_size"]),
            point=point,
            records=tuple(records),
            grid=grid,
        )
    except (KeyError, TypeError, ValueError, ParseError) as error:
        raise ConfigError(f"{path}: unreadable checkpoint ({error})") from None


def read_checkpoints(directory: Path) -> list[Checkpoint]:
    return [read_checkpoint(path) for path in sorted(Path(directory).glob("*.toml"))]


# --- Model artifact -----------------------------------------------------------


def _float_list(values: FloatArray) -> Any:
    return np.asarray(values, dtype=np.float64).tolist()


def model_to_dict(model: TrainedModel) -> dict[str, Any]:
    return {
        "format": ARTIFACT_FORMAT,
        "format_version": ARTIFACT_VERSION,
        "class_names": list(model.class_names),
        "gene_ids": list(model.selection.gene_ids),
        "feature_indices": list(model.selection.indices),
        "normalizer": {
            "minimum": _float_list(model.normalizer.minimum),
            "maximum": _float_list(model.normalizer.maximum),
        },
        "clamp": {"n_classes": model.clamp.n_classes},
        "hyperparameters": {
            "learning_rate": model.hyper.learning_rate,
            "n_hidden": model.hyper.n_hidden,
            "n_samples": model.hyper.n_samples,
            "n_epochs": model.hyper.n_epochs,
            "seed": model.hyper.seed,
        },
        "parameters": {
            "visible_bias": _float_list(model.params.visible_bias),
            "hidden_bias": _float_list(model.params.hidden_bias),
            "weights": _float_list(model.params.weights),
        },
    }


def save_model(path: Path, model: TrainedModel) -> None:
    text = json.dumps(model_to_dict(model), sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _check_format(data: Mapping[str, Any]) -> None:
    if data.get("format") != ARTIFACT_FORMAT:
        raise ArtifactError(f"not a {ARTIFACT_FORMAT} artifact")
    try:
        version = Version(str(data.get("format_version")))
    except InvalidVersion:
        raise ArtifactError(f"invalid format_version {data.get('format_version')!r}") from None
    supported = Version(ARTIFACT_VERSION)
    if version.major != supported.major:
        raise ArtifactError(
            f"artifact format {version} is not readable by this version "
            f"(supports {supported.major}.x)"
        )


def model_from_dict(data: Mapping[str, Any]) -> TrainedModel:
    _check_format(data)
    try:
        hyper = data["hyperparameters"]
        params = data["parameters"]
        return TrainedModel(
            params=RbmParameters(
                visible_bias=np.asarray(params["visible_bias"], dtype=np.float64),
                hidden_bias=np.asarray(params["hidden_bias"], dtype=np.float64),
                weights=np.asarray(params["weights"], dtype=np.float64),
            ),
            normalizer=NormalizationModel(
                minimum=np.asarray(data["normalizer"]["minimum"], dtype=np.float64),
                maximum=np.asarray(data["normalizer"]["maximum"], dtype=np.float64),
            ),
            selection=FeatureSelection(
                indices=tuple(int(i) for i in data["feature_indices"]),
                gene_ids=tuple(str(g) for g in data["gene_ids"]),
            ),
            clamp=ClampSpec(int(data["clamp"]["n_classes"])),
            hyper=Hyperparameters(
                learning_rate=float(hyper["learning_rate"]),
                n_hidden=int(hyper["n_hidden"]),
                n_samples=int(hyper["n_samples"]),
                n_epochs=int(hyper["n_epochs"]),
                seed=int(hyper["seed"]),
            ),
            class_names=tuple(str(name) for name in data["class_names"]),
        )
    except (KeyError, TypeError, ValueError) as error:
        # InvalidInputError is a ValueError: inconsistent shapes land here too.
        raise ArtifactError(f"inconsistent model artifact: {error}") from None


def load_model(path: Path) -> TrainedModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as error:
        raise ArtifactError(f"{path}: not valid JSON ({error.msg}, line {error.lineno})") from None
    if not isinstance(data, dict):
        raise ArtifactError(f"{path}: expected a JSON object")
    return model_from_dict(data)

