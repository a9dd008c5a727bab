"""Shared fixtures: a throwaway workspace with small data files and a CLI runner."""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pytest
from typer.testing import CliRunner

from clampbm.cli import app
from clampbm.data import SyntheticSpec, generate_synthetic, save_expression_csv
from clampbm.models import ExpressionDataset, RbmParameters

# Small enough for the exact sampler: 4 features + 2 clamp units.
SMALL_SPEC = SyntheticSpec(
    n_patients=24, n_genes=12, n_informative=4, class_separation=4.0, seed=7
)
SMALL_SIZES = "16 4 4"


@dataclass
class Workspace:
    root: Path
    runner: CliRunner = field(default_factory=CliRunner)
    result: Any = None

    def path(self, name: str) -> Path:
        return self.root / name

    def write(self, name: str, text: str) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        return path

    def read(self, name: str) -> str:
        return self.path(name).read_text()

    def run(self, args: str) -> Any:
        self.result = self.runner.invoke(app, shlex.split(args))
        return self.result

    def write_dataset(
        self,
        dataset: ExpressionDataset,
        matrix: str = "expression.csv",
        labels: str = "labels.csv",
    ) -> None:
        save_expression_csv(dataset, self.path(matrix), self.path(labels))


def make_workspace(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Workspace:
    monkeypatch.chdir(tmp_path)
    return Workspace(root=tmp_path)


def random_params(
    n_visible: int, n_hidden: int, seed: int, scale: float = 1.0
) -> RbmParameters:
    rng = np.random.default_rng(seed)
    return RbmParameters(
        visible_bias=rng.normal(0.0, scale, n_visible),
        hidden_bias=rng.normal(0.0, scale, n_hidden),
        weights=rng.normal(0.0, scale, (n_visible, n_hidden)),
    )


@pytest.fixture
def workspace(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Workspace:
    return make_workspace(tmp_path, monkeypatch)


@pytest.fixture
def small_dataset() -> ExpressionDataset:
    return generate_synthetic(SMALL_SPEC)
