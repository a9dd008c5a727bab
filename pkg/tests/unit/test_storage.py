"""Sweep configuration, checkpoint files and the model artifact."""

import dataclasses
import json
import math

import numpy as np
import pytest
import tomlkit

from clampbm.features import FeatureSelection, fit_normalizer
from clampbm.models import DEFAULT_CLASS_NAMES, GridPoint, HyperparameterGrid, RunRecord
from clampbm.rbm import ClampSpec, Hyperparameters, TrainedModel
from clampbm.storage import (
    ArtifactError,
    Checkpoint,
    ConfigError,
    RunConfig,
    load_model,
    model_from_dict,
    model_to_dict,
    read_checkpoint,
    read_checkpoints,
    read_sweep_file,
    read_sweep_table,
    resolve_run_config,
    save_model,
    write_checkpoint,
)
from tests.conftest import random_params

SWEEP_TOML = """\
[project]
name = "lung-study"

[tool.clampbm.sweep]
learning_rates = [0.75]
hidden_units = [3]
sample_counts = [256, 1024]
sampler = "sa-chimera"
seed = 7
sizes = [80, 10, 14]
"""


def sample_model() -> TrainedModel:
    return TrainedModel(
        params=random_params(5, 2, 3),
        normalizer=fit_normalizer(np.array([[0.0, 1.0, 2.0], [4.0, 5.0, 2.0]])),
        selection=FeatureSelection((7, 0, 3), ("G00008", "G00001", "G00004")),
        clamp=ClampSpec(),
        hyper=Hyperparameters(learning_rate=0.75, n_hidden=2, n_samples=1024, seed=9),
        class_names=DEFAULT_CLASS_NAMES,
    )


class TestSweepConfig:
    def test_reads_the_tool_table(self, tmp_path):
        path = tmp_path / "pyproject.toml"
        path.write_text(SWEEP_TOML)
        values = read_sweep_file(path)
        assert values == {
            "learning_rates": (0.75,),
            "hidden_units": (3,),
            "sample_counts": (256, 1024),
            "sampler": "sa-chimera",
            "seed": 7,
            "sizes": (80, 10, 14),
        }

    def test_missing_table_is_empty(self):
        assert read_sweep_table(tomlkit.parse('[project]\nname = "x"\n')) == {}

    def test_integer_learning_rates_are_accepted(self):
        doc = tomlkit.parse("[tool.clampbm.sweep]\nlearning_rates = [1, 0.5]\n")
        assert read_sweep_table(doc) == {"learning_rates": (1.0, 0.5)}

    @pytest.mark.parametrize(
        ("line", "message"),
        [
            ('hidden_units = ["three"]', "list of integers"),
            ("sizes = [80, 24]", "three integers"),
            ("seed = 1.5", "must be an integer"),
            ("sampler = 3", "must be a string"),
            ("temperature = 2", "unknown key"),
            ("jobs = true", "must be an integer"),
        ],
    )
    def test_malformed_values(self, line, message):
        doc = tomlkit.parse(f"[tool.clampbm.sweep]\n{line}\n")
        with pytest.raises(ConfigError, match=message):
            read_sweep_table(doc)

    def test_unparseable_file(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[tool.clampbm.sweep\n")
        with pytest.raises(ConfigError, match="broken.toml"):
            read_sweep_file(path)


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig()
        assert len(config.grid) == 180
        assert len(config.grid) * config.repetitions == 540
        assert config.sampler == "gibbs"
        assert config.sizes == (80, 10, 14)
        assert config.n_replicas == 1000

    def test_flags_override_the_file(self):
        config = resolve_run_config(
            {"seed": 7, "sampler": "exact", "repetitions": 2},
            {"seed": 11, "sampler": None, "jobs": 4},
        )
        assert config.seed == 11
        assert config.sampler == "exact"
        assert config.repetitions == 2
        assert config.jobs == 4

    @pytest.mark.parametrize(
        "overrides",
        [
            {"sampler": "quantum"},
            {"learning_rates": (0.5, 0.5)},
            {"hidden_units": ()},
            {"repetitions": 0},
            {"sizes": (80, -1, 14)},
            {"k": 0},
        ],
    )
    def test_invalid_settings(self, overrides):
        with pytest.raises(ConfigError):
            resolve_run_config({}, overrides)


class TestCheckpoints:
    POINT = GridPoint(0.75, 3, 1024)

    def checkpoint(self, *errors: float) -> Checkpoint:
        records = tuple(RunRecord(self.POINT, rep, e, 13) for rep, e in enumerate(errors))
        return Checkpoint("sha256:abc", 5, 14, self.POINT, records)

    def test_round_trip(self, tmp_path):
        path = write_checkpoint(tmp_path, self.checkpoint(0.25, 0.5, 0.125))
        assert path.name == "lr-0.75_hidden-3_samples-1024.toml"
        assert read_checkpoint(path) == self.checkpoint(0.25, 0.5, 0.125)
        assert not list(tmp_path.glob("*.partial"))

    def test_grid_axes_keep_their_order(self, tmp_path):
        grid = HyperparameterGrid((1.25, 0.75), (3, 1), (1024, 256))
        checkpoint = dataclasses.replace(self.checkpoint(0.25), grid=grid)
        path = write_checkpoint(tmp_path, checkpoint)
        assert read_checkpoint(path).grid == grid
        assert read_checkpoint(write_checkpoint(tmp_path, self.checkpoint(0.25))).grid is None

    def test_missing_validation_error_survives(self, tmp_path):
        path = write_checkpoint(tmp_path, self.checkpoint(math.nan))
        assert math.isnan(read_checkpoint(path).records[0].val_error)

    def test_directory_listing(self, tmp_path):
        write_checkpoint(tmp_path, self.checkpoint(0.1))
        (tmp_path / "notes.txt").write_text("ignored")
        assert [c.point for c in read_checkpoints(tmp_path)] == [self.POINT]

    def test_unreadable_checkpoint(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text('fingerprint = "x"\n')
        with pytest.raises(ConfigError, match="unreadable checkpoint"):
            read_checkpoint(path)


class TestModelArtifact:
    def test_round_trip_keeps_predictions(self, tmp_path):
        model = sample_model()
        path = tmp_path / "model.json"
        save_model(path, model)
        loaded = load_model(path)
        assert loaded.params == model.params
        assert loaded.selection == model.selection
        assert loaded.hyper == model.hyper
        assert loaded.class_names == model.class_names
        vector = np.array([1.0, 3.0, 2.0])
        assert loaded.predict(vector)[0] == model.predict(vector)[0]
        assert loaded.predict(vector)[1] == pytest.approx(model.predict(vector)[1])

    def test_json_layout(self, tmp_path):
        path = tmp_path / "model.json"
        save_model(path, sample_model())
        text = path.read_text()
        data = json.loads(text)
        assert text.endswith("\n")
        assert data["format"] == "clampbm-model"
        assert data["format_version"] == "1.0"
        assert data["gene_ids"] == ["G00008", "G00001", "G00004"]
        assert np.array(data["parameters"]["weights"]).shape == (5, 2)

    def test_newer_minor_version_is_readable(self):
        data = model_to_dict(sample_model())
        data["format_version"] = "1.3"
        assert model_from_dict(data).params.n_visible == 5

    def test_other_major_version_is_refused(self):
        data = model_to_dict(sample_model())
        data["format_version"] = "2.0"
        with pytest.raises(ArtifactError, match="supports 1.x"):
            model_from_dict(data)

    def test_wrong_format(self):
        data = model_to_dict(sample_model())
        data["format"] = "something-else"
        with pytest.raises(ArtifactError, match="not a clampbm-model artifact"):
            model_from_dict(data)

    def test_inconsistent_shapes(self):
        data = model_to_dict(sample_model())
        data["parameters"]["weights"] = [[0.0, 0.0]] * 4
        with pytest.raises(ArtifactError, match="inconsistent"):
            model_from_dict(data)

    def test_missing_field(self):
        data = model_to_dict(sample_model())
        del data["normalizer"]
        with pytest.raises(ArtifactError):
            model_from_dict(data)

    def test_not_json(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{not json")
        with pytest.raises(ArtifactError, match="not valid JSON"):
            load_model(path)
