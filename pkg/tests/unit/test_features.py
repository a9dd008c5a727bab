"""Fisher scoring, top-k selection, min-max normalization and exact-count binarization."""

import math

import numpy as np
import pytest

from clampbm.features import (
    FeatureScores,
    apply_normalizer,
    binarize_patient,
    fisher_score,
    fit_normalizer,
    ones_count,
    select_features,
    select_top_k,
)
from clampbm.models import ClampMode, ExpressionDataset, InvalidInputError


def dataset(values, labels) -> ExpressionDataset:
    values = np.asarray(values, dtype=np.float64)
    return ExpressionDataset(
        values=values,
        gene_ids=tuple(f"G{i}" for i in range(values.shape[1])),
        labels=np.asarray(labels),
    )


class TestFisherScore:
    def test_zero_variance_separator_scores_infinite(self):
        scores = fisher_score(dataset([[0.0], [0.0], [1.0], [1.0]], [0, 0, 1, 1]))
        assert scores.scores[0] == math.inf

    def test_identical_distributions_score_zero(self):
        scores = fisher_score(dataset([[1.0], [2.0], [1.0], [2.0]], [0, 0, 1, 1]))
        assert scores.scores[0] == 0.0

    def test_constant_gene_scores_zero(self):
        scores = fisher_score(dataset([[5.0], [5.0], [5.0], [5.0]], [0, 0, 1, 1]))
        assert scores.scores[0] == 0.0

    def test_hand_computed_scores(self):
        values = [
            [1.0, 4.0, 2.0],
            [3.0, 6.0, 2.0],
            [5.0, 5.0, 3.0],
            [9.0, 7.0, 1.0],
        ]
        scores = fisher_score(dataset(values, [0, 0, 1, 1]))
        # gene 0: means 2 and 7, population variances 1 and 4 -> 25 / 5
        # gene 1: means 5 and 6, variances 1 and 1 -> 1 / 2
        # gene 2: means 2 and 2 -> 0
        assert scores.scores == pytest.approx([5.0, 0.5, 0.0])
        assert scores.ranking == (0, 1, 2)

    def test_ties_keep_ascending_index_order(self):
        values = [[0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0]]
        scores = fisher_score(dataset(values, [0, 0, 1, 1]))
        assert scores.ranking == (0, 2, 1)

    def test_needs_two_patients_per_class(self):
        with pytest.raises(InvalidInputError, match="at least 2"):
            fisher_score(dataset([[1.0], [2.0], [3.0]], [0, 0, 1]))

    def test_ranking_is_non_increasing(self):
        rng = np.random.default_rng(3)
        scores = fisher_score(dataset(rng.normal(size=(20, 30)), [0] * 10 + [1] * 10))
        ordered = scores.scores[list(scores.ranking)]
        assert (np.diff(ordered) <= 0).all()


class TestSelectTopK:
    def test_prefix_of_the_ranking(self):
        scores = FeatureScores(np.array([0.1, 0.2, 0.5, 0.3]), (7, 2, 9, 1))
        assert select_top_k(scores, 2) == [7, 2]

    def test_k_equal_to_gene_count_is_the_full_ranking(self):
        scores = FeatureScores(np.zeros(3), (2, 0, 1))
        assert select_top_k(scores, 3) == [2, 0, 1]

    @pytest.mark.parametrize("k", [0, 4, -1])
    def test_out_of_range_k_is_rejected(self, k):
        with pytest.raises(InvalidInputError):
            select_top_k(FeatureScores(np.zeros(3), (0, 1, 2)), k)

    def test_select_features_returns_gene_ids_in_rank_order(self):
        values = [[0.0, 5.0, 1.0], [0.0, 5.0, 2.0], [9.0, 5.0, 1.0], [9.0, 5.0, 2.0]]
        selection = select_features(dataset(values, [0, 0, 1, 1]), 2)
        assert selection.indices == (0, 1)
        assert selection.gene_ids == ("G0", "G1")


class TestNormalization:
    def test_linear_map_of_the_training_range(self):
        model = fit_normalizer(np.array([[2.0], [4.0], [6.0]]))
        assert apply_normalizer(model, np.array([[2.0], [4.0], [6.0]]))[:, 0] == pytest.approx(
            [0.0, 0.5, 1.0]
        )

    def test_values_outside_the_training_range_are_clipped(self):
        model = fit_normalizer(np.array([[2.0], [6.0]]))
        assert apply_normalizer(model, np.array([[1.0], [9.0]]))[:, 0].tolist() == [0.0, 1.0]

    def test_constant_feature_maps_to_one_half(self):
        model = fit_normalizer(np.array([[3.0], [3.0], [3.0]]))
        assert apply_normalizer(model, np.array([[3.0], [3.0], [7.0]]))[:, 0].tolist() == [
            0.5,
            0.5,
            0.5,
        ]

    def test_single_vector_keeps_its_shape(self):
        model = fit_normalizer(np.array([[0.0, 10.0], [2.0, 20.0]]))
        assert apply_normalizer(model, np.array([1.0, 15.0])).tolist() == [0.5, 0.5]

    def test_dimension_mismatch(self):
        model = fit_normalizer(np.array([[0.0, 1.0]]))
        with pytest.raises(InvalidInputError, match="expected 2 features"):
            apply_normalizer(model, np.array([[0.0, 1.0, 2.0]]))

    def test_empty_matrix_cannot_be_fit(self):
        with pytest.raises(InvalidInputError):
            fit_normalizer(np.zeros((0, 3)))


class TestBinarization:
    def test_seven_tenths_gives_700_ones_and_300_zeros(self):
        batch = binarize_patient(np.array([0.7]), np.array([1, 0]), 1000, seed=5)
        column = batch.replicas[:, 0]
        assert int(column.sum()) == 700
        assert int((column == 0).sum()) == 300

    def test_endpoints(self):
        batch = binarize_patient(np.array([0.0, 1.0]), np.array([0, 1]), 50, seed=1)
        assert batch.replicas[:, 0].sum() == 0
        assert batch.replicas[:, 1].sum() == 50

    def test_one_half_over_ten_replicas(self):
        batch = binarize_patient(np.array([0.5]), np.array([1, 0]), 10, seed=2)
        assert batch.replicas[:, 0].sum() == 5
        assert batch.replicas[:, 0].mean() == 0.5

    def test_exact_count_for_a_thousand_random_values(self):
        values = np.random.default_rng(11).random(1000)
        batch = binarize_patient(values, np.array([1, 0]), 1000, seed=4)
        expected = [ones_count(p, 1000) for p in values]
        assert batch.replicas[:, :1000].sum(axis=0).tolist() == expected

    def test_halves_round_up(self):
        assert ones_count(0.5, 3) == 2
        assert ones_count(0.25, 2) == 1
        batch = binarize_patient(np.array([0.5, 0.25]), np.array([1, 0]), 2, seed=0)
        assert batch.replicas[:, :2].sum(axis=0).tolist() == [1, 1]
        batch = binarize_patient(np.array([0.5]), np.array([1, 0]), 3, seed=0)
        assert int(batch.replicas[:, 0].sum()) == 2

    def test_clamp_is_appended_to_every_replica(self):
        batch = binarize_patient(np.array([0.3, 0.6]), np.array([0, 1]), 20, seed=0)
        assert batch.width == 4
        assert (batch.replicas[:, 2:] == [0, 1]).all()
        assert batch.clamp_mode is ClampMode.TRUE_LABEL

    def test_same_seed_same_batch(self):
        first = binarize_patient(np.array([0.4, 0.9]), np.array([1, 0]), 100, seed=9)
        second = binarize_patient(np.array([0.4, 0.9]), np.array([1, 0]), 100, seed=9)
        assert np.array_equal(first.replicas, second.replicas)

    def test_columns_are_shuffled_independently(self):
        batch = binarize_patient(np.array([0.5, 0.5]), np.array([1, 0]), 1000, seed=3)
        assert not np.array_equal(batch.replicas[:, 0], batch.replicas[:, 1])

    @pytest.mark.parametrize("value", [-0.1, 1.5])
    def test_values_outside_unit_interval_are_rejected(self, value):
        with pytest.raises(InvalidInputError):
            binarize_patient(np.array([value]), np.array([1, 0]), 10)

    def test_clamp_must_be_binary(self):
        with pytest.raises(InvalidInputError, match="clamp"):
            binarize_patient(np.array([0.5]), np.array([2, 0]), 10)
