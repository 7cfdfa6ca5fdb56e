"""Validation, fold assignment, and nuisance-matrix ingestion tests."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdml import (
    Schema,
    assign_folds,
    external_nuisance_matrix,
    validate_dataset,
    validate_nuisances,
)
from cdml.errors import FoldError, SchemaError


def _toy_columns():
    return {
        "y": np.array([0.0, 1.0, 1.0, 0.0]),
        "a": np.array([0, 1, 0, 1]),
        "w1": np.array([0.1, -0.2, 0.5, 0.3]),
        "fold": np.array([1, 2, 1, 2]),
    }


def _toy_schema(**overrides):
    base = dict(outcome="y", treatment="a", covariates=["w1"], fold="fold", n_folds=2)
    base.update(overrides)
    return Schema(**base)


class TestValidateDataset:
    def test_minimal_valid_input(self):
        data = validate_dataset(_toy_columns(), _toy_schema())
        assert data.n == 4
        assert data.arms == (0, 1)
        assert data.n_folds == 2

    def test_nan_outcome_rejected(self):
        cols = _toy_columns()
        cols["y"] = np.array([0.0, np.nan, 1.0, 0.0])
        with pytest.raises(ValueError):
            validate_dataset(cols, _toy_schema())

    def test_empty_fold_rejected(self):
        cols = _toy_columns()
        cols["fold"] = np.array([1, 1, 1, 1])
        with pytest.raises(FoldError):
            validate_dataset(cols, _toy_schema())

    def test_missing_column_is_schema_error(self):
        cols = _toy_columns()
        del cols["a"]
        with pytest.raises(SchemaError):
            validate_dataset(cols, _toy_schema())

    def test_unknown_arm_rejected(self):
        cols = _toy_columns()
        cols["a"] = np.array([0, 1, 2, 1])
        with pytest.raises(ValueError):
            validate_dataset(cols, _toy_schema(arms=(0, 1)))

    def test_outcome_bound_enforced(self):
        cols = _toy_columns()
        cols["y"] = np.array([0.0, 3.0, 1.0, 0.0])
        with pytest.raises(ValueError):
            validate_dataset(cols, _toy_schema(outcome_bound=1.0))

    def test_default_bound_is_max_abs_outcome(self):
        data = validate_dataset(_toy_columns(), _toy_schema())
        assert data.outcome_bound == 1.0

    def test_idempotent_revalidation(self):
        data = validate_dataset(_toy_columns(), _toy_schema())
        again = validate_dataset(data.to_columns(), data.default_schema())
        np.testing.assert_array_equal(again.treatment, data.treatment)
        np.testing.assert_array_equal(again.outcome, data.outcome)
        np.testing.assert_array_equal(again.fold_id, data.fold_id)
        np.testing.assert_array_equal(again.covariates, data.covariates)
        assert again.arms == data.arms
        assert again.outcome_bound == data.outcome_bound

    def test_too_many_folds_for_n(self):
        cols = {
            "y": np.zeros(3),
            "a": np.array([0, 1, 0]),
            "w1": np.zeros(3),
            "fold": np.array([1, 2, 1]),
        }
        with pytest.raises(FoldError):
            validate_dataset(cols, _toy_schema())

    def test_arrays_frozen(self):
        data = validate_dataset(_toy_columns(), _toy_schema())
        with pytest.raises(ValueError):
            data.outcome[0] = 5.0


class TestAssignFolds:
    def test_balanced_split(self):
        fold_id = assign_folds(10, 5, np.random.default_rng(0))
        counts = np.bincount(fold_id)[1:]
        np.testing.assert_array_equal(counts, [2, 2, 2, 2, 2])

    def test_remainder_distribution(self):
        fold_id = assign_folds(7, 3, np.random.default_rng(0))
        counts = sorted(np.bincount(fold_id)[1:], reverse=True)
        assert counts == [3, 2, 2]

    def test_deterministic_given_seed(self):
        a = assign_folds(50, 4, np.random.default_rng(123))
        b = assign_folds(50, 4, np.random.default_rng(123))
        np.testing.assert_array_equal(a, b)

    def test_too_many_folds(self):
        with pytest.raises(FoldError):
            assign_folds(3, 4, np.random.default_rng(0))

    @given(st.integers(1, 200), st.integers(1, 20), st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_partition_and_balance(self, n, n_folds, seed):
        if n_folds > n:
            return
        fold_id = assign_folds(n, n_folds, np.random.default_rng(seed))
        counts = np.bincount(fold_id, minlength=n_folds + 1)[1:]
        assert counts.sum() == n
        assert np.all(counts > 0)
        assert counts.max() - counts.min() <= 1


class TestNuisanceIngestion:
    def test_external_columns_echoed(self):
        cols = _toy_columns()
        cols.update(
            {
                "mu_0": np.array([0.2, 0.3, 0.4, 0.5]),
                "mu_1": np.array([0.3, 0.4, 0.5, 0.6]),
                "pi_0": np.array([0.5, 0.6, 0.7, 0.4]),
                "pi_1": np.array([0.5, 0.4, 0.3, 0.6]),
            }
        )
        data = validate_dataset(cols, _toy_schema())
        nuis = external_nuisance_matrix(data, cols)
        assert nuis.source == "external"
        np.testing.assert_array_equal(nuis.mu[:, 1], cols["mu_1"])
        np.testing.assert_array_equal(nuis.pi[:, 0], cols["pi_0"])

    def test_propensity_outside_unit_interval_rejected(self):
        data = validate_dataset(_toy_columns(), _toy_schema())
        pi = np.array([[0.5, 0.5], [1.0, 0.0], [0.4, 0.6], [0.7, 0.3]])
        mu = np.full((4, 2), 0.5)
        with pytest.raises(ValueError):
            validate_nuisances(data, mu, pi, source="external")

    def test_row_sum_check(self):
        data = validate_dataset(_toy_columns(), _toy_schema())
        pi = np.array([[0.5, 0.4], [0.6, 0.4], [0.4, 0.6], [0.7, 0.3]])
        mu = np.full((4, 2), 0.5)
        with pytest.raises(ValueError):
            validate_nuisances(data, mu, pi, source="external")

    def test_mu_bound_check(self):
        data = validate_dataset(_toy_columns(), _toy_schema())
        pi = np.full((4, 2), 0.5)
        mu = np.full((4, 2), 1.5)  # outcome bound is 1
        with pytest.raises(ValueError):
            validate_nuisances(data, mu, pi, source="external")

    def test_fingerprint_detects_changes(self):
        data = validate_dataset(_toy_columns(), _toy_schema())
        pi = np.full((4, 2), 0.5)
        mu = np.full((4, 2), 0.5)
        a = validate_nuisances(data, mu, pi, source="external")
        mu2 = mu.copy()
        mu2[0, 0] = 0.50001
        b = validate_nuisances(data, mu2, pi, source="external")
        assert a.fingerprint() != b.fingerprint()
        assert a.fingerprint() == validate_nuisances(data, mu, pi, "external").fingerprint()
