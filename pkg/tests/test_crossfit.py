"""Cross-fitting orchestration tests."""
import numpy as np
import pytest

from cdml import (
    Dataset,
    LearnerSpec,
    crossfit_nuisances,
    external_nuisance_matrix,
    sample_dgp,
    validate_nuisances,
)
from cdml.errors import DegenerateFoldError, LearnerError


def _logistic_spec():
    return LearnerSpec(outcome_model="logistic_main_terms", propensity_model="logistic_main_terms")


def _simulated(n=100, seed=0, n_folds=5):
    return sample_dgp(n, np.random.default_rng(seed), n_folds=n_folds)


class TestCrossfitNuisances:
    def test_logistic_smoke_probabilities_in_range(self):
        data = _simulated(n=100)
        nuis = crossfit_nuisances(data, _logistic_spec(), seed=1)
        assert nuis.source == "builtin"
        assert nuis.pi.min() > 0.0 and nuis.pi.max() < 1.0
        np.testing.assert_allclose(nuis.pi.sum(axis=1), 1.0, atol=1e-9)

    def test_kernel_smoke(self):
        data = _simulated(n=200, seed=3)
        spec = LearnerSpec(bandwidth_grid=np.array([0.3, 0.6, 1.2]))
        nuis = crossfit_nuisances(data, spec, seed=1)
        assert np.all((nuis.mu >= 0.0) & (nuis.mu <= 1.0))
        np.testing.assert_allclose(nuis.pi.sum(axis=1), 1.0, atol=1e-9)

    def test_external_spec_echoes_columns(self):
        data = _simulated(n=40)
        cols = {
            "mu_0": np.full(40, 0.4),
            "mu_1": np.full(40, 0.6),
            "pi_0": np.full(40, 0.45),
            "pi_1": np.full(40, 0.55),
        }
        external = external_nuisance_matrix(data, cols)
        spec = LearnerSpec(outcome_model="external", propensity_model="external")
        nuis = crossfit_nuisances(data, spec, external=external)
        assert nuis is external

    def test_external_spec_without_columns_rejected(self):
        data = _simulated(n=40)
        spec = LearnerSpec(outcome_model="external", propensity_model="external")
        with pytest.raises(LearnerError):
            crossfit_nuisances(data, spec)

    def test_degenerate_fold_missing_arm(self):
        # fold 2's complement (fold 1) is all-treated
        n = 8
        data = Dataset(
            covariates=np.linspace(-1, 1, n).reshape(-1, 1),
            treatment=np.array([1, 1, 1, 1, 0, 1, 0, 1]),
            outcome=np.zeros(n),
            fold_id=np.array([1, 1, 1, 1, 2, 2, 2, 2]),
            arms=(0, 1),
            outcome_bound=1.0,
        )
        with pytest.raises(DegenerateFoldError):
            crossfit_nuisances(data, _logistic_spec(), seed=0)

    def test_single_fold_rejected(self):
        data = _simulated(n=40, n_folds=1)
        with pytest.raises(DegenerateFoldError):
            crossfit_nuisances(data, _logistic_spec(), seed=0)

    def test_deterministic_given_seed(self):
        data = _simulated(n=150, seed=5)
        spec = LearnerSpec(bandwidth_grid=np.array([0.3, 0.7]))
        a = crossfit_nuisances(data, spec, seed=9)
        b = crossfit_nuisances(data, spec, seed=9)
        assert a.fingerprint() == b.fingerprint()

    def test_leave_fold_out_contract(self):
        # Changing only fold 1's outcomes must leave fold 1's predictions
        # untouched (its models never see fold 1) and leave all propensities
        # untouched (they never use Y).
        data = _simulated(n=120, seed=7)
        nuis = crossfit_nuisances(data, _logistic_spec(), seed=11)

        outcome = data.outcome.copy()
        fold1 = data.fold_id == 1
        outcome[fold1] = 1.0 - outcome[fold1]
        perturbed = Dataset(
            covariates=data.covariates.copy(),
            treatment=data.treatment.copy(),
            outcome=outcome,
            fold_id=data.fold_id.copy(),
            arms=data.arms,
            outcome_bound=data.outcome_bound,
        )
        nuis2 = crossfit_nuisances(perturbed, _logistic_spec(), seed=11)

        np.testing.assert_array_equal(nuis.pi, nuis2.pi)
        np.testing.assert_array_equal(nuis.mu[fold1], nuis2.mu[fold1])
        assert not np.array_equal(nuis.mu[~fold1], nuis2.mu[~fold1])

    def test_multiarm_builtin_rejected(self):
        n = 30
        rng = np.random.default_rng(0)
        data = Dataset(
            covariates=rng.normal(size=(n, 2)),
            treatment=rng.integers(0, 3, size=n),
            outcome=rng.integers(0, 2, size=n).astype(float),
            fold_id=np.tile([1, 2, 3], 10),
            arms=(0, 1, 2),
            outcome_bound=1.0,
        )
        with pytest.raises(LearnerError):
            crossfit_nuisances(data, _logistic_spec(), seed=0)

    def test_validated_storage_floor(self):
        data = _simulated(n=80, seed=2)
        nuis = crossfit_nuisances(data, _logistic_spec(), seed=3)
        validate_nuisances(data, nuis.mu, nuis.pi, source="builtin")
