import numpy as np
import pytest
from scipy.special import expit

from eplearn import (
    Dataset,
    NuisanceEstimates,
    WeightedLogisticRegression,
    fit_nuisances,
    partition_folds,
    resolve_spec,
)
from eplearn.errors import BadFoldCount
from eplearn.learners import KNNRegressor


class TestPartitionFolds:
    def test_exact_division(self):
        folds = partition_folds(10, 5, seed=0)
        sizes = [folds.indices(j).size for j in range(5)]
        assert sizes == [2, 2, 2, 2, 2]

    def test_remainder_distribution(self):
        folds = partition_folds(10, 3, seed=1)
        sizes = sorted(folds.indices(j).size for j in range(3))
        assert sizes == [3, 3, 4]

    def test_deterministic(self):
        a = partition_folds(37, 4, seed=11)
        b = partition_folds(37, 4, seed=11)
        np.testing.assert_array_equal(a.fold_of, b.fold_of)

    def test_every_fold_nonempty_and_partition(self):
        folds = partition_folds(23, 7, seed=2)
        all_idx = np.concatenate([folds.indices(j) for j in range(7)])
        assert sorted(all_idx.tolist()) == list(range(23))

    @pytest.mark.parametrize("n,j", [(5, 0), (5, 6), (3, -1)])
    def test_bad_fold_count(self, n, j):
        with pytest.raises(BadFoldCount):
            partition_folds(n, j, seed=0)


def _simulated(rng, n=300):
    W = rng.uniform(-1, 1, size=(n, 2))
    a = (rng.uniform(size=n) < 0.5).astype(int)
    y = W[:, 0] + a * 1.5 + rng.normal(size=n) * 0.2
    return Dataset.from_arrays(W, a, y)


class TestFitNuisances:
    def test_constant_outcome_recovered(self, rng):
        data = _simulated(rng)
        data = Dataset.from_arrays(data.covariates, data.treatment, np.full(data.n, 4.2))
        folds = partition_folds(data.n, 3, seed=0)
        nuis = fit_nuisances(
            data, folds, WeightedLogisticRegression(fit_intercept=True), KNNRegressor(10)
        )
        grid = rng.uniform(-1, 1, size=(20, 2))
        for j in range(3):
            np.testing.assert_allclose(nuis.outcome(j, 0, grid), 4.2)
            np.testing.assert_allclose(nuis.outcome(j, 1, grid), 4.2)

    def test_randomized_marginal_recovered(self):
        rng = np.random.default_rng(99)
        n = 4000
        W = rng.uniform(-1, 1, size=(n, 2))
        a = (rng.uniform(size=n) < 0.5).astype(int)
        y = rng.normal(size=n)
        data = Dataset.from_arrays(W, a, y)
        folds = partition_folds(n, 2, seed=0)
        nuis = fit_nuisances(
            data, folds, WeightedLogisticRegression(fit_intercept=True), KNNRegressor(50)
        )
        grid = rng.uniform(-1, 1, size=(50, 2))
        for j in range(2):
            assert np.abs(nuis.propensity1(j, grid) - 0.5).max() < 0.05

    def test_out_of_fold_purity(self, rng):
        data = _simulated(rng)
        folds = partition_folds(data.n, 4, seed=5)
        learner_p = WeightedLogisticRegression(fit_intercept=True)
        learner_y = KNNRegressor(7)
        nuis = fit_nuisances(data, folds, learner_p, learner_y)
        # poison every column of fold-2 rows; fold-2 predictors must not move
        j = 2
        poisoned = np.array(data.covariates)
        idx = folds.indices(j)
        poisoned[idx] = 77.7
        a2 = np.array(data.treatment)
        a2[idx] = 1 - a2[idx]
        y2 = np.array(data.outcome)
        y2[idx] = -1e3
        data2 = Dataset.from_arrays(poisoned, a2, y2)
        nuis2 = fit_nuisances(data2, folds, learner_p, learner_y)
        grid = rng.uniform(-1, 1, size=(40, 2))
        np.testing.assert_array_equal(
            nuis.propensity1(j, grid), nuis2.propensity1(j, grid)
        )
        for arm in (0, 1):
            np.testing.assert_array_equal(
                nuis.outcome(j, arm, grid), nuis2.outcome(j, arm, grid)
            )

    def test_per_arm_fitting_isolation(self, rng):
        data = _simulated(rng)
        folds = partition_folds(data.n, 3, seed=1)
        learner_y = KNNRegressor(5)
        nuis = fit_nuisances(
            data, folds, WeightedLogisticRegression(fit_intercept=True), learner_y
        )
        # poisoning control outcomes must leave the treated-arm fit unchanged
        y2 = np.array(data.outcome)
        y2[data.treatment == 0] = 1e4
        data2 = Dataset.from_arrays(data.covariates, data.treatment, y2)
        nuis2 = fit_nuisances(
            data2, folds, WeightedLogisticRegression(fit_intercept=True), learner_y
        )
        grid = rng.uniform(-1, 1, size=(30, 2))
        for j in range(3):
            np.testing.assert_array_equal(
                nuis.outcome(j, 1, grid), nuis2.outcome(j, 1, grid)
            )
            assert not np.allclose(nuis.outcome(j, 0, grid), nuis2.outcome(j, 0, grid))

    def test_propensity_clamped(self, rng):
        n = 200
        W = rng.uniform(-1, 1, size=(n, 1))
        a = (rng.uniform(size=n) < expit(8 * W[:, 0])).astype(int)
        if a.min() == a.max():  # ensure both arms present
            a[0], a[1] = 0, 1
        y = rng.normal(size=n)
        data = Dataset.from_arrays(W, a, y)
        folds = partition_folds(n, 2, seed=0)
        nuis = fit_nuisances(
            data,
            folds,
            WeightedLogisticRegression(fit_intercept=True, ridge=1e-8),
            KNNRegressor(10),
            propensity_clip=0.05,
        )
        grid = np.array([[-1.0], [0.0], [1.0], [5.0]])
        for j in range(2):
            p = nuis.propensity1(j, grid)
            assert (p >= 0.05).all() and (p <= 0.95).all()

    def test_crr_outcome_clamped(self, crr_fitted):
        data, folds, nuis, spec = crr_fitted
        assert nuis.outcome_bounds == (1e-3, 1 - 1e-3)
        per = nuis.per_row(data, folds)
        for arr in (per.mu1, per.mu0):
            assert (arr >= 1e-3).all() and (arr <= 1 - 1e-3).all()

    def test_single_fold_uses_full_data(self, rng):
        data = _simulated(rng, n=80)
        folds = partition_folds(data.n, 1, seed=0)
        n_treated = int(data.treatment.sum())
        n_control = data.n - n_treated
        k = min(n_treated, n_control)
        nuis = fit_nuisances(
            data,
            folds,
            WeightedLogisticRegression(fit_intercept=True),
            KNNRegressor(k),
        )
        # with k equal to the smaller arm count, every prediction for that
        # arm is the mean over all of its rows, so all of them were used
        arm = 1 if n_treated <= n_control else 0
        np.testing.assert_allclose(
            nuis.outcome(0, arm, data.covariates[:3]),
            data.outcome[data.treatment == arm].mean(),
        )

    def test_fold_context_in_errors(self, rng):
        data = _simulated(rng, n=60)
        folds = partition_folds(data.n, 3, seed=0)
        with pytest.raises(Exception, match="fold"):
            fit_nuisances(
                data,
                folds,
                WeightedLogisticRegression(fit_intercept=True),
                KNNRegressor(10_000),
            )


def test_from_functions_adapter():
    nuis = NuisanceEstimates.from_functions(
        lambda W: np.full(W.shape[0], 0.25),
        lambda a, W: np.full(W.shape[0], float(a) * 2.0),
        propensity_clip=0.1,
    )
    grid = np.zeros((4, 2))
    np.testing.assert_allclose(nuis.propensity1(0, grid), 0.25)
    np.testing.assert_allclose(nuis.propensity(0, 0, grid), 0.75)
    np.testing.assert_allclose(nuis.outcome(0, 1, grid), 2.0)
    np.testing.assert_allclose(nuis.outcome(0, 0, grid), 0.0)
