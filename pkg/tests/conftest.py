import numpy as np
import pytest

from eplearn import (
    Dataset,
    NuisanceEstimates,
    ScenarioConfig,
    WeightedLogisticRegression,
    fit_nuisances,
    generate,
    partition_folds,
    resolve_spec,
)
from eplearn.learners import KNNRegressor


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def lowdim_draw():
    cfg = ScenarioConfig(
        family="cate_lowdim", overlap="moderate", complexity="complex", n=400, seed=17
    )
    return generate(cfg)


@pytest.fixture(scope="session")
def lowdim_fitted(lowdim_draw):
    """Dataset with folds and cheaply fitted nuisances, shared across tests."""
    data = lowdim_draw.dataset
    spec = resolve_spec("cate", data.outcome)
    folds = partition_folds(data.n, 5, seed=3)
    nuis = fit_nuisances(
        data,
        folds,
        WeightedLogisticRegression(fit_intercept=True, ridge=1e-8),
        KNNRegressor(25),
        spec=spec,
    )
    return data, folds, nuis, spec


@pytest.fixture(scope="session")
def crr_draw():
    cfg = ScenarioConfig(
        family="crr", overlap="limited", complexity="complex", n=500, seed=23
    )
    return generate(cfg)


@pytest.fixture(scope="session")
def crr_fitted(crr_draw):
    data = crr_draw.dataset
    spec = resolve_spec("crr", data.outcome)
    folds = partition_folds(data.n, 5, seed=3)
    nuis = fit_nuisances(
        data,
        folds,
        WeightedLogisticRegression(fit_intercept=True, ridge=1e-8),
        WeightedLogisticRegression(fit_intercept=True, ridge=1e-8),
        spec=spec,
    )
    return data, folds, nuis, spec


@pytest.fixture
def oracle_nuisances(lowdim_draw):
    return NuisanceEstimates.from_functions(
        lowdim_draw.propensity1, lowdim_draw.outcome
    )


def make_dataset(rng, n=60, d=2):
    W = rng.normal(size=(n, d))
    a = (rng.uniform(size=n) < 0.5).astype(int)
    y = rng.normal(size=n)
    return Dataset.from_arrays(W, a, y)
