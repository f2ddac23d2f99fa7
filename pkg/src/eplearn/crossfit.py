"""Fold partitioning and cross-fitted nuisance estimation.

Nuisances are the propensity score pi(a | w) and the arm-specific outcome
regressions mu(a, w). For each fold j they are fit on all rows outside fold
j, so every observation's nuisance predictions are independent of it. A fold
count of 1 requests the non-cross-fit variant: a single fit on all rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from sklearn.base import clone

from .data import Dataset
from .errors import BadFoldCount
from .risks import RiskSpec

DEFAULT_PROPENSITY_CLIP = 0.01
DEFAULT_CRR_MU_FLOOR = 1e-3


@dataclass(frozen=True)
class FoldAssignment:
    """Deterministic J-fold partition: seeded shuffle then contiguous blocks."""

    n_folds: int
    fold_of: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return self.fold_of.shape[0]

    def indices(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == j)

    def train_indices(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != j)


def partition_folds(n: int, n_folds: int, seed: int = 0) -> FoldAssignment:
    """Split n rows into n_folds folds whose sizes differ by at most one."""
    if not 1 <= n_folds <= n:
        raise BadFoldCount(f"fold count {n_folds} must lie in [1, {n}]")
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(n)
    base, extra = divmod(n, n_folds)
    fold_of = np.empty(n, dtype=np.int64)
    start = 0
    for j in range(n_folds):
        size = base + (1 if j < extra else 0)
        fold_of[perm[start : start + size]] = j
        start += size
    fold_of.flags.writeable = False
    return FoldAssignment(n_folds=n_folds, fold_of=fold_of, seed=seed)


class _CallablePredictor:
    """Adapts a plain function of W into the predictor protocol."""

    def __init__(self, fn):
        self.fn = fn

    def predict(self, W):
        return np.asarray(self.fn(np.asarray(W, dtype=float)), dtype=float)


class RowNuisances(NamedTuple):
    """Per-row nuisance evaluations at the fold of each observation."""

    pi1: np.ndarray      # P(A=1 | W_i), clipped
    pi_obs: np.ndarray   # P(A=A_i | W_i), clipped
    mu1: np.ndarray      # mu(1, W_i)
    mu0: np.ndarray      # mu(0, W_i)
    mu_obs: np.ndarray   # mu(A_i, W_i)


@dataclass(frozen=True)
class NuisanceEstimates:
    """Fold-indexed propensity and outcome predictors with clamp levels.

    ``propensity_models[j].predict(W)`` returns P(A=1 | W); predictions are
    clipped to [clip, 1-clip]. ``outcome_models[j]`` is an (arm0, arm1) pair;
    predictions are clipped to ``outcome_bounds`` when set (required in
    relative-risk mode, where the floor keeps log mu defined).
    """

    n_folds: int
    propensity_models: tuple
    outcome_models: tuple
    propensity_clip: float = DEFAULT_PROPENSITY_CLIP
    outcome_bounds: Optional[tuple] = None

    def propensity1(self, j: int, W) -> np.ndarray:
        p = np.asarray(self.propensity_models[j].predict(W), dtype=float)
        return np.clip(p, self.propensity_clip, 1.0 - self.propensity_clip)

    def propensity(self, j: int, a, W) -> np.ndarray:
        p1 = self.propensity1(j, W)
        return np.where(np.asarray(a) == 1, p1, 1.0 - p1)

    def outcome(self, j: int, a, W) -> np.ndarray:
        a = np.asarray(a)
        if a.ndim == 0:
            models = (self.outcome_models[j][int(a)],)
            val = np.asarray(models[0].predict(W), dtype=float)
        else:
            m0 = np.asarray(self.outcome_models[j][0].predict(W), dtype=float)
            m1 = np.asarray(self.outcome_models[j][1].predict(W), dtype=float)
            val = np.where(a == 1, m1, m0)
        if self.outcome_bounds is not None:
            lo, hi = self.outcome_bounds
            val = np.clip(val, lo, hi if hi is not None else np.inf)
        return val

    def per_row(self, data: Dataset, folds: FoldAssignment) -> RowNuisances:
        if self.n_folds > 1 and folds.n_folds != self.n_folds:
            raise BadFoldCount(
                f"nuisances were fit with {self.n_folds} folds, got {folds.n_folds}"
            )
        n = data.n
        pi1 = np.empty(n)
        mu1 = np.empty(n)
        mu0 = np.empty(n)
        for j in range(self.n_folds):
            idx = folds.indices(j) if self.n_folds > 1 else np.arange(n)
            W = data.covariates[idx]
            pi1[idx] = self.propensity1(j, W)
            mu1[idx] = self.outcome(j, 1, W)
            mu0[idx] = self.outcome(j, 0, W)
            if self.n_folds == 1:
                break
        a = data.treatment
        pi_obs = np.where(a == 1, pi1, 1.0 - pi1)
        mu_obs = np.where(a == 1, mu1, mu0)
        return RowNuisances(pi1=pi1, pi_obs=pi_obs, mu1=mu1, mu0=mu0, mu_obs=mu_obs)

    @classmethod
    def from_functions(
        cls,
        propensity1_fn,
        outcome_fn,
        n_folds: int = 1,
        propensity_clip: float = DEFAULT_PROPENSITY_CLIP,
        outcome_bounds=None,
    ) -> "NuisanceEstimates":
        """Wrap analytic nuisances (e.g. known truths) as fold predictors.

        ``propensity1_fn(W)`` returns P(A=1 | W); ``outcome_fn(a, W)`` the
        outcome regression for arm a.
        """
        prop = _CallablePredictor(propensity1_fn)
        arms = (
            _CallablePredictor(lambda W: outcome_fn(0, W)),
            _CallablePredictor(lambda W: outcome_fn(1, W)),
        )
        return cls(
            n_folds=n_folds,
            propensity_models=tuple(prop for _ in range(n_folds)),
            outcome_models=tuple(arms for _ in range(n_folds)),
            propensity_clip=propensity_clip,
            outcome_bounds=outcome_bounds,
        )


def _with_fold_context(j: int, what: str, exc: Exception):
    try:
        return type(exc)(f"fold {j} ({what}): {exc}")
    except Exception:
        return exc


def fit_nuisances(
    data: Dataset,
    folds: FoldAssignment,
    propensity_learner,
    outcome_learner,
    spec: Optional[RiskSpec] = None,
    propensity_clip: float = DEFAULT_PROPENSITY_CLIP,
    outcome_bounds="auto",
) -> NuisanceEstimates:
    """Cross-fit the propensity and per-arm outcome regressions.

    The propensity learner regresses A on W; the outcome learner is cloned
    into one fit per arm, each trained only on that arm's rows. With
    ``outcome_bounds="auto"`` the clamp is [1e-3, 1 - 1e-3] in relative-risk
    mode with outcomes in [0, 1], [1e-3, inf) for other nonnegative
    relative-risk outcomes, and absent otherwise.
    """
    if outcome_bounds == "auto":
        if spec is not None and spec.family == "crr":
            hi = 1.0 - DEFAULT_CRR_MU_FLOOR if data.binary_outcome else None
            outcome_bounds = (DEFAULT_CRR_MU_FLOOR, hi)
        else:
            outcome_bounds = None
    prop_models = []
    out_models = []
    for j in range(folds.n_folds):
        train = folds.train_indices(j) if folds.n_folds > 1 else np.arange(data.n)
        W = data.covariates[train]
        a = data.treatment[train]
        y = data.outcome[train]
        try:
            pm = clone(propensity_learner).fit(W, a.astype(float))
        except Exception as exc:
            raise _with_fold_context(j, "propensity", exc) from exc
        arm_models = []
        for arm in (0, 1):
            rows = a == arm
            if not rows.any():
                raise ValueError(f"fold {j}: no arm-{arm} rows in training split")
            try:
                arm_models.append(clone(outcome_learner).fit(W[rows], y[rows]))
            except Exception as exc:
                raise _with_fold_context(j, f"outcome arm {arm}", exc) from exc
        prop_models.append(pm)
        out_models.append(tuple(arm_models))
    return NuisanceEstimates(
        n_folds=folds.n_folds,
        propensity_models=tuple(prop_models),
        outcome_models=tuple(out_models),
        propensity_clip=propensity_clip,
        outcome_bounds=outcome_bounds,
    )
