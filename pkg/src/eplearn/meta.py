"""Contrast estimators: plug-in, orthogonal, and adjusted plug-in learners.

Every learner is a scikit-learn style estimator fit as ``fit(W, a, y)`` with
covariates W, binary treatment a, and outcome y, and predicting the causal
contrast at new covariate rows with ``predict(W)``. Families:

* ``cate`` - the additive contrast mu(1, w) - mu(0, w);
* ``crr`` - the log ratio log mu(1, w) - log mu(0, w) for nonnegative
  outcomes.

Second-stage learners may be passed as a single prototype or a list of
candidates; candidate lists are resolved by K-fold cross-validation on the
held-out one-step (orthogonal) loss, ties toward the earlier position.
"""

from __future__ import annotations

import pickle
import warnings

import numpy as np
from sklearn.base import BaseEstimator, clone

from .crossfit import (
    DEFAULT_PROPENSITY_CLIP,
    FoldAssignment,
    NuisanceEstimates,
    fit_nuisances,
    partition_folds,
)
from .data import Dataset
from .errors import AllZeroWeights, DimensionMismatch, ScoreResidualWarning
from .learners import (
    GradientBoostedTrees,
    KNNRegressor,
    WeightedLogisticRegression,
    fit_with_weight,
)
from .pseudo import crr_ep_pseudo, dr_pseudo_outcomes
from .risks import RiskSpec, resolve_spec
from .sieve import CosineBasis, debias_outcome_regression

SCORE_RESIDUAL_WARN = 1e-4
_CRR_MU_FLOOR = 1e-3


def _default_propensity_learner():
    return WeightedLogisticRegression(fit_intercept=True, ridge=1e-8)


def _default_outcome_learner():
    return GradientBoostedTrees(n_rounds=100, max_depth=3, learning_rate=0.1)


def _default_stage2(spec: RiskSpec):
    if spec.family == "crr":
        return WeightedLogisticRegression(fit_intercept=True, ridge=1e-8)
    return GradientBoostedTrees(n_rounds=100, max_depth=2, learning_rate=0.1)


class _MeanStage2:
    """Second stage on the mean scale: a plain weighted regression."""

    def __init__(self, proto):
        self.proto = proto

    def clone(self):
        return _MeanStage2(self.proto)

    def fit(self, W, target, weight=None):
        self.model_ = fit_with_weight(clone(self.proto), W, target, weight)
        return self

    def predict(self, W):
        return self.model_.predict(W)


class _LogitStage2:
    """Second stage on the logit scale for ratio contrasts.

    Fits a weighted Bernoulli GLM of the pseudo-outcome on the covariates,
    optionally augmented with cosine features of W, and predicts the linear
    predictor (the contrast lives on the log scale).
    """

    def __init__(self, proto, n_frequencies=0):
        self.proto = proto
        self.n_frequencies = n_frequencies

    def clone(self):
        return _LogitStage2(self.proto, self.n_frequencies)

    def _expand(self, W):
        if self.basis_ is None:
            return W
        return np.hstack([W, self.basis_.transform(W)])

    def fit(self, W, target, weight=None):
        W = np.asarray(W, dtype=float)
        if self.n_frequencies and int(self.n_frequencies) > 0:
            self.basis_ = CosineBasis(int(self.n_frequencies)).fit(W)
        else:
            self.basis_ = None
        self.model_ = clone(self.proto).fit(
            self._expand(W), target, sample_weight=weight
        )
        return self

    def predict(self, W):
        return self.model_.decision_function(self._expand(np.asarray(W, dtype=float)))


def _make_stage2(spec: RiskSpec, proto, n_frequencies=0):
    if proto is None:
        proto = _default_stage2(spec)
    if spec.family == "crr":
        return _LogitStage2(proto, n_frequencies)
    return _MeanStage2(proto)


class _OneStepLoss:
    """Per-row orthogonal loss used for held-out model selection."""

    def __init__(self, data: Dataset, folds: FoldAssignment, nuisances, spec, per=None):
        self.spec = spec
        self.a = data.treatment
        self.y = data.outcome
        self.per = nuisances.per_row(data, folds) if per is None else per

    def rows(self, pred, idx) -> np.ndarray:
        pred = np.asarray(pred, dtype=float)
        per = self.per
        return self.spec.loss(pred, per.mu1[idx], per.mu0[idx]) + self.spec.correction(
            pred, self.a[idx], self.y[idx], per.mu_obs[idx], per.pi_obs[idx]
        )


def _select_stage2(stage2s, W, fit_y, fit_w, loss: _OneStepLoss, n_folds, seed):
    """Pick the stage-2 candidate with the lowest held-out one-step loss."""
    if len(stage2s) == 1:
        return 0
    n = W.shape[0]
    folds = partition_folds(n, min(n_folds, n), seed)
    totals = np.zeros(len(stage2s))
    for j in range(folds.n_folds):
        train = folds.train_indices(j)
        test = folds.indices(j)
        w_tr = None if fit_w is None else fit_w[train]
        for c, proto in enumerate(stage2s):
            model = proto.clone().fit(W[train], fit_y[train], w_tr)
            totals[c] += float(loss.rows(model.predict(W[test]), test).sum())
    return int(np.argmin(totals))


class BaseContrastLearner(BaseEstimator):
    """Shared plumbing: validation, nuisance fitting, prediction."""

    method = "base"

    def _resolve_spec(self, data: Dataset) -> RiskSpec:
        return resolve_spec(getattr(self, "spec", "cate"), data.outcome)

    def _nuisance_components(self):
        prop = getattr(self, "propensity_learner", None)
        out = getattr(self, "outcome_learner", None)
        return (
            prop if prop is not None else _default_propensity_learner(),
            out if out is not None else _default_outcome_learner(),
        )

    def _fit_nuisances(self, data, folds, spec):
        injected = getattr(self, "nuisances", None)
        if injected is not None:
            return injected
        prop, out = self._nuisance_components()
        return fit_nuisances(
            data,
            folds,
            prop,
            out,
            spec=spec,
            propensity_clip=getattr(self, "propensity_clip", DEFAULT_PROPENSITY_CLIP),
        )

    def fit(self, W, a, y):
        data = Dataset.from_arrays(W, a, y)
        self.n_features_in_ = data.d
        self.truncate_bounds_ = None
        self._fit(data)
        return self

    def _fit(self, data: Dataset):
        raise NotImplementedError

    def _predict_values(self, W: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, W) -> np.ndarray:
        W = np.asarray(W, dtype=float)
        if W.ndim == 1:
            W = W.reshape(-1, self.n_features_in_) if W.size else W.reshape(0, self.n_features_in_)
        if W.ndim != 2 or W.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"query has {W.shape[1] if W.ndim == 2 else W.ndim} columns, "
                f"model was fit with {self.n_features_in_}"
            )
        if W.shape[0] == 0:
            return np.zeros(0)
        out = np.asarray(self._predict_values(W), dtype=float)
        if self.truncate_bounds_ is not None:
            out = np.clip(out, *self.truncate_bounds_)
        return out


class TLearner(BaseContrastLearner):
    """Plug-in contrast from two arm-specific outcome fits on the full data.

    Parameters
    ----------
    spec : "cate", "crr", or a RiskSpec
    outcome_learner : regressor prototype cloned per arm
    mu_floor : lower clamp on arm fits before taking logs (ratio family)
    """

    method = "T"

    def __init__(self, spec="cate", outcome_learner=None, mu_floor=_CRR_MU_FLOOR, seed=0):
        self.spec = spec
        self.outcome_learner = outcome_learner
        self.mu_floor = mu_floor
        self.seed = seed

    def _fit(self, data):
        spec = self._resolve_spec(data)
        self.family_ = spec.family
        proto = (
            self.outcome_learner
            if self.outcome_learner is not None
            else _default_outcome_learner()
        )
        self.arm_models_ = []
        for arm in (0, 1):
            rows = data.treatment == arm
            if not rows.any():
                raise ValueError(f"no arm-{arm} rows to fit")
            self.arm_models_.append(
                clone(proto).fit(data.covariates[rows], data.outcome[rows])
            )

    def _predict_values(self, W):
        m0 = np.asarray(self.arm_models_[0].predict(W), dtype=float)
        m1 = np.asarray(self.arm_models_[1].predict(W), dtype=float)
        if self.family_ == "crr":
            hi = np.inf
            return np.log(np.clip(m1, self.mu_floor, hi)) - np.log(
                np.clip(m0, self.mu_floor, hi)
            )
        return m1 - m0


class DRLearner(BaseContrastLearner):
    """Second-stage regression of the doubly robust pseudo-outcome on W.

    Additive contrasts only. With ``truncate`` and binary outcomes the
    predictions are clipped to [-1, 1], the range the true contrast must
    occupy. ``stage2`` may be a list of candidate regressors, resolved by
    cross-validated one-step loss.
    """

    method = "DR"

    def __init__(
        self,
        stage2=None,
        truncate=True,
        n_folds=10,
        selection_folds=10,
        propensity_learner=None,
        outcome_learner=None,
        propensity_clip=DEFAULT_PROPENSITY_CLIP,
        nuisances=None,
        seed=0,
    ):
        self.stage2 = stage2
        self.truncate = truncate
        self.n_folds = n_folds
        self.selection_folds = selection_folds
        self.propensity_learner = propensity_learner
        self.outcome_learner = outcome_learner
        self.propensity_clip = propensity_clip
        self.nuisances = nuisances
        self.seed = seed

    spec = "cate"

    def _fit(self, data):
        spec = resolve_spec("cate", data.outcome)
        self.family_ = "cate"
        folds = partition_folds(data.n, min(self.n_folds, data.n), self.seed)
        nuis = self._fit_nuisances(data, folds, spec)
        per = nuis.per_row(data, folds)
        chi = dr_pseudo_outcomes(data, folds, nuis, per=per)
        self.pseudo_outcomes_ = chi
        protos = self.stage2 if isinstance(self.stage2, (list, tuple)) else [self.stage2]
        stage2s = [_make_stage2(spec, p) for p in protos]
        loss = _OneStepLoss(data, folds, nuis, spec, per=per)
        pick = _select_stage2(
            stage2s, data.covariates, chi, None, loss, self.selection_folds, self.seed + 1
        )
        self.selected_stage2_ = protos[pick]
        self.model_ = stage2s[pick].clone().fit(data.covariates, chi)
        self.nuisances_ = nuis
        self.folds_ = folds
        if self.truncate and data.binary_outcome:
            self.truncate_bounds_ = (-1.0, 1.0)

    def _predict_values(self, W):
        return self.model_.predict(W)


class RLearner(BaseContrastLearner):
    """Residual-on-residual regression with squared treatment residual weights.

    Regresses (Y - m(W)) / (A - pi(W)) on W with weights (A - pi(W))^2, where
    m(W) = pi(W) mu(1, W) + (1 - pi(W)) mu(0, W). Additive contrasts only;
    the stage-2 learner must accept sample weights.
    """

    method = "R"

    def __init__(
        self,
        stage2=None,
        n_folds=10,
        selection_folds=10,
        propensity_learner=None,
        outcome_learner=None,
        propensity_clip=DEFAULT_PROPENSITY_CLIP,
        nuisances=None,
        seed=0,
    ):
        self.stage2 = stage2
        self.n_folds = n_folds
        self.selection_folds = selection_folds
        self.propensity_learner = propensity_learner
        self.outcome_learner = outcome_learner
        self.propensity_clip = propensity_clip
        self.nuisances = nuisances
        self.seed = seed

    spec = "cate"

    def _fit(self, data):
        spec = resolve_spec("cate", data.outcome)
        self.family_ = "cate"
        folds = partition_folds(data.n, min(self.n_folds, data.n), self.seed)
        nuis = self._fit_nuisances(data, folds, spec)
        per = nuis.per_row(data, folds)
        a = data.treatment.astype(float)
        m_hat = per.pi1 * per.mu1 + (1.0 - per.pi1) * per.mu0
        resid_a = a - per.pi1
        pseudo = (data.outcome - m_hat) / resid_a
        weight = resid_a**2
        self.pseudo_outcomes_ = pseudo
        self.pseudo_weights_ = weight
        protos = self.stage2 if isinstance(self.stage2, (list, tuple)) else [self.stage2]
        stage2s = [_make_stage2(spec, p) for p in protos]
        loss = _OneStepLoss(data, folds, nuis, spec, per=per)
        pick = _select_stage2(
            stage2s, data.covariates, pseudo, weight, loss, self.selection_folds, self.seed + 1
        )
        self.selected_stage2_ = protos[pick]
        self.model_ = stage2s[pick].clone().fit(data.covariates, pseudo, weight)
        self.nuisances_ = nuis
        self.folds_ = folds

    def _predict_values(self, W):
        return self.model_.predict(W)


class IPWELearner(BaseContrastLearner):
    """Inverse-probability-weighted learner for the log ratio contrast.

    Fits a weighted logistic second stage with weight Y_i / pi(A_i | W_i)
    and response A_i; rows with Y = 0 carry zero weight. Requires Y >= 0.
    """

    method = "IPW_E"

    def __init__(
        self,
        stage2=None,
        stage2_frequencies=6,
        n_folds=10,
        propensity_learner=None,
        propensity_clip=DEFAULT_PROPENSITY_CLIP,
        nuisances=None,
        seed=0,
    ):
        self.stage2 = stage2
        self.stage2_frequencies = stage2_frequencies
        self.n_folds = n_folds
        self.propensity_learner = propensity_learner
        self.propensity_clip = propensity_clip
        self.nuisances = nuisances
        self.seed = seed

    spec = "crr"

    def _fit(self, data):
        if (data.outcome < 0).any():
            raise ValueError("ratio-contrast outcomes must be nonnegative")
        spec = resolve_spec("crr", data.outcome)
        self.family_ = "crr"
        folds = partition_folds(data.n, min(self.n_folds, data.n), self.seed)
        if self.nuisances is not None:
            nuis = self.nuisances
            per = nuis.per_row(data, folds)
            pi_obs = per.pi_obs
        else:
            prop = (
                self.propensity_learner
                if self.propensity_learner is not None
                else _default_propensity_learner()
            )
            pi1 = np.empty(data.n)
            for j in range(folds.n_folds):
                train = folds.train_indices(j) if folds.n_folds > 1 else np.arange(data.n)
                model = clone(prop).fit(
                    data.covariates[train], data.treatment[train].astype(float)
                )
                idx = folds.indices(j)
                pi1[idx] = np.clip(
                    model.predict(data.covariates[idx]),
                    self.propensity_clip,
                    1.0 - self.propensity_clip,
                )
            pi_obs = np.where(data.treatment == 1, pi1, 1.0 - pi1)
        weight = data.outcome / pi_obs
        if not (weight > 0).any():
            raise AllZeroWeights("every row has zero outcome; nothing to fit")
        self.pseudo_weights_ = weight
        stage2 = _make_stage2(spec, self.stage2, self.stage2_frequencies)
        self.model_ = stage2.fit(data.covariates, data.treatment.astype(float), weight)
        self.folds_ = folds

    def _predict_values(self, W):
        return self.model_.predict(W)


class EPLearner(BaseContrastLearner):
    """Plug-in learner on sieve-adjusted outcome regressions (fixed dimension).

    Cross-fits the nuisances, adjusts the outcome regressions so the
    influence-function correction vanishes over a cosine sieve with
    ``n_frequencies`` per covariate dimension, and fits the second stage on
    the adjusted pseudo-contrast (additive family) or the adjusted
    weight/outcome pairs (ratio family).

    Parameters
    ----------
    spec : "cate", "crr", or a RiskSpec
    n_frequencies : sieve frequencies per covariate dimension (k)
    debias_method : 1, 2, 3, or None for automatic selection
    stage2 : second-stage prototype or candidate list
    stage2_frequencies : cosine expansion for the ratio-family second stage
    ridge : penalty on the adjustment regression (0 gives exact score equations)
    """

    method = "EP"

    def __init__(
        self,
        spec="cate",
        n_frequencies=3,
        debias_method=None,
        simplified=None,
        stage2=None,
        stage2_frequencies=6,
        ridge=1e-8,
        n_folds=10,
        selection_folds=10,
        propensity_learner=None,
        outcome_learner=None,
        propensity_clip=DEFAULT_PROPENSITY_CLIP,
        nuisances=None,
        seed=0,
    ):
        self.spec = spec
        self.n_frequencies = n_frequencies
        self.debias_method = debias_method
        self.simplified = simplified
        self.stage2 = stage2
        self.stage2_frequencies = stage2_frequencies
        self.ridge = ridge
        self.n_folds = n_folds
        self.selection_folds = selection_folds
        self.propensity_learner = propensity_learner
        self.outcome_learner = outcome_learner
        self.propensity_clip = propensity_clip
        self.nuisances = nuisances
        self.seed = seed

    def _fit(self, data):
        spec = self._resolve_spec(data)
        self.family_ = spec.family
        folds = partition_folds(data.n, min(self.n_folds, data.n), self.seed)
        nuis = self._fit_nuisances(data, folds, spec)
        per = nuis.per_row(data, folds)
        basis = CosineBasis(int(self.n_frequencies)).fit(data.covariates)
        result = debias_outcome_regression(
            data,
            folds,
            nuis,
            spec,
            basis,
            method=self.debias_method,
            simplified=self.simplified,
            ridge=self.ridge,
            per=per,
        )
        self.k_ = int(self.n_frequencies)
        self.score_residual_ = result.score_residual
        self.debias_ = result
        if result.score_residual > SCORE_RESIDUAL_WARN:
            warnings.warn(
                f"score residual {result.score_residual:.3e} above "
                f"{SCORE_RESIDUAL_WARN:.0e}",
                ScoreResidualWarning,
                stacklevel=2,
            )
        mu1s, mu0s, _ = result.mu_star.per_row(data, folds, per=per)
        protos = self.stage2 if isinstance(self.stage2, (list, tuple)) else [self.stage2]
        stage2s = [_make_stage2(spec, p, self.stage2_frequencies) for p in protos]
        if spec.family == "crr":
            pseudo = crr_ep_pseudo(data, folds, result.mu_star)
            fit_y, fit_w = pseudo.pseudo_outcome, pseudo.pseudo_weight
            self.pseudo_ = pseudo
        else:
            fit_y, fit_w = mu1s - mu0s, None
            self.pseudo_ = fit_y
        loss = _OneStepLoss(data, folds, nuis, spec, per=per)
        pick = _select_stage2(
            stage2s, data.covariates, fit_y, fit_w, loss, self.selection_folds, self.seed + 1
        )
        self.selected_stage2_ = protos[pick]
        self.model_ = stage2s[pick].clone().fit(data.covariates, fit_y, fit_w)
        self.nuisances_ = nuis
        self.folds_ = folds

    def _predict_values(self, W):
        return self.model_.predict(W)


class CVEPLearner(BaseContrastLearner):
    """Sieve-adjusted plug-in learner with cross-validated sieve dimension.

    For each candidate dimension k and each fold j, the adjustment is refit
    on the rows outside fold j and a second stage is trained there; the
    held-out rows of fold j are then scored with the one-step loss under the
    initial nuisances. The dimension minimizing the averaged loss (ties to
    the smallest k) is refit on the full data.
    """

    method = "CV_EP"

    def __init__(
        self,
        spec="cate",
        k_grid=(1, 2, 3, 4, 5, 6),
        debias_method=None,
        simplified=None,
        stage2=None,
        stage2_frequencies=6,
        ridge=1e-8,
        n_folds=10,
        propensity_learner=None,
        outcome_learner=None,
        propensity_clip=DEFAULT_PROPENSITY_CLIP,
        nuisances=None,
        seed=0,
    ):
        self.spec = spec
        self.k_grid = k_grid
        self.debias_method = debias_method
        self.simplified = simplified
        self.stage2 = stage2
        self.stage2_frequencies = stage2_frequencies
        self.ridge = ridge
        self.n_folds = n_folds
        self.propensity_learner = propensity_learner
        self.outcome_learner = outcome_learner
        self.propensity_clip = propensity_clip
        self.nuisances = nuisances
        self.seed = seed

    @staticmethod
    def _select_k(criteria: dict) -> int:
        """Smallest key attaining the minimum criterion value."""
        best_k, best_v = None, np.inf
        for k in sorted(criteria):
            if criteria[k] < best_v:
                best_k, best_v = k, criteria[k]
        return best_k

    def _fit(self, data):
        grid = sorted(int(k) for k in self.k_grid)
        if not grid:
            raise ValueError("k_grid must be non-empty")
        if isinstance(self.stage2, (list, tuple)):
            raise ValueError(
                "tune the second stage before cross-validating the sieve dimension"
            )
        spec = self._resolve_spec(data)
        self.family_ = spec.family
        folds = partition_folds(data.n, min(self.n_folds, data.n), self.seed)
        nuis = self._fit_nuisances(data, folds, spec)
        per = nuis.per_row(data, folds)
        loss = _OneStepLoss(data, folds, nuis, spec, per=per)
        criteria = {}
        predictions = {}
        for k in grid:
            basis = CosineBasis(k).fit(data.covariates)
            preds = np.empty(data.n)
            for j in range(folds.n_folds):
                train = folds.train_indices(j)
                test = folds.indices(j)
                if train.shape[0] == 0:
                    train = test
                result = debias_outcome_regression(
                    data,
                    folds,
                    nuis,
                    spec,
                    basis,
                    method=self.debias_method,
                    simplified=self.simplified,
                    ridge=self.ridge,
                    rows=train,
                    per=per,
                )
                mu1s, mu0s, _ = result.mu_star.per_row(data, folds, per=per)
                stage2 = _make_stage2(spec, self.stage2, self.stage2_frequencies)
                if spec.family == "crr":
                    mu1c = np.clip(mu1s, _CRR_MU_FLOOR, None)
                    mu0c = np.clip(mu0s, _CRR_MU_FLOOR, None)
                    weight = mu1c + mu0c
                    target = mu1c / weight
                    stage2.fit(
                        data.covariates[train], target[train], weight[train]
                    )
                else:
                    stage2.fit(data.covariates[train], (mu1s - mu0s)[train])
                preds[test] = stage2.predict(data.covariates[test])
            criteria[k] = float(np.mean(loss.rows(preds, np.arange(data.n))))
            predictions[k] = preds
        self.cv_criterion_ = criteria
        self.cv_predictions_ = predictions
        self.k_cv_ = self._select_k(criteria)
        inner = EPLearner(
            spec=spec,
            n_frequencies=self.k_cv_,
            debias_method=self.debias_method,
            simplified=self.simplified,
            stage2=self.stage2,
            stage2_frequencies=self.stage2_frequencies,
            ridge=self.ridge,
            n_folds=self.n_folds,
            propensity_learner=self.propensity_learner,
            outcome_learner=self.outcome_learner,
            propensity_clip=self.propensity_clip,
            nuisances=nuis,
            seed=self.seed,
        )
        inner.fit(data.covariates, data.treatment, data.outcome)
        self.final_ = inner
        self.score_residual_ = inner.score_residual_
        self.nuisances_ = nuis
        self.folds_ = folds

    def _predict_values(self, W):
        return self.final_.predict(W)


class KNNEPLearner(BaseContrastLearner):
    """Nearest-neighbor average of the adjusted pseudo-contrast.

    Predicts the mean of mu*(1, W_i) - mu*(0, W_i) over the K nearest
    training points. The default skips cross-fitting (n_folds=1), fitting
    the nuisances once on the full sample. Additive contrasts only.
    """

    method = "KNN_EP"

    def __init__(
        self,
        n_neighbors=3,
        n_frequencies=3,
        debias_method=None,
        ridge=1e-8,
        n_folds=1,
        propensity_learner=None,
        outcome_learner=None,
        propensity_clip=DEFAULT_PROPENSITY_CLIP,
        nuisances=None,
        seed=0,
    ):
        self.n_neighbors = n_neighbors
        self.n_frequencies = n_frequencies
        self.debias_method = debias_method
        self.ridge = ridge
        self.n_folds = n_folds
        self.propensity_learner = propensity_learner
        self.outcome_learner = outcome_learner
        self.propensity_clip = propensity_clip
        self.nuisances = nuisances
        self.seed = seed

    spec = "cate"

    def _fit(self, data):
        spec = resolve_spec("cate", data.outcome)
        self.family_ = "cate"
        folds = partition_folds(data.n, min(self.n_folds, data.n), self.seed)
        nuis = self._fit_nuisances(data, folds, spec)
        per = nuis.per_row(data, folds)
        basis = CosineBasis(int(self.n_frequencies)).fit(data.covariates)
        result = debias_outcome_regression(
            data,
            folds,
            nuis,
            spec,
            basis,
            method=self.debias_method,
            ridge=self.ridge,
            per=per,
        )
        self.score_residual_ = result.score_residual
        mu1s, mu0s, _ = result.mu_star.per_row(data, folds, per=per)
        self.pseudo_ = mu1s - mu0s
        self.model_ = KNNRegressor(n_neighbors=int(self.n_neighbors)).fit(
            data.covariates, self.pseudo_
        )
        self.nuisances_ = nuis
        self.folds_ = folds

    def _predict_values(self, W):
        return self.model_.predict(W)


def predict_contrast(model, W_query) -> np.ndarray:
    """Predict the fitted contrast at query covariate rows."""
    return model.predict(W_query)


_ENVELOPE_FORMAT = "eplearn-contrast-model"


def save_model(model, path) -> None:
    """Serialize a fitted learner with identifying metadata.

    The envelope is a pickle and round-trips predictions exactly (bit for
    bit) for the deterministic learners in this package.
    """
    envelope = {
        "format": _ENVELOPE_FORMAT,
        "version": 1,
        "method": getattr(model, "method", None),
        "family": getattr(model, "family_", None),
        "params": model.get_params(deep=False),
        "seed": getattr(model, "seed", None),
        "model": model,
    }
    with open(path, "wb") as fh:
        pickle.dump(envelope, fh, protocol=pickle.HIGHEST_PROTOCOL)


def load_model(path):
    with open(path, "rb") as fh:
        envelope = pickle.load(fh)
    if not isinstance(envelope, dict) or envelope.get("format") != _ENVELOPE_FORMAT:
        raise ValueError(f"{path} is not a serialized contrast model")
    return envelope["model"]
