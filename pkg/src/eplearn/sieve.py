"""Cosine sieve features and the outcome-regression debiasing adjustment.

The adjustment refits the initial outcome regression along a data-dependent
feature map so that the empirical influence-function correction term
vanishes over the span of the sieve. Three variants are provided:

* method 1 - outcomes in [0, 1]; logistic-link adjustment;
* method 2 - general outcomes; additive adjustment;
* method 3 - general outcomes with bound preservation: outcomes are mapped
  onto [0, 1] using the pooled range of observed outcomes and initial fits,
  method 1 runs on the transformed scale, and predictions are mapped back.

All three solve the weighted score equations of the corresponding
regression, so the residual reported by :func:`check_score_equation` is zero
up to solver tolerance whenever the ridge penalty is zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit, logit
from sklearn.base import BaseEstimator, TransformerMixin

from .crossfit import FoldAssignment, NuisanceEstimates, RowNuisances
from .data import Dataset
from .errors import DegenerateRangeWarning, MethodOutcomeMismatch
from .learners import WeightedLinearRegression, WeightedLogisticRegression
from .risks import RiskSpec

_LOGIT_EPS = 1e-10


class CosineBasis(BaseEstimator, TransformerMixin):
    """Additive cosine feature map on per-dimension rescaled covariates.

    Each covariate dimension is rescaled to [0, 1] using the training range
    (queries are clipped), then expanded into cos(pi * f * u) for
    f = 1..n_frequencies. Features from all kept dimensions are concatenated,
    so the output has ``n_frequencies * n_kept_dims`` columns and every
    feature lies in [-1, 1]. Constant dimensions are dropped with a
    DegenerateRangeWarning. There is no intercept feature; offsets carry the
    level in downstream regressions.
    """

    def __init__(self, n_frequencies=6):
        self.n_frequencies = n_frequencies

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be 2-d")
        if int(self.n_frequencies) < 0:
            raise ValueError("n_frequencies must be >= 0")
        self.n_features_in_ = X.shape[1]
        mins = X.min(axis=0)
        maxs = X.max(axis=0)
        kept = maxs > mins
        if not kept.all():
            dropped = np.flatnonzero(~kept).tolist()
            warnings.warn(
                f"constant covariate dimension(s) {dropped} dropped from basis",
                DegenerateRangeWarning,
                stacklevel=2,
            )
        self.mins_ = mins
        self.maxs_ = maxs
        self.kept_dims_ = np.flatnonzero(kept)
        return self

    @property
    def n_output_features_(self) -> int:
        return int(self.n_frequencies) * self.kept_dims_.shape[0]

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError("query dimension mismatch")
        k = int(self.n_frequencies)
        n = X.shape[0]
        out = np.empty((n, self.n_output_features_))
        freqs = np.arange(1, k + 1)
        for pos, dim in enumerate(self.kept_dims_):
            span = self.maxs_[dim] - self.mins_[dim]
            u = np.clip((X[:, dim] - self.mins_[dim]) / span, 0.0, 1.0)
            out[:, pos * k : (pos + 1) * k] = np.cos(np.pi * np.outer(u, freqs))
        return out


class LinearBasis(BaseEstimator, TransformerMixin):
    """Identity feature map; with it the adjustment acts on the raw span of W."""

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def n_output_features_(self) -> int:
        return self.n_features_in_

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("query dimension mismatch")
        return X


def _resolve_simplified(spec: RiskSpec, simplified) -> bool:
    if simplified is None:
        return spec.family == "cate"
    if simplified and spec.family != "cate":
        raise ValueError("simplified features require the contrast-difference family")
    return bool(simplified)


def _scaled_features(spec, simplified, a, mu_vals, phi):
    """Basis columns scaled by the arm weights H_m(a, w)."""
    h1 = spec.arm_weight(1, a, mu_vals)
    h2 = spec.arm_weight(2, a, mu_vals)
    if simplified:
        return (h1 + h2)[:, None] * phi
    return np.hstack([h1[:, None] * phi, h2[:, None] * phi])


def build_debias_features(
    data: Dataset,
    folds: FoldAssignment,
    nuisances: NuisanceEstimates,
    spec: RiskSpec,
    basis,
    simplified=None,
    rows=None,
) -> np.ndarray:
    """Per-observation adjustment features at the observed (A_i, W_i).

    General mode stacks the two arm-weighted copies of the basis
    (2 * n_output_features columns); simplified mode collapses them to the
    summed arm weight (n_output_features columns), valid only for the
    contrast-difference family where it equals (2 a - 1) * phi(w).
    """
    simplified = _resolve_simplified(spec, simplified)
    idx = np.arange(data.n) if rows is None else np.asarray(rows)
    per = nuisances.per_row(data, folds)
    phi = basis.transform(data.covariates[idx])
    return _scaled_features(spec, simplified, data.treatment[idx], per.mu_obs[idx], phi)


@dataclass(frozen=True)
class DebiasedOutcome:
    """Adjusted per-fold outcome predictors mu*(a, w).

    Evaluates g^{-1}(g(mu_j(a, w)) + features(a, w)' beta) where g is the
    method-specific link and the features are built from the fold-j initial
    outcome regression.
    """

    nuisances: NuisanceEstimates
    spec: RiskSpec
    basis: object
    simplified: bool
    method: int
    beta: np.ndarray
    lo: float = 0.0
    hi: float = 1.0

    @property
    def n_folds(self) -> int:
        return self.nuisances.n_folds

    def _adjust(self, a_vec, mu, phi) -> np.ndarray:
        if self.beta.shape[0] == 0:
            return np.asarray(mu, dtype=float)
        feats = _scaled_features(self.spec, self.simplified, a_vec, mu, phi)
        adj = feats @ self.beta
        if self.method == 2:
            return mu + adj
        t = np.clip((mu - self.lo) / (self.hi - self.lo), _LOGIT_EPS, 1.0 - _LOGIT_EPS)
        return self.lo + (self.hi - self.lo) * expit(logit(t) + adj)

    def outcome(self, j: int, a, W) -> np.ndarray:
        W = np.asarray(W, dtype=float)
        a_vec = np.broadcast_to(np.asarray(a), (W.shape[0],))
        mu = self.nuisances.outcome(j, a_vec, W)
        if self.beta.shape[0] == 0:
            return mu
        return self._adjust(a_vec, mu, self.basis.transform(W))

    def per_row(self, data: Dataset, folds: FoldAssignment, per: RowNuisances = None):
        """Arrays (mu*_1, mu*_0, mu*_obs) evaluated at each row's own fold."""
        if per is None:
            per = self.nuisances.per_row(data, folds)
        if self.beta.shape[0] == 0:
            return per.mu1, per.mu0, per.mu_obs
        phi = self.basis.transform(data.covariates)
        ones = np.ones(data.n, dtype=np.int64)
        mu1 = self._adjust(ones, per.mu1, phi)
        mu0 = self._adjust(np.zeros(data.n, dtype=np.int64), per.mu0, phi)
        mu_obs = np.where(data.treatment == 1, mu1, mu0)
        return mu1, mu0, mu_obs


@dataclass(frozen=True)
class DebiasResult:
    """Fitted adjustment: coefficients, method, and the residual of the
    score equations over the sieve (max absolute coordinate)."""

    beta: np.ndarray
    method: int
    simplified: bool
    score_residual: float
    mu_star: DebiasedOutcome
    lo: float = 0.0
    hi: float = 1.0


def _auto_method(spec: RiskSpec) -> int:
    if spec.outcome_range is not None and tuple(spec.outcome_range) == (0.0, 1.0):
        return 1
    return 2


def debias_outcome_regression(
    data: Dataset,
    folds: FoldAssignment,
    nuisances: NuisanceEstimates,
    spec: RiskSpec,
    basis,
    method: Optional[int] = None,
    simplified=None,
    ridge: float = 1e-8,
    rows=None,
    per: RowNuisances = None,
) -> DebiasResult:
    """Fit the sieve adjustment and return the debiased outcome regressions.

    ``method=None`` selects method 1 when the spec declares outcomes in
    [0, 1] and method 2 otherwise; method 3 must be requested explicitly.
    ``rows`` restricts the adjustment regression to a subset of observations
    (used by the cross-validated sieve selection); the returned predictors
    are usable on any fold either way. ``per`` optionally supplies
    precomputed per-row nuisance evaluations.
    """
    simplified = _resolve_simplified(spec, simplified)
    if method is None:
        method = _auto_method(spec)
    if method not in (1, 2, 3):
        raise ValueError(f"method must be 1, 2, or 3, got {method!r}")
    idx = np.arange(data.n) if rows is None else np.asarray(rows)
    if per is None:
        per = nuisances.per_row(data, folds)
    y = data.outcome[idx]
    mu_obs = per.mu_obs[idx]
    weights = 1.0 / per.pi_obs[idx]

    lo, hi = 0.0, 1.0
    if method == 1 and ((data.outcome < 0) | (data.outcome > 1)).any():
        raise MethodOutcomeMismatch(
            "method 1 requires outcomes in [0, 1]; use method 2 or 3"
        )
    if method == 3:
        pooled = np.concatenate([y, mu_obs])
        lo = float(pooled.min())
        hi = float(pooled.max())
        if hi <= lo:
            hi = lo + 1.0

    phi = basis.transform(data.covariates[idx])
    feats = _scaled_features(spec, simplified, data.treatment[idx], mu_obs, phi)
    if feats.shape[1] == 0:
        beta = np.zeros(0)
    elif method == 2:
        reg = WeightedLinearRegression(ridge=ridge).fit(
            feats, y, sample_weight=weights, offset=mu_obs
        )
        beta = reg.coef_
    else:
        if method == 1:
            target = y
            off_mu = mu_obs
        else:
            target = (y - lo) / (hi - lo)
            off_mu = (mu_obs - lo) / (hi - lo)
        off = logit(np.clip(off_mu, _LOGIT_EPS, 1.0 - _LOGIT_EPS))
        reg = WeightedLogisticRegression(ridge=ridge).fit(
            feats, target, sample_weight=weights, offset=off
        )
        beta = reg.coef_

    mu_star = DebiasedOutcome(
        nuisances=nuisances,
        spec=spec,
        basis=basis,
        simplified=simplified,
        method=method,
        beta=beta,
        lo=lo,
        hi=hi,
    )
    residual = check_score_equation(
        data,
        folds,
        nuisances,
        spec,
        basis,
        simplified=simplified,
        mu_star=mu_star,
        rows=rows,
        per=per,
    )
    return DebiasResult(
        beta=beta,
        method=method,
        simplified=simplified,
        score_residual=residual,
        mu_star=mu_star,
        lo=lo,
        hi=hi,
    )


def check_score_equation(
    data: Dataset,
    folds: FoldAssignment,
    nuisances: NuisanceEstimates,
    spec: RiskSpec,
    basis,
    simplified=None,
    mu_star: Optional[DebiasedOutcome] = None,
    rows=None,
    per: RowNuisances = None,
) -> float:
    """Max absolute empirical score over unit elements of the sieve.

    Evaluates, for each feature coordinate psi, the average over rows of
    (1 / pi(A_i | W_i)) * [sum_m H_m(A_i, W_i) psi_m(W_i)] * (Y_i - mu~(A_i, W_i)),
    where mu~ is the adjusted outcome regression when ``mu_star`` is given
    and the initial one otherwise. An empty basis yields 0.
    """
    idx = np.arange(data.n) if rows is None else np.asarray(rows)
    if idx.shape[0] == 0:
        return 0.0
    simplified = _resolve_simplified(spec, simplified)
    if per is None:
        per = nuisances.per_row(data, folds)
    phi = basis.transform(data.covariates[idx])
    feats = _scaled_features(
        spec, simplified, data.treatment[idx], per.mu_obs[idx], phi
    )
    if feats.shape[1] == 0:
        return 0.0
    if mu_star is None:
        mu_tilde = per.mu_obs[idx]
    else:
        _, _, mu_obs_star = mu_star.per_row(data, folds, per=per)
        mu_tilde = mu_obs_star[idx]
    resid = (data.outcome[idx] - mu_tilde) / per.pi_obs[idx]
    return float(np.max(np.abs(feats.T @ resid)) / idx.shape[0])
