"""Risk estimators, pseudo-outcome constructions, and the influence function.

The one-step risk adds the empirical influence-function correction to the
plug-in risk; the plug-in risk built on the sieve-adjusted outcome
regressions needs no such correction over the sieve span. The relative-risk
pseudo-pairs come in two flavors: the doubly robust pair, whose weights can
be negative under limited overlap, and the adjusted plug-in pair, whose
weights are positive and whose outcomes stay inside the unit interval by
construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .crossfit import FoldAssignment, NuisanceEstimates, RowNuisances
from .data import Dataset
from .errors import ZeroWeightWarning
from .risks import RiskSpec
from .sieve import DebiasedOutcome

DEFAULT_CRR_MU_FLOOR = 1e-3


def _theta_values(theta, W) -> np.ndarray:
    if callable(theta):
        vals = np.asarray(theta(W), dtype=float)
    else:
        vals = np.asarray(theta, dtype=float).ravel()
    if vals.shape[0] != W.shape[0]:
        raise ValueError("theta values do not match the number of rows")
    return vals


def dr_pseudo_outcome(mu1, mu0, a, y, pi_obs) -> np.ndarray:
    """Doubly robust contrast pseudo-outcome.

    mu(1,w) - mu(0,w) + (2a - 1) / pi(a|w) * (y - mu(a,w)), elementwise.
    """
    a = np.asarray(a, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    mu_obs = np.where(a == 1, mu1, mu0)
    return mu1 - mu0 + (2.0 * a - 1.0) / np.asarray(pi_obs, dtype=float) * (
        np.asarray(y, dtype=float) - mu_obs
    )


def dr_pseudo_outcomes(
    data: Dataset, folds: FoldAssignment, nuisances: NuisanceEstimates, per=None
) -> np.ndarray:
    """Per-row doubly robust pseudo-outcomes under cross-fitted nuisances."""
    if per is None:
        per = nuisances.per_row(data, folds)
    return dr_pseudo_outcome(per.mu1, per.mu0, data.treatment, data.outcome, per.pi_obs)


def onestep_risk(
    theta,
    data: Dataset,
    folds: FoldAssignment,
    nuisances: NuisanceEstimates,
    spec: RiskSpec,
    per: RowNuisances = None,
) -> float:
    """Plug-in risk plus the empirical influence-function correction.

    ``theta`` is a callable on covariate rows or a precomputed vector of
    theta(W_i) values.
    """
    if per is None:
        per = nuisances.per_row(data, folds)
    tv = _theta_values(theta, data.covariates)
    plug = spec.loss(tv, per.mu1, per.mu0)
    corr = spec.correction(tv, data.treatment, data.outcome, per.mu_obs, per.pi_obs)
    return float(np.mean(plug + corr))


def onestep_loss_values(
    theta,
    data: Dataset,
    folds: FoldAssignment,
    nuisances: NuisanceEstimates,
    spec: RiskSpec,
    per: RowNuisances = None,
) -> np.ndarray:
    """Per-row one-step loss contributions (the mean of which is the risk)."""
    if per is None:
        per = nuisances.per_row(data, folds)
    tv = _theta_values(theta, data.covariates)
    return spec.loss(tv, per.mu1, per.mu0) + spec.correction(
        tv, data.treatment, data.outcome, per.mu_obs, per.pi_obs
    )


def ep_plugin_risk(
    theta,
    data: Dataset,
    folds: FoldAssignment,
    mu_star,
    spec: RiskSpec,
) -> float:
    """Plug-in risk evaluated on (adjusted) outcome regressions.

    ``mu_star`` is any object with a ``per_row(data, folds)`` returning
    (mu1, mu0, mu_obs) or a NuisanceEstimates (whose per_row is adapted).
    """
    if isinstance(mu_star, NuisanceEstimates):
        per = mu_star.per_row(data, folds)
        mu1, mu0 = per.mu1, per.mu0
    else:
        mu1, mu0, _ = mu_star.per_row(data, folds)
    tv = _theta_values(theta, data.covariates)
    return float(np.mean(spec.loss(tv, mu1, mu0)))


def debias_term(
    theta,
    data: Dataset,
    folds: FoldAssignment,
    mu_star,
    nuisances: NuisanceEstimates,
    spec: RiskSpec,
) -> float:
    """Empirical influence-function correction at (pi_n, mu~).

    Uses the propensities from ``nuisances`` and the outcome regressions
    from ``mu_star`` (which may equal ``nuisances``).
    """
    per = nuisances.per_row(data, folds)
    if isinstance(mu_star, NuisanceEstimates):
        mu_obs = mu_star.per_row(data, folds).mu_obs
    else:
        _, _, mu_obs = mu_star.per_row(data, folds)
    tv = _theta_values(theta, data.covariates)
    corr = spec.correction(tv, data.treatment, data.outcome, mu_obs, per.pi_obs)
    return float(np.mean(corr))


@dataclass(frozen=True)
class PseudoRegression:
    """Second-stage regression inputs: per-row weights and outcomes.

    ``kept`` flags the rows usable by a weighted solver; rows with exactly
    zero weight are excluded (with a warning) because their pseudo-outcome
    is undefined. The two flags record whether any weight was negative and
    whether any kept outcome left the unit interval.
    """

    family: str
    pseudo_outcome: np.ndarray
    pseudo_weight: np.ndarray
    kept: np.ndarray
    any_negative_weight: bool
    any_outcome_outside_unit: bool

    @property
    def n_zero_weight(self) -> int:
        return int((~self.kept).sum())

    @property
    def negative_weight_count(self) -> int:
        return int((self.pseudo_weight < 0).sum())

    @property
    def outside_unit_count(self) -> int:
        out = self.pseudo_outcome[self.kept]
        return int(((out < 0) | (out > 1)).sum())


def crr_dr_pseudo(
    data: Dataset, folds: FoldAssignment, nuisances: NuisanceEstimates, per=None
) -> PseudoRegression:
    """Doubly robust relative-risk pseudo-pairs.

    Per row, each arm's regression value is corrected by the inverse-weighted
    residual when that arm was observed; the pair weight is the sum of the
    two corrected values and the pseudo-outcome is the treated share. Weights
    may be negative and outcomes may leave [0, 1] under limited overlap;
    rows with exactly zero weight are flagged and excluded.
    """
    if per is None:
        per = nuisances.per_row(data, folds)
    a = data.treatment.astype(float)
    y = data.outcome
    pi1 = per.pi1
    pi0 = 1.0 - per.pi1
    mu1_hat = per.mu1 + a / pi1 * (y - per.mu1)
    mu0_hat = per.mu0 + (1.0 - a) / pi0 * (y - per.mu0)
    weight = mu0_hat + mu1_hat
    kept = weight != 0.0
    if not kept.all():
        warnings.warn(
            f"{int((~kept).sum())} row(s) with exactly zero pseudo-weight excluded",
            ZeroWeightWarning,
            stacklevel=2,
        )
    outcome = np.zeros_like(weight)
    outcome[kept] = mu1_hat[kept] / weight[kept]
    kept_out = outcome[kept]
    return PseudoRegression(
        family="crr",
        pseudo_outcome=outcome,
        pseudo_weight=weight,
        kept=kept,
        any_negative_weight=bool((weight < 0).any()),
        any_outcome_outside_unit=bool(((kept_out < 0) | (kept_out > 1)).any()),
    )


def crr_ep_pseudo(
    data: Dataset,
    folds: FoldAssignment,
    mu_star: DebiasedOutcome,
    bounds=None,
) -> PseudoRegression:
    """Adjusted plug-in relative-risk pseudo-pairs.

    Weights are mu*(1,W) + mu*(0,W) > 0 and outcomes mu*(1,W) / weight lie in
    (0, 1), so any standard weighted logistic solver accepts them. ``bounds``
    clamps the adjusted regressions before composing (defaults to the
    nuisance clamp, else a 1e-3 floor).
    """
    if bounds is None:
        bounds = getattr(mu_star.nuisances, "outcome_bounds", None)
    if bounds is None:
        bounds = (DEFAULT_CRR_MU_FLOOR, None)
    lo, hi = bounds
    hi = np.inf if hi is None else hi
    mu1, mu0, _ = mu_star.per_row(data, folds)
    mu1 = np.clip(mu1, lo, hi)
    mu0 = np.clip(mu0, lo, hi)
    weight = mu1 + mu0
    outcome = mu1 / weight
    return PseudoRegression(
        family="crr",
        pseudo_outcome=outcome,
        pseudo_weight=weight,
        kept=np.ones(data.n, dtype=bool),
        any_negative_weight=bool((weight < 0).any()),
        any_outcome_outside_unit=bool(((outcome < 0) | (outcome > 1)).any()),
    )


def eif(w, a, y, theta, propensity1, outcome, spec: RiskSpec, risk_value: float):
    """Influence function of the theta-specific risk at given nuisances.

    ``theta`` maps covariate rows to contrast values, ``propensity1(W)``
    returns P(A=1 | W), and ``outcome(a, W)`` the outcome regression.
    ``risk_value`` centers the expression; supplying the true risk makes the
    result mean-zero under the truth.
    """
    W = np.atleast_2d(np.asarray(w, dtype=float))
    a = np.asarray(a, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if W.shape[0] == 1 and a.shape[0] != 1:
        W = np.repeat(W, a.shape[0], axis=0)
    tv = _theta_values(theta, W)
    mu1 = np.asarray(outcome(1, W), dtype=float)
    mu0 = np.asarray(outcome(0, W), dtype=float)
    mu_obs = np.where(a == 1, mu1, mu0)
    p1 = np.asarray(propensity1(W), dtype=float)
    pi_obs = np.where(a == 1, p1, 1.0 - p1)
    val = (
        spec.loss(tv, mu1, mu0)
        + spec.correction(tv, a, y, mu_obs, pi_obs)
        - risk_value
    )
    return val if val.shape[0] > 1 else float(val[0])
