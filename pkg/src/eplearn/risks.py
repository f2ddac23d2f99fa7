"""Generalized risk specifications and pointwise loss evaluation.

A risk specification bundles the scalar functions (h1, h2, g1, g2), their
derivatives, and the arm constants c[a][m] that define a pointwise loss

    L(w, theta) = h1(theta(w)) * sum_a c[a][1] g1(mu(a, w))
                + h2(theta(w)) * sum_a c[a][2] g2(mu(a, w)).

Two concrete instances are provided: the squared-error contrast loss whose
population minimizer is the CATE, and the relative-risk loss whose minimizer
is the log conditional relative risk.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .errors import NonFiniteLoss

Array = np.ndarray
ScalarFn = Callable[[Array], Array]


def _softplus(t):
    return np.logaddexp(0.0, t)


def _square(t):
    return np.asarray(t, dtype=float) ** 2


def _double(t):
    return 2.0 * np.asarray(t, dtype=float)


def _neg_double(t):
    return -2.0 * np.asarray(t, dtype=float)


def _const_two(t):
    return np.full_like(np.asarray(t, dtype=float), 2.0)


def _const_neg_two(t):
    return np.full_like(np.asarray(t, dtype=float), -2.0)


def _const_neg_one(t):
    return np.full_like(np.asarray(t, dtype=float), -1.0)


def _negate(t):
    return -np.asarray(t, dtype=float)


def _zeros(t):
    return np.zeros_like(np.asarray(t, dtype=float))


def _ones(t):
    return np.ones_like(np.asarray(t, dtype=float))


def _identity(t):
    return np.asarray(t, dtype=float)


def _bernoulli_variance(t):
    p = expit(t)
    return p * (1.0 - p)


@dataclass(frozen=True)
class RiskSpec:
    """Loss-defining tuple (h1, h2, g1, g2, c) with analytic derivatives.

    The arm constants are stored as ``c_m1 = (c[0][1], c[1][1])`` and
    ``c_m2 = (c[0][2], c[1][2])``, indexed by treatment arm. ``identity_links``
    is True iff g1 and g2 are both the identity. ``outcome_range`` is
    caller-declared metadata; outcomes are never rescaled internally.
    """

    family: str
    h1: ScalarFn
    dh1: ScalarFn
    ddh1: ScalarFn
    h2: ScalarFn
    dh2: ScalarFn
    ddh2: ScalarFn
    g1: ScalarFn
    dg1: ScalarFn
    g2: ScalarFn
    dg2: ScalarFn
    c_m1: tuple[float, float]
    c_m2: tuple[float, float]
    identity_links: bool
    outcome_range: Optional[tuple[float, float]] = None

    def c(self, m: int, a) -> Array:
        """Arm constant c[a][m] for scalar or vector treatment a."""
        pair = self.c_m1 if m == 1 else self.c_m2
        a = np.asarray(a)
        return np.where(a == 1, pair[1], pair[0])

    def arm_weight(self, m: int, a, mu_a) -> Array:
        """H_m(a, w) = c[a][m] * g_m'(mu(a, w))."""
        dg = self.dg1 if m == 1 else self.dg2
        return self.c(m, a) * dg(np.asarray(mu_a, dtype=float))

    def loss(self, theta, mu1, mu0) -> Array:
        """Pointwise loss given theta(w) and the two arm regressions."""
        theta = np.asarray(theta, dtype=float)
        s1 = self.c_m1[1] * self.g1(mu1) + self.c_m1[0] * self.g1(mu0)
        s2 = self.c_m2[1] * self.g2(mu1) + self.c_m2[0] * self.g2(mu0)
        return self.h1(theta) * s1 + self.h2(theta) * s2

    def loss_curvature(self, theta, mu1, mu0) -> Array:
        """Second derivative of the pointwise loss in theta."""
        theta = np.asarray(theta, dtype=float)
        s1 = self.c_m1[1] * self.g1(mu1) + self.c_m1[0] * self.g1(mu0)
        s2 = self.c_m2[1] * self.g2(mu1) + self.c_m2[0] * self.g2(mu0)
        return self.ddh1(theta) * s1 + self.ddh2(theta) * s2

    def correction(self, theta, a, y, mu_obs, pi_obs) -> Array:
        """Influence-function correction term for observed rows.

        Computes (1/pi(a|w)) * [H1(a,w) h1(theta) + H2(a,w) h2(theta)]
        * (y - mu(a, w)) elementwise.
        """
        theta = np.asarray(theta, dtype=float)
        bracket = self.arm_weight(1, a, mu_obs) * self.h1(theta) + self.arm_weight(
            2, a, mu_obs
        ) * self.h2(theta)
        return bracket * (np.asarray(y, dtype=float) - mu_obs) / np.asarray(pi_obs, dtype=float)


def cate_risk_spec(outcome_range=None) -> RiskSpec:
    """Squared-error contrast risk; its population minimizer is mu(1,.) - mu(0,.)."""
    return RiskSpec(
        family="cate",
        h1=_square,
        dh1=_double,
        ddh1=_const_two,
        h2=_neg_double,
        dh2=_const_neg_two,
        ddh2=_zeros,
        g1=_ones,
        dg1=_zeros,
        g2=_identity,
        dg2=_ones,
        c_m1=(0.0, 1.0),
        c_m2=(-1.0, 1.0),
        identity_links=False,
        outcome_range=tuple(outcome_range) if outcome_range is not None else None,
    )


def crr_risk_spec(outcome_range=None) -> RiskSpec:
    """Relative-risk loss; its population minimizer is log mu(1,.) - log mu(0,.)."""
    return RiskSpec(
        family="crr",
        h1=_softplus,
        dh1=expit,
        ddh1=_bernoulli_variance,
        h2=_negate,
        dh2=_const_neg_one,
        ddh2=_zeros,
        g1=_identity,
        dg1=_ones,
        g2=_identity,
        dg2=_ones,
        c_m1=(1.0, 1.0),
        c_m2=(0.0, 1.0),
        identity_links=True,
        outcome_range=tuple(outcome_range) if outcome_range is not None else None,
    )


def resolve_spec(spec, outcome=None) -> RiskSpec:
    """Resolve a family name ("cate" / "crr") or pass a RiskSpec through.

    When resolving from a name with outcomes available, ``outcome_range`` is
    set to (0, 1) iff every observed outcome is 0 or 1.
    """
    if isinstance(spec, RiskSpec):
        return spec
    rng = None
    if outcome is not None and np.isin(np.asarray(outcome), (0.0, 1.0)).all():
        rng = (0.0, 1.0)
    if spec == "cate":
        return cate_risk_spec(outcome_range=rng)
    if spec == "crr":
        return crr_risk_spec(outcome_range=rng)
    raise ValueError(f"unknown risk family {spec!r}")


def evaluate_loss(spec: RiskSpec, mu, theta_val, w) -> float:
    """Evaluate the pointwise loss at a covariate row.

    ``mu`` is a callable (a, w) -> real. Raises NonFiniteLoss when an
    intermediate value overflows.
    """
    w = np.asarray(w, dtype=float)
    mu1 = float(mu(1, w))
    mu0 = float(mu(0, w))
    with np.errstate(over="ignore", invalid="ignore"):
        val = spec.loss(float(theta_val), mu1, mu0)
    if not np.isfinite(val):
        raise NonFiniteLoss(
            f"loss overflowed at theta={theta_val!r}, mu1={mu1!r}, mu0={mu0!r}"
        )
    return float(val)
