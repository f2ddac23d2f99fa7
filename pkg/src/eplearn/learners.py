"""Self-contained regression learners used for nuisance and second-stage fits.

All estimators follow the scikit-learn protocol (``get_params`` /
``set_params`` / ``fit`` / ``predict``) so they clone and cross-validate
generically. Weighted fits accept a per-row ``sample_weight``; the two GLM
solvers additionally accept a fixed ``offset`` added to the linear predictor.
"""

from __future__ import annotations

import inspect
import warnings

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_array

from .errors import AllZeroWeights, KTooLarge, NoConvergence, SingularDesign

_SEPARATION_RIDGE = 1e-8
_WORK_WEIGHT_FLOOR = 1e-10


def _as_xy(X, y):
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_features=0)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    return X, y


def _weights(sample_weight, n):
    if sample_weight is None:
        return np.ones(n)
    w = np.asarray(sample_weight, dtype=np.float64).ravel()
    if w.shape[0] != n:
        raise ValueError("sample_weight length mismatch")
    if (w < 0).any():
        raise ValueError("sample_weight must be nonnegative")
    if not (w > 0).any():
        raise AllZeroWeights("all sample weights are zero")
    return w


def _offset(offset, n):
    if offset is None:
        return np.zeros(n)
    off = np.asarray(offset, dtype=np.float64).ravel()
    if off.shape[0] != n:
        raise ValueError("offset length mismatch")
    return off


class WeightedLinearRegression(BaseEstimator, RegressorMixin):
    """Weighted least squares with a fixed offset and optional ridge penalty.

    Minimizes sum_i w_i (y_i - offset_i - x_i' beta)^2 + ridge * ||beta||^2
    through an SVD-based solve of the weighted system (stable under
    near-collinearity). With ``ridge == 0`` a rank-deficient design raises
    SingularDesign.
    """

    def __init__(self, ridge=0.0, fit_intercept=False):
        self.ridge = ridge
        self.fit_intercept = fit_intercept

    def fit(self, X, y, sample_weight=None, offset=None):
        X, y = _as_xy(X, y)
        n, p = X.shape
        w = _weights(sample_weight, n)
        off = _offset(offset, n)
        self.n_features_in_ = p
        if self.fit_intercept:
            X = np.hstack([np.ones((n, 1)), X])
            p += 1
        if p == 0:
            self.coef_ = np.zeros(0)
            self.rank_ = 0
            return self
        sw = np.sqrt(w)
        A = X * sw[:, None]
        b = (y - off) * sw
        if self.ridge > 0:
            A = np.vstack([A, np.sqrt(self.ridge) * np.eye(p)])
            b = np.concatenate([b, np.zeros(p)])
        beta, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
        if self.ridge == 0 and rank < p:
            raise SingularDesign(
                f"weighted design has rank {rank} < {p}; add a ridge penalty"
            )
        self.coef_ = beta
        self.rank_ = int(rank)
        return self

    def _linpred(self, X, offset):
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        off = _offset(offset, X.shape[0])
        if self.fit_intercept:
            X = np.hstack([np.ones((X.shape[0], 1)), X])
        if X.shape[1] != self.coef_.shape[0]:
            raise ValueError(
                f"X has {X.shape[1]} columns, model was fit with {self.coef_.shape[0]}"
            )
        return off + X @ self.coef_

    def predict(self, X, offset=None):
        return self._linpred(X, offset)


class WeightedLogisticRegression(BaseEstimator, RegressorMixin):
    """Weighted Bernoulli quasi-likelihood GLM fit by IRLS.

    Accepts fractional responses in [0, 1], per-row weights, a fixed offset
    on the logit scale, and an optional ridge penalty (penalty term
    ``ridge/2 * ||beta||^2``). Convergence requires both a deviance change
    below ``dev_tol`` and a score infinity-norm below ``grad_tol``. When an
    unpenalized fit fails to converge (quasi-separation), the solver retries
    once with a 1e-8 ridge; if that also fails, NoConvergence is raised with
    the final gradient norm.
    """

    def __init__(
        self,
        ridge=0.0,
        fit_intercept=False,
        max_iter=100,
        grad_tol=1e-6,
        dev_tol=1e-10,
    ):
        self.ridge = ridge
        self.fit_intercept = fit_intercept
        self.max_iter = max_iter
        self.grad_tol = grad_tol
        self.dev_tol = dev_tol

    def fit(self, X, y, sample_weight=None, offset=None):
        X, y = _as_xy(X, y)
        if ((y < 0) | (y > 1)).any():
            raise ValueError("logistic responses must lie in [0, 1]")
        n, p = X.shape
        w = _weights(sample_weight, n)
        off = _offset(offset, n)
        self.n_features_in_ = p
        if self.fit_intercept:
            X = np.hstack([np.ones((n, 1)), X])
            p += 1
        if p == 0:
            self.coef_ = np.zeros(0)
            self.converged_ = True
            self.grad_norm_ = 0.0
            self.n_iter_ = 0
            self.ridge_used_ = self.ridge
            return self
        beta, converged, grad_norm, n_iter = _irls(
            X, y, w, off, self.ridge, self.max_iter, self.grad_tol, self.dev_tol
        )
        ridge_used = self.ridge
        if not converged and self.ridge == 0:
            beta, converged, grad_norm, n_iter = _irls(
                X, y, w, off, _SEPARATION_RIDGE, self.max_iter, self.grad_tol, self.dev_tol
            )
            ridge_used = _SEPARATION_RIDGE
        if not converged:
            raise NoConvergence(
                f"IRLS did not converge in {self.max_iter} iterations "
                f"(final gradient norm {grad_norm:.3e})"
            )
        self.coef_ = beta
        self.converged_ = True
        self.grad_norm_ = grad_norm
        self.n_iter_ = n_iter
        self.ridge_used_ = ridge_used
        return self

    def _linpred(self, X, offset):
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        off = _offset(offset, X.shape[0])
        if self.fit_intercept:
            X = np.hstack([np.ones((X.shape[0], 1)), X])
        if X.shape[1] != self.coef_.shape[0]:
            raise ValueError(
                f"X has {X.shape[1]} columns, model was fit with {self.coef_.shape[0]}"
            )
        return off + X @ self.coef_

    def decision_function(self, X, offset=None):
        """Linear predictor on the logit scale."""
        return self._linpred(X, offset)

    def predict(self, X, offset=None):
        """Predicted conditional mean, guaranteed inside (0, 1)."""
        return expit(self._linpred(X, offset))


def _penalized_nll(y, w, eta, ridge, beta):
    # Bernoulli quasi-log-likelihood: y*eta - log(1 + exp(eta)), valid for
    # fractional y; the saturated part is constant in beta.
    ll = np.sum(w * (y * eta - np.logaddexp(0.0, eta)))
    return -ll + 0.5 * ridge * float(beta @ beta)


def _irls(X, y, w, off, ridge, max_iter, grad_tol, dev_tol):
    p = X.shape[1]
    beta = np.zeros(p)
    eta = off.copy()
    nll = _penalized_nll(y, w, eta, ridge, beta)
    grad_norm = np.inf
    for it in range(1, max_iter + 1):
        mu = expit(eta)
        grad = X.T @ (w * (y - mu)) - ridge * beta
        grad_norm = float(np.max(np.abs(grad))) if p else 0.0
        wk = np.maximum(w * mu * (1.0 - mu), _WORK_WEIGHT_FLOOR)
        H = (X * wk[:, None]).T @ X
        if ridge > 0:
            H[np.diag_indices_from(H)] += ridge
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        # Backtracking keeps the penalized objective monotone.
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            eta_cand = off + X @ cand
            nll_cand = _penalized_nll(y, w, eta_cand, ridge, cand)
            if nll_cand <= nll + 1e-14:
                break
            scale *= 0.5
        else:
            return beta, grad_norm < grad_tol, grad_norm, it
        delta = nll - nll_cand
        beta, eta, nll = cand, eta_cand, nll_cand
        if not np.isfinite(beta).all():
            return beta, False, grad_norm, it
        mu = expit(eta)
        grad = X.T @ (w * (y - mu)) - ridge * beta
        grad_norm = float(np.max(np.abs(grad))) if p else 0.0
        if grad_norm < grad_tol and abs(delta) < dev_tol:
            return beta, True, grad_norm, it
    return beta, grad_norm < grad_tol, grad_norm, max_iter


class KNNRegressor(BaseEstimator, RegressorMixin):
    """k-nearest-neighbors mean under the Euclidean norm.

    Exact distance ties are broken toward the lowest training index, which
    makes predictions deterministic and (up to such ties) invariant to row
    permutations of the training data.
    """

    _chunk = 512

    def __init__(self, n_neighbors=5):
        self.n_neighbors = n_neighbors

    def fit(self, X, y, sample_weight=None):
        X, y = _as_xy(X, y)
        k = int(self.n_neighbors)
        if k < 1:
            raise ValueError("n_neighbors must be >= 1")
        if k > X.shape[0]:
            raise KTooLarge(f"n_neighbors={k} exceeds training size {X.shape[0]}")
        self.X_ = X
        self.y_ = y
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("query dimension mismatch")
        k = int(self.n_neighbors)
        out = np.empty(X.shape[0])
        sq_train = np.einsum("ij,ij->i", self.X_, self.X_)
        for start in range(0, X.shape[0], self._chunk):
            Q = X[start : start + self._chunk]
            d2 = sq_train[None, :] - 2.0 * (Q @ self.X_.T)
            d2 += np.einsum("ij,ij->i", Q, Q)[:, None]
            # stable sort preserves index order on exact ties
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
            out[start : start + self._chunk] = self.y_[nearest].mean(axis=1)
        return out


class KernelRegression(BaseEstimator, RegressorMixin):
    """Nadaraya-Watson smoother with a Gaussian kernel.

    Falls back to the global training mean at query points where the kernel
    mass underflows to zero.
    """

    _chunk = 512

    def __init__(self, bandwidth=1.0):
        self.bandwidth = bandwidth

    def fit(self, X, y, sample_weight=None):
        X, y = _as_xy(X, y)
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        self.X_ = X
        self.y_ = y
        self.mean_ = float(y.mean())
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("query dimension mismatch")
        h2 = 2.0 * float(self.bandwidth) ** 2
        out = np.empty(X.shape[0])
        sq_train = np.einsum("ij,ij->i", self.X_, self.X_)
        for start in range(0, X.shape[0], self._chunk):
            Q = X[start : start + self._chunk]
            d2 = sq_train[None, :] - 2.0 * (Q @ self.X_.T)
            d2 += np.einsum("ij,ij->i", Q, Q)[:, None]
            np.maximum(d2, 0.0, out=d2)
            kern = np.exp(-d2 / h2)
            denom = kern.sum(axis=1)
            num = kern @ self.y_
            safe = denom > 0
            vals = np.where(safe, num / np.where(safe, denom, 1.0), self.mean_)
            out[start : start + self._chunk] = vals
        return out


class GradientBoostedTrees(BaseEstimator, RegressorMixin):
    """Least-squares gradient boosting over axis-aligned regression trees.

    Splits maximize the weighted-SSE reduction over midpoints of sorted
    distinct feature values; leaves predict weighted means. The fit starts
    from the weighted mean of the targets and is fully deterministic (no
    subsampling). ``max_depth`` must lie in [1, 8].
    """

    def __init__(self, n_rounds=100, max_depth=2, learning_rate=0.1):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate

    def fit(self, X, y, sample_weight=None):
        X, y = _as_xy(X, y)
        if not 1 <= int(self.max_depth) <= 8:
            raise ValueError("max_depth must be in [1, 8]")
        if int(self.n_rounds) < 1:
            raise ValueError("n_rounds must be >= 1")
        n = X.shape[0]
        w = _weights(sample_weight, n)
        self.n_features_in_ = X.shape[1]
        order = [np.argsort(X[:, f], kind="stable") for f in range(X.shape[1])]
        tot_w = w.sum()
        self.baseline_ = float((w * y).sum() / tot_w)
        pred = np.full(n, self.baseline_)
        self.trees_ = []
        losses = [float((w * (y - pred) ** 2).sum())]
        for _ in range(int(self.n_rounds)):
            resid = y - pred
            tree = _fit_tree(X, resid, w, order, int(self.max_depth))
            self.trees_.append(tree)
            pred = pred + self.learning_rate * _predict_tree(tree, X)
            losses.append(float((w * (y - pred) ** 2).sum()))
        self.train_loss_ = np.asarray(losses)
        return self

    def predict(self, X):
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("query dimension mismatch")
        out = np.full(X.shape[0], self.baseline_)
        for tree in self.trees_:
            out += self.learning_rate * _predict_tree(tree, X)
        return out


def _fit_tree(X, r, w, order, max_depth):
    """Grow one depth-limited SSE tree; returns flat node arrays."""
    feature, threshold, left, right, value = [], [], [], [], []

    def leaf(node_w_sum, node_wr_sum):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(node_wr_sum / node_w_sum if node_w_sum > 0 else 0.0)
        return len(feature) - 1

    def grow(sorted_ids, depth):
        ids = sorted_ids[0]
        ws = w[ids]
        node_w = ws.sum()
        node_wr = (ws * r[ids]).sum()
        if depth == 0 or ids.shape[0] < 2 or node_w <= 0:
            return leaf(node_w, node_wr)
        base = node_wr * node_wr / node_w
        best_gain, best_f, best_thr = 0.0, -1, 0.0
        for f in range(X.shape[1]):
            idf = sorted_ids[f]
            xs = X[idf, f]
            wf = w[idf]
            cw = np.cumsum(wf)[:-1]
            cwr = np.cumsum(wf * r[idf])[:-1]
            rw = node_w - cw
            rwr = node_wr - cwr
            valid = (xs[:-1] < xs[1:]) & (cw > 0) & (rw > 0)
            if not valid.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = cwr * cwr / cw + rwr * rwr / rw - base
            gain[~valid] = -np.inf
            pos = int(np.argmax(gain))
            if gain[pos] > best_gain + 1e-12:
                best_gain = float(gain[pos])
                best_f = f
                best_thr = 0.5 * (xs[pos] + xs[pos + 1])
        if best_f < 0:
            return leaf(node_w, node_wr)
        node = len(feature)
        feature.append(best_f)
        threshold.append(best_thr)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        go_left = X[:, best_f] <= best_thr
        left_ids = [idf[go_left[idf]] for idf in sorted_ids]
        right_ids = [idf[~go_left[idf]] for idf in sorted_ids]
        left[node] = grow(left_ids, depth - 1)
        right[node] = grow(right_ids, depth - 1)
        return node

    root = grow(order, max_depth)
    return (
        root,
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value),
    )


def _predict_tree(tree, X):
    root, feature, threshold, left, right, value = tree
    node = np.full(X.shape[0], root, dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        idx = np.flatnonzero(active)
        cur = node[idx]
        xv = X[idx, feature[cur]]
        node[idx] = np.where(xv <= threshold[cur], left[cur], right[cur])
        active[idx] = feature[node[idx]] >= 0
    return value[node]


def supports_sample_weight(estimator) -> bool:
    return "sample_weight" in inspect.signature(estimator.fit).parameters


def fit_with_weight(estimator, X, y, sample_weight=None):
    """Fit handling learners without a sample_weight parameter."""
    if sample_weight is None:
        return estimator.fit(X, y)
    if supports_sample_weight(estimator):
        return estimator.fit(X, y, sample_weight=sample_weight)
    w = np.asarray(sample_weight, dtype=float)
    if np.ptp(w) > 0:
        raise ValueError(
            f"{type(estimator).__name__} does not support non-uniform sample weights"
        )
    return estimator.fit(X, y)


def cv_select(
    candidates,
    X,
    y,
    sample_weight=None,
    n_folds=10,
    seed=0,
    eval_y=None,
    eval_weight=None,
):
    """Pick the candidate minimizing cross-validated weighted squared error.

    Candidates are unfitted estimator prototypes; the winning prototype is
    returned unfitted (clone it before use). Ties break toward the earlier
    list position. ``eval_y`` / ``eval_weight`` override the held-out
    evaluation target and weights (defaults: the fitting target and weights),
    which lets callers score fits against a different pseudo-outcome.
    """
    from .crossfit import partition_folds

    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidates must be non-empty")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    ey = y if eval_y is None else np.asarray(eval_y, dtype=float).ravel()
    if eval_weight is None:
        ew = np.ones(n) if sample_weight is None else np.asarray(sample_weight, float)
    else:
        ew = np.asarray(eval_weight, dtype=float).ravel()
    if len(candidates) == 1:
        return candidates[0]
    folds = partition_folds(n, min(n_folds, n), seed)
    scores = np.zeros(len(candidates))
    for j in range(folds.n_folds):
        test = folds.indices(j)
        train = folds.train_indices(j)
        w_tr = None if sample_weight is None else np.asarray(sample_weight, float)[train]
        for c, proto in enumerate(candidates):
            model = fit_with_weight(clone(proto), X[train], y[train], w_tr)
            pred = model.predict(X[test])
            scores[c] += float(np.sum(ew[test] * (ey[test] - pred) ** 2))
    return candidates[int(np.argmin(scores))]


_LEARNER_KINDS = {
    "wls": WeightedLinearRegression,
    "logistic": WeightedLogisticRegression,
    "knn": KNNRegressor,
    "kernel": KernelRegression,
    "boosted_stumps": GradientBoostedTrees,
}

_LEARNER_PARAM_KEYS = {
    "wls": {"ridge", "fit_intercept"},
    "logistic": {"ridge", "fit_intercept", "max_iter"},
    "knn": {"n_neighbors"},
    "kernel": {"bandwidth"},
    "boosted_stumps": {"n_rounds", "max_depth", "learning_rate"},
}


def make_learner(kind: str, **params):
    """Instantiate a learner by its config name with validated parameters."""
    if kind not in _LEARNER_KINDS:
        raise ValueError(
            f"unknown learner kind {kind!r}; choose from {sorted(_LEARNER_KINDS)}"
        )
    allowed = _LEARNER_PARAM_KEYS[kind]
    extra = set(params) - allowed
    if extra:
        raise ValueError(f"learner {kind!r} does not accept parameters {sorted(extra)}")
    return _LEARNER_KINDS[kind](**params)
