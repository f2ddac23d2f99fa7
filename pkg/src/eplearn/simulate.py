"""Seeded data-generating processes and the Monte Carlo benchmark runner.

Four scenario families are provided:

* ``cate_lowdim`` - three uniform covariates, Gaussian outcomes, additive
  contrast; moderate or limited treatment overlap, simple or complex
  contrast shape.
* ``cate_highdim`` - twenty correlated truncated-normal covariates with
  five active ones.
* ``crr`` - three uniform covariates, Bernoulli outcomes, log-ratio
  contrast.
* ``intro`` - a single heavy-tailed covariate with a bell-shaped binary
  contrast (overlap/complexity settings do not apply).

Benchmark cells are seeded by a stable hash of the base seed and the cell
coordinates, so each cell is reproducible in isolation and results are
independent of scheduling.
"""

from __future__ import annotations

import hashlib
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .data import Dataset
from .meta import (
    CVEPLearner,
    DRLearner,
    EPLearner,
    IPWELearner,
    KNNEPLearner,
    RLearner,
    TLearner,
)
from .learners import make_learner, WeightedLogisticRegression
from .pseudo import crr_dr_pseudo

FAMILIES = ("cate_lowdim", "cate_highdim", "crr", "intro")
OVERLAPS = ("moderate", "limited")
COMPLEXITIES = ("simple", "complex")
CATE_METHODS = ("t", "dr", "r", "ep", "cv_ep", "knn_ep")
CRR_METHODS = ("t", "ipw_e", "ep", "cv_ep")
MIN_N = 50

_HIGHDIM_DIM = 20
_HIGHDIM_COV = 0.4
_HIGHDIM_PI_IDX = (0, 4, 8, 10, 18)     # w1, w5, w9, w11, w19
_HIGHDIM_MU_TRIG = (0, 4, 8)            # w1, w5, w9
_HIGHDIM_MU_INV = (14, 9)               # w15, w10
_HIGHDIM_ACTIVE = (0, 4, 8, 14, 9)      # w1, w5, w9, w15, w10


@dataclass(frozen=True)
class ScenarioConfig:
    family: str
    n: int
    seed: int
    overlap: str = "moderate"
    complexity: str = "simple"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.overlap not in OVERLAPS:
            raise ValueError(f"unknown overlap {self.overlap!r}; choose from {OVERLAPS}")
        if self.complexity not in COMPLEXITIES:
            raise ValueError(
                f"unknown complexity {self.complexity!r}; choose from {COMPLEXITIES}"
            )
        if self.n < MIN_N:
            raise ValueError(f"n must be at least {MIN_N}, got {self.n}")

    @property
    def contrast_family(self) -> str:
        return "crr" if self.family == "crr" else "cate"


@dataclass(frozen=True)
class SimulatedDraw:
    """A dataset together with the functions that generated it."""

    config: ScenarioConfig
    dataset: Dataset
    theta0: Callable[[np.ndarray], np.ndarray]
    propensity1: Callable[[np.ndarray], np.ndarray]
    outcome: Callable[[int, np.ndarray], np.ndarray]


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from string-able parts (sha256 based)."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


# ---------------------------------------------------------------------------
# scenario definitions


def _lowdim_mu0(W):
    return np.sum(W / 2.0 + np.sin(5.0 * W) + 1.0 / (W + 1.2), axis=1)


def _lowdim_theta(complexity):
    if complexity == "simple":
        return lambda W: 1.0 + W.sum(axis=1)
    return lambda W: 1.0 + np.sum(W + np.sin(5.0 * W), axis=1)


def _lowdim_propensity(overlap):
    scale = 1.0 / 3.0 if overlap == "moderate" else 1.0
    return lambda W: expit(scale * W.sum(axis=1))


def _highdim_cholesky() -> np.ndarray:
    cov = np.full((_HIGHDIM_DIM, _HIGHDIM_DIM), _HIGHDIM_COV)
    np.fill_diagonal(cov, 1.0)
    return np.linalg.cholesky(cov)


_HIGHDIM_CHOL = _highdim_cholesky()


def sample_truncated_mvn(rng: np.random.Generator, n: int):
    """Rejection-sample the correlated normal restricted to the [-2, 2] box.

    Returns the accepted draws and the number of proposals consumed.
    """
    out = np.empty((n, _HIGHDIM_DIM))
    filled = 0
    proposed = 0
    while filled < n:
        batch = max(2 * (n - filled), 64)
        Z = rng.standard_normal((batch, _HIGHDIM_DIM)) @ _HIGHDIM_CHOL.T
        proposed += batch
        ok = Z[(np.abs(Z) <= 2.0).all(axis=1)]
        take = min(ok.shape[0], n - filled)
        out[filled : filled + take] = ok[:take]
        filled += take
    return out, proposed


def _highdim_mu0(W):
    t = _HIGHDIM_MU_TRIG
    i = _HIGHDIM_MU_INV
    return (
        np.cos(4.0 * W[:, t[0]])
        + np.cos(4.0 * W[:, t[1]])
        + np.sin(4.0 * W[:, t[2]])
        + 1.0 / (1.5 + W[:, i[0]])
        + 1.0 / (1.5 + W[:, i[1]])
    ) / 5.0


def _highdim_theta(complexity):
    a = _HIGHDIM_ACTIVE
    if complexity == "simple":
        return lambda W: 1.0 + W[:, list(a)].sum(axis=1) / 5.0
    return lambda W: 1.0 + (
        np.sin(4.0 * W[:, a[0]])
        + np.sin(4.0 * W[:, a[1]])
        + np.cos(4.0 * W[:, a[2]])
        + 1.5 * (W[:, a[3]] ** 2 - W[:, a[4]] ** 2)
    ) / 5.0


def _highdim_propensity(W):
    return expit(W[:, list(_HIGHDIM_PI_IDX)].sum(axis=1) / 1.3)


def _crr_mu0(W):
    return expit(-1.0 + 0.3 * np.sum(W + np.sin(4.0 * W), axis=1))


def _crr_theta(complexity):
    if complexity == "simple":
        return lambda W: -0.1 + 0.1 * W.sum(axis=1)
    return lambda W: -0.1 + 0.1 * np.sum(W + np.sin(4.0 * W), axis=1)


def _intro_mu(a, W):
    w1 = W[:, 0]
    mu0 = 0.35 + 0.65 * expit(w1 - 2.0)
    if a == 0:
        return mu0
    return mu0 + expit(2.0 * w1 + 2.0) - expit(w1 - 2.0) - 0.349


def scenario_dim(family: str) -> int:
    return {"cate_lowdim": 3, "cate_highdim": _HIGHDIM_DIM, "crr": 3, "intro": 1}[family]


def draw_covariates(config: ScenarioConfig, m: int, seed) -> np.ndarray:
    """Fresh covariate rows from the scenario's covariate law."""
    rng = _rng(seed)
    if config.family in ("cate_lowdim", "crr"):
        return rng.uniform(-1.0, 1.0, (m, 3))
    if config.family == "cate_highdim":
        Z, _ = sample_truncated_mvn(rng, m)
        return 2.0 * Z
    return rng.standard_t(5, (m, 1))


def generate(config: ScenarioConfig) -> SimulatedDraw:
    """Draw a dataset and return it with the generating functions."""
    W = draw_covariates(config, config.n, config.seed)
    rng = _rng(derive_seed(config.seed, "arm-outcome"))

    if config.family in ("cate_lowdim", "cate_highdim"):
        if config.family == "cate_lowdim":
            pi_fn = _lowdim_propensity(config.overlap)
            theta_fn = _lowdim_theta(config.complexity)
            mu0_fn = _lowdim_mu0
        else:
            pi_fn = _highdim_propensity
            theta_fn = _highdim_theta(config.complexity)
            mu0_fn = _highdim_mu0

        def mu_fn(a, X, _m0=mu0_fn, _th=theta_fn):
            return _m0(X) + float(a) * _th(X)

        a = (rng.uniform(size=config.n) < pi_fn(W)).astype(np.int64)
        mean = mu0_fn(W) + a * theta_fn(W)
        y = rng.normal(mean, 2.0)
    elif config.family == "crr":
        pi_fn = _lowdim_propensity(config.overlap)
        theta_fn = _crr_theta(config.complexity)

        def mu_fn(a, X, _th=theta_fn):
            return _crr_mu0(X) * np.exp(float(a) * _th(X))

        a = (rng.uniform(size=config.n) < pi_fn(W)).astype(np.int64)
        y = (rng.uniform(size=config.n) < mu_fn(0, W) * np.exp(a * theta_fn(W))).astype(
            float
        )
    else:  # intro
        pi_fn = lambda X: expit(X[:, 0])

        def mu_fn(a, X):
            return _intro_mu(a, X)

        def theta_fn(X):
            return _intro_mu(1, X) - _intro_mu(0, X)

        a = (rng.uniform(size=config.n) < pi_fn(W)).astype(np.int64)
        mean = np.where(a == 1, mu_fn(1, W), mu_fn(0, W))
        y = (rng.uniform(size=config.n) < mean).astype(float)

    dataset = Dataset.from_arrays(W, a, y.astype(float))
    return SimulatedDraw(
        config=config,
        dataset=dataset,
        theta0=theta_fn,
        propensity1=pi_fn,
        outcome=mu_fn,
    )


def mse_against_truth(model, theta0, eval_points) -> float:
    """Mean squared prediction error against the true contrast."""
    eval_points = np.asarray(eval_points, dtype=float)
    truth = np.asarray(theta0(eval_points), dtype=float)
    pred = model.predict(eval_points)
    return float(np.mean((pred - truth) ** 2))


# ---------------------------------------------------------------------------
# benchmark runner

RESULT_COLUMNS = (
    "scenario",
    "overlap",
    "complexity",
    "method",
    "base_learner",
    "n",
    "rep",
    "seed",
    "mse",
    "runtime_ms",
    "score_residual",
    "neg_weight_count",
)

_STAGE2_DEFAULTS = {
    "boosted_stumps": {"n_rounds": 100, "max_depth": 2, "learning_rate": 0.1},
    "knn": {"n_neighbors": 10},
    "kernel": {"bandwidth": 0.5},
    "wls": {"fit_intercept": True, "ridge": 1e-8},
    "logistic": {"fit_intercept": True, "ridge": 1e-8},
}


@dataclass(frozen=True)
class BenchmarkRow:
    scenario: str
    overlap: str
    complexity: str
    method: str
    base_learner: str
    n: int
    rep: int
    seed: int
    mse: float
    runtime_ms: float
    score_residual: Optional[float]
    neg_weight_count: Optional[int]

    def csv_fields(self) -> list[str]:
        return [
            self.scenario,
            self.overlap,
            self.complexity,
            self.method,
            self.base_learner,
            str(self.n),
            str(self.rep),
            str(self.seed),
            repr(float(self.mse)) if np.isfinite(self.mse) else "nan",
            repr(float(self.runtime_ms)),
            "" if self.score_residual is None else repr(float(self.score_residual)),
            "" if self.neg_weight_count is None else str(int(self.neg_weight_count)),
        ]


@dataclass(frozen=True)
class BenchmarkResult:
    rows: tuple

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(RESULT_COLUMNS) + "\n")
            for row in self.rows:
                fh.write(",".join(row.csv_fields()) + "\n")


def methods_for_family(family: str) -> tuple:
    return CRR_METHODS if family == "crr" else CATE_METHODS


def _stage2_proto(kind: str, params: Optional[dict], contrast_family: str):
    if contrast_family == "crr" and kind in ("boosted_stumps", "knn", "kernel", "wls"):
        kind = "logistic"
    merged = dict(_STAGE2_DEFAULTS.get(kind, {}))
    if params:
        merged.update(params)
    return kind, make_learner(kind, **merged)


def build_estimator(
    method: str,
    contrast_family: str,
    stage2_kind: str = "boosted_stumps",
    stage2_params: Optional[dict] = None,
    outcome_params: Optional[dict] = None,
    n_folds: int = 5,
    k: int = 3,
    k_grid=(1, 2, 3, 4, 5, 6),
    knn_neighbors: int = 3,
    seed: int = 0,
):
    """Construct a contrast learner from flat configuration values."""
    allowed = methods_for_family(contrast_family)
    if method not in allowed:
        raise ValueError(
            f"method {method!r} is not available for family {contrast_family!r}; "
            f"choose from {allowed}"
        )
    out_defaults = {"n_rounds": 100, "max_depth": 3, "learning_rate": 0.1}
    if outcome_params:
        out_defaults.update(outcome_params)
    outcome_learner = make_learner("boosted_stumps", **out_defaults)
    if contrast_family == "crr":
        outcome_learner = WeightedLogisticRegression(fit_intercept=True, ridge=1e-8)
    _, stage2 = _stage2_proto(stage2_kind, stage2_params, contrast_family)
    common = dict(seed=seed)
    if method == "t":
        return TLearner(spec=contrast_family, outcome_learner=outcome_learner, **common)
    if method == "dr":
        return DRLearner(
            stage2=stage2, n_folds=n_folds, outcome_learner=outcome_learner, **common
        )
    if method == "r":
        return RLearner(
            stage2=stage2, n_folds=n_folds, outcome_learner=outcome_learner, **common
        )
    if method == "ipw_e":
        return IPWELearner(stage2=stage2, n_folds=n_folds, **common)
    if method == "ep":
        return EPLearner(
            spec=contrast_family,
            n_frequencies=k,
            stage2=stage2,
            n_folds=n_folds,
            outcome_learner=outcome_learner,
            **common,
        )
    if method == "cv_ep":
        return CVEPLearner(
            spec=contrast_family,
            k_grid=tuple(k_grid),
            stage2=stage2,
            n_folds=n_folds,
            outcome_learner=outcome_learner,
            **common,
        )
    if method == "knn_ep":
        return KNNEPLearner(
            n_neighbors=knn_neighbors,
            n_frequencies=k,
            outcome_learner=outcome_learner,
            **common,
        )
    raise ValueError(f"unknown method {method!r}")


def _run_cell(args) -> BenchmarkRow:
    (
        scenario,
        method,
        stage2_kind,
        n,
        rep,
        cell_seed,
        options,
    ) = args
    family, overlap, complexity = scenario
    config = ScenarioConfig(
        family=family, overlap=overlap, complexity=complexity, n=n, seed=cell_seed
    )
    started = time.perf_counter()
    score_residual = None
    neg_weight_count = None
    try:
        draw = generate(config)
        estimator = build_estimator(
            method,
            config.contrast_family,
            stage2_kind=stage2_kind,
            stage2_params=options.get("stage2_params"),
            outcome_params=options.get("outcome_params"),
            n_folds=options.get("n_folds", 5),
            k=options.get("k", 3),
            k_grid=options.get("k_grid", (1, 2, 3, 4, 5, 6)),
            knn_neighbors=options.get("knn_neighbors", 3),
            seed=derive_seed(cell_seed, "fit"),
        )
        estimator.fit(
            draw.dataset.covariates, draw.dataset.treatment, draw.dataset.outcome
        )
        eval_points = draw_covariates(
            config, options.get("eval_points", 10000), derive_seed(cell_seed, "eval")
        )
        mse = mse_against_truth(estimator, draw.theta0, eval_points)
        score_residual = getattr(estimator, "score_residual_", None)
        if config.contrast_family == "crr" and hasattr(estimator, "nuisances_"):
            census = crr_dr_pseudo(draw.dataset, estimator.folds_, estimator.nuisances_)
            neg_weight_count = census.negative_weight_count
    except Exception as exc:  # error rows keep the sweep going
        print(
            f"benchmark cell {scenario}/{method}/{stage2_kind}/n={n}/rep={rep} "
            f"failed: {type(exc).__name__}: {exc}",
            file=sys.stderr,
        )
        mse = float("nan")
    runtime_ms = (
        (time.perf_counter() - started) * 1000.0 if options.get("timings") else 0.0
    )
    return BenchmarkRow(
        scenario=family,
        overlap=overlap,
        complexity=complexity,
        method=method,
        base_learner=stage2_kind,
        n=n,
        rep=rep,
        seed=cell_seed,
        mse=mse,
        runtime_ms=runtime_ms,
        score_residual=score_residual,
        neg_weight_count=neg_weight_count,
    )


def run_benchmark(
    scenarios,
    methods,
    n_list,
    reps: int,
    base_seed: int,
    stage2_kinds=("boosted_stumps",),
    workers: int = 1,
    timings: bool = False,
    **options,
) -> BenchmarkResult:
    """Run the Monte Carlo sweep over (scenario, method, learner, n, rep).

    Scenario entries are (family, overlap, complexity) triples or
    ScenarioConfig-compatible strings "family:overlap:complexity". Each cell
    derives its own seed from ``base_seed`` and the cell coordinates, so the
    result table is reproducible cell by cell and identical across worker
    counts. Failed cells are recorded with ``mse=nan`` and the sweep
    continues. ``timings=False`` (the default) reports runtime_ms as 0 so
    the output is byte-stable across runs.
    """
    n_list = [int(n) for n in n_list]
    for n in n_list:
        if n < MIN_N:
            raise ValueError(f"n must be at least {MIN_N}, got {n}")
    parsed = []
    for sc in scenarios:
        if isinstance(sc, str):
            parts = sc.split(":")
            family = parts[0]
            overlap = parts[1] if len(parts) > 1 else "moderate"
            complexity = parts[2] if len(parts) > 2 else "simple"
        else:
            family, overlap, complexity = sc
        ScenarioConfig(family=family, overlap=overlap, complexity=complexity,
                       n=MIN_N, seed=0)
        parsed.append((family, overlap, complexity))
    for method in methods:
        known = set(CATE_METHODS) | set(CRR_METHODS)
        if method not in known:
            raise ValueError(f"unknown method {method!r}")
    for scenario in parsed:
        fam = "crr" if scenario[0] == "crr" else "cate"
        for method in methods:
            if method not in methods_for_family(fam):
                raise ValueError(
                    f"method {method!r} is not available for scenario {scenario[0]!r}"
                )

    opts = dict(options)
    opts["timings"] = timings
    cells = []
    for scenario in parsed:
        for method in methods:
            for stage2_kind in stage2_kinds:
                for n in n_list:
                    for rep in range(reps):
                        cell_seed = derive_seed(
                            base_seed, *scenario, method, stage2_kind, n, rep
                        )
                        cells.append(
                            (scenario, method, stage2_kind, int(n), rep, cell_seed, opts)
                        )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(cell) for cell in cells]
    return BenchmarkResult(rows=tuple(rows))
