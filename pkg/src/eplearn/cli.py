"""Command-line interface: simulate, fit, predict, benchmark, diagnose.

Configuration comes from a flat ``key = value`` text file (``--config``)
with flag overrides; flags win. Unknown keys are rejected by name. All
randomness flows from the single ``seed`` key. Exit codes: 0 success,
1 validation error, 2 runtime error; errors print one machine-parsable
line ``error: <Kind>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .crossfit import fit_nuisances, partition_folds
from .data import (
    Dataset,
    load_covariates_csv,
    load_dataset_csv,
    save_dataset_csv,
)
from .errors import (
    BadFoldCount,
    DimensionMismatch,
    EmptyData,
    EplearnError,
    KTooLarge,
    MethodOutcomeMismatch,
    NonBinaryTreatment,
    NonFiniteValue,
)
from .learners import WeightedLogisticRegression, make_learner
from .meta import load_model, predict_contrast, save_model
from .pseudo import crr_dr_pseudo, crr_ep_pseudo, dr_pseudo_outcomes
from .risks import resolve_spec
from .sieve import CosineBasis, debias_outcome_regression
from .simulate import (
    FAMILIES,
    ScenarioConfig,
    build_estimator,
    generate,
    methods_for_family,
    run_benchmark,
)


class ConfigError(EplearnError):
    """Invalid or unknown configuration key/value."""


_VALIDATION_ERRORS = (
    ConfigError,
    ValueError,
    EmptyData,
    NonBinaryTreatment,
    NonFiniteValue,
    BadFoldCount,
    MethodOutcomeMismatch,
    DimensionMismatch,
    KTooLarge,
)


def _to_int(key):
    def conv(value):
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"key {key!r}: expected an integer, got {value!r}") from None

    return conv


def _to_float(key):
    def conv(value):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"key {key!r}: expected a number, got {value!r}") from None

    return conv


def _to_bool(key):
    def conv(value):
        low = str(value).strip().lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"key {key!r}: expected true/false, got {value!r}")

    return conv


def _to_int_list(key):
    def conv(value):
        try:
            return [int(v) for v in str(value).split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"key {key!r}: expected comma-separated integers") from None

    return conv


def _to_str_list(key):
    return lambda value: [v.strip() for v in str(value).split(",") if v.strip()]


def _choice(key, options):
    def conv(value):
        if value not in options:
            raise ConfigError(f"key {key!r}: {value!r} not in {sorted(options)}")
        return value

    return conv


_STAGE2_KEYS = {
    "stage2": _choice("stage2", ("boosted_stumps", "knn", "kernel", "wls", "logistic")),
    "stage2.depth": _to_int("stage2.depth"),
    "stage2.rounds": _to_int("stage2.rounds"),
    "stage2.rate": _to_float("stage2.rate"),
    "stage2.neighbors": _to_int("stage2.neighbors"),
    "stage2.bandwidth": _to_float("stage2.bandwidth"),
    "outcome.depth": _to_int("outcome.depth"),
    "outcome.rounds": _to_int("outcome.rounds"),
    "outcome.rate": _to_float("outcome.rate"),
}

_SCHEMAS = {
    "simulate": {
        "scenario": _choice("scenario", FAMILIES),
        "overlap": _choice("overlap", ("moderate", "limited")),
        "complexity": _choice("complexity", ("simple", "complex")),
        "n": _to_int("n"),
        "seed": _to_int("seed"),
        "out": str,
        "truth_out": str,
    },
    "fit": {
        "data": str,
        "family": _choice("family", ("cate", "crr")),
        "method": _choice("method", ("t", "dr", "r", "ipw_e", "ep", "cv_ep", "knn_ep")),
        "k": _to_int("k"),
        "k_grid": _to_int_list("k_grid"),
        "folds": _to_int("folds"),
        "knn_neighbors": _to_int("knn_neighbors"),
        "seed": _to_int("seed"),
        "out": str,
        "report": str,
        **_STAGE2_KEYS,
    },
    "predict": {
        "model": str,
        "data": str,
        "out": str,
    },
    "benchmark": {
        "scenarios": _to_str_list("scenarios"),
        "methods": _to_str_list("methods"),
        "learners": _to_str_list("learners"),
        "n_list": _to_int_list("n_list"),
        "reps": _to_int("reps"),
        "seed": _to_int("seed"),
        "workers": _to_int("workers"),
        "folds": _to_int("folds"),
        "k": _to_int("k"),
        "k_grid": _to_int_list("k_grid"),
        "knn_neighbors": _to_int("knn_neighbors"),
        "eval_points": _to_int("eval_points"),
        "timings": _to_bool("timings"),
        "out": str,
        **_STAGE2_KEYS,
    },
    "diagnose": {
        "data": str,
        "family": _choice("family", ("cate", "crr")),
        "scenario": _choice("scenario", FAMILIES),
        "overlap": _choice("overlap", ("moderate", "limited")),
        "complexity": _choice("complexity", ("simple", "complex")),
        "n": _to_int("n"),
        "seed": _to_int("seed"),
        "folds": _to_int("folds"),
        "k_grid": _to_int_list("k_grid"),
        "out": str,
    },
}


def parse_config_file(path) -> dict:
    raw = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            raw[key.strip()] = value.strip()
    return raw


def resolve_config(command: str, args) -> dict:
    schema = _SCHEMAS[command]
    raw = parse_config_file(args.config) if args.config else {}
    unknown = set(raw) - set(schema)
    if unknown:
        raise ConfigError(f"unknown key(s) for {command}: {sorted(unknown)}")
    config = {key: schema[key](value) for key, value in raw.items()}
    # flags win over file values
    if args.seed is not None:
        config["seed"] = args.seed
    if args.out is not None:
        config["out"] = args.out
    if getattr(args, "workers", None) is not None:
        config["workers"] = args.workers
    return config


def _require(config, command, key):
    if key not in config:
        raise ConfigError(f"{command}: missing required key {key!r}")
    return config[key]


def _stage2_params(config) -> dict:
    mapping = {
        "stage2.depth": "max_depth",
        "stage2.rounds": "n_rounds",
        "stage2.rate": "learning_rate",
        "stage2.neighbors": "n_neighbors",
        "stage2.bandwidth": "bandwidth",
    }
    return {mapping[k]: v for k, v in config.items() if k in mapping}


def _outcome_params(config) -> dict:
    mapping = {
        "outcome.depth": "max_depth",
        "outcome.rounds": "n_rounds",
        "outcome.rate": "learning_rate",
    }
    return {mapping[k]: v for k, v in config.items() if k in mapping}


def cmd_simulate(args) -> int:
    config = resolve_config("simulate", args)
    scenario = ScenarioConfig(
        family=_require(config, "simulate", "scenario"),
        overlap=config.get("overlap", "moderate"),
        complexity=config.get("complexity", "simple"),
        n=_require(config, "simulate", "n"),
        seed=config.get("seed", 0),
    )
    out = Path(_require(config, "simulate", "out"))
    truth_out = Path(config.get("truth_out", out.with_name(out.stem + "_truth.csv")))
    draw = generate(scenario)
    save_dataset_csv(draw.dataset, out)
    theta = draw.theta0(draw.dataset.covariates)
    with open(truth_out, "w", encoding="utf-8") as fh:
        fh.write("theta0\n")
        for value in theta:
            fh.write(repr(float(value)) + "\n")
    print(f"wrote {out} ({draw.dataset.n} rows) and {truth_out}")
    return 0


def cmd_fit(args) -> int:
    config = resolve_config("fit", args)
    family = _require(config, "fit", "family")
    method = _require(config, "fit", "method")
    if method == "dr" and family == "crr":
        raise ConfigError("DR CRR estimation unsupported (nonconvex loss); use diagnose")
    if method in ("r", "knn_ep") and family == "crr":
        raise ConfigError(f"method {method!r} supports the cate family only")
    if method == "ipw_e" and family == "cate":
        raise ConfigError("method 'ipw_e' supports the crr family only")
    data = load_dataset_csv(_require(config, "fit", "data"))
    seed = config.get("seed", 0)
    if method == "ep" and "k" not in config:
        method_key = "cv_ep"
    elif method == "ep":
        method_key = "ep"
    else:
        method_key = method
    estimator = build_estimator(
        method_key,
        family,
        stage2_kind=config.get("stage2", "boosted_stumps"),
        stage2_params=_stage2_params(config),
        outcome_params=_outcome_params(config),
        n_folds=config.get("folds", 10),
        k=config.get("k", 3),
        k_grid=tuple(config.get("k_grid", (1, 2, 3, 4, 5, 6))),
        knn_neighbors=config.get("knn_neighbors", 3),
        seed=seed,
    )
    estimator.fit(data.covariates, data.treatment, data.outcome)
    out = Path(_require(config, "fit", "out"))
    save_model(estimator, out)
    report_path = Path(config.get("report", str(out) + ".report.txt"))
    lines = [
        f"method={estimator.method}",
        f"family={estimator.family_}",
        f"n={data.n}",
        f"d={data.d}",
        f"seed={seed}",
    ]
    if hasattr(estimator, "k_cv_"):
        lines.append(f"k_cv={estimator.k_cv_}")
    if hasattr(estimator, "k_"):
        lines.append(f"k={estimator.k_}")
    if hasattr(estimator, "score_residual_"):
        lines.append(f"score_residual={estimator.score_residual_!r}")
    if getattr(estimator, "truncate_bounds_", None) is not None:
        lines.append(f"truncation={estimator.truncate_bounds_}")
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {out} and {report_path}")
    return 0


def cmd_predict(args) -> int:
    config = resolve_config("predict", args)
    model = load_model(_require(config, "predict", "model"))
    queries = load_covariates_csv(_require(config, "predict", "data"))
    preds = predict_contrast(model, queries)
    out = _require(config, "predict", "out")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("prediction\n")
        for value in preds:
            fh.write(repr(float(value)) + "\n")
    print(f"wrote {out} ({len(preds)} rows)")
    return 0


def cmd_benchmark(args) -> int:
    config = resolve_config("benchmark", args)
    result = run_benchmark(
        scenarios=_require(config, "benchmark", "scenarios"),
        methods=_require(config, "benchmark", "methods"),
        n_list=_require(config, "benchmark", "n_list"),
        reps=config.get("reps", 10),
        base_seed=config.get("seed", 0),
        stage2_kinds=tuple(config.get("learners", ["boosted_stumps"])),
        workers=config.get("workers", 1),
        timings=config.get("timings", False),
        n_folds=config.get("folds", 5),
        k=config.get("k", 3),
        k_grid=tuple(config.get("k_grid", (1, 2, 3, 4, 5, 6))),
        knn_neighbors=config.get("knn_neighbors", 3),
        eval_points=config.get("eval_points", 10000),
        stage2_params=_stage2_params(config),
        outcome_params=_outcome_params(config),
    )
    out = _require(config, "benchmark", "out")
    result.to_csv(out)
    print(f"wrote {out} ({len(result.rows)} rows)")
    return 0


def cmd_diagnose(args) -> int:
    config = resolve_config("diagnose", args)
    seed = config.get("seed", 0)
    if "data" in config:
        data = load_dataset_csv(config["data"])
        family = _require(config, "diagnose", "family")
    elif "scenario" in config:
        scenario = ScenarioConfig(
            family=config["scenario"],
            overlap=config.get("overlap", "moderate"),
            complexity=config.get("complexity", "simple"),
            n=config.get("n", 2000),
            seed=seed,
        )
        data = generate(scenario).dataset
        family = scenario.contrast_family
    else:
        raise ConfigError("diagnose: provide either 'data' (+family) or 'scenario'")
    spec = resolve_spec(family, data.outcome)
    n_folds = config.get("folds", 5)
    folds = partition_folds(data.n, min(n_folds, data.n), seed)
    if family == "crr" or data.binary_outcome:
        outcome_learner = WeightedLogisticRegression(fit_intercept=True, ridge=1e-8)
    else:
        outcome_learner = make_learner(
            "boosted_stumps", n_rounds=100, max_depth=3, learning_rate=0.1
        )
    nuisances = fit_nuisances(
        data,
        folds,
        WeightedLogisticRegression(fit_intercept=True, ridge=1e-8),
        outcome_learner,
        spec=spec,
    )
    chi = dr_pseudo_outcomes(data, folds, nuisances)
    lines = [
        f"family={family}",
        f"n={data.n}",
        f"d={data.d}",
        f"folds={folds.n_folds}",
        "",
        "contrast pseudo-outcome (chi):",
        f"  quantile_01={float(np.quantile(chi, 0.01))!r}",
        f"  quantile_99={float(np.quantile(chi, 0.99))!r}",
        f"  min={float(chi.min())!r}",
        f"  max={float(chi.max())!r}",
        f"  max_abs={float(np.abs(chi).max())!r}",
        "",
        "score residual by sieve dimension:",
    ]
    results = {}
    for k in config.get("k_grid", [1, 2, 3, 4, 5, 6]):
        basis = CosineBasis(int(k)).fit(data.covariates)
        result = debias_outcome_regression(
            data, folds, nuisances, spec, basis, ridge=0.0
        )
        results[k] = result
        lines.append(f"  k={k}: score_residual={result.score_residual!r}")
    if family == "crr":
        census_dr = crr_dr_pseudo(data, folds, nuisances)
        k_max = max(results)
        census_ep = crr_ep_pseudo(data, folds, results[k_max].mu_star)
        lines += [
            "",
            "second-stage input census (weighted logistic solvers):",
            f"  dr: negative_weights={census_dr.negative_weight_count} "
            f"outcomes_outside_unit={census_dr.outside_unit_count} "
            f"zero_weight_rows={census_dr.n_zero_weight}",
            f"  ep (k={k_max}): negative_weights={census_ep.negative_weight_count} "
            f"outcomes_outside_unit={census_ep.outside_unit_count} "
            f"zero_weight_rows={census_ep.n_zero_weight}",
        ]
    report = "\n".join(lines) + "\n"
    if "out" in config:
        Path(config["out"]).write_text(report, encoding="utf-8")
        print(f"wrote {config['out']}")
    else:
        print(report, end="")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "benchmark": cmd_benchmark,
    "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eplearn",
        description="Heterogeneous causal contrast estimation and benchmarking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", type=str, default=None, help="key = value file")
        cmd.add_argument("--seed", type=int, default=None, help="overrides config seed")
        cmd.add_argument("--out", type=str, default=None, help="overrides config out")
        cmd.add_argument(
            "--workers", type=int, default=None, help="parallel worker count"
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
