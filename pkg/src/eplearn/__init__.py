"""Efficient plug-in learners for heterogeneous causal contrasts."""

from .crossfit import (
    FoldAssignment,
    NuisanceEstimates,
    fit_nuisances,
    partition_folds,
)
from .data import Dataset, load_dataset_csv, save_dataset_csv, validate_dataset
from .learners import (
    GradientBoostedTrees,
    KNNRegressor,
    KernelRegression,
    WeightedLinearRegression,
    WeightedLogisticRegression,
    cv_select,
    make_learner,
)
from .meta import (
    CVEPLearner,
    DRLearner,
    EPLearner,
    IPWELearner,
    KNNEPLearner,
    RLearner,
    TLearner,
    load_model,
    predict_contrast,
    save_model,
)
from .pseudo import (
    PseudoRegression,
    crr_dr_pseudo,
    crr_ep_pseudo,
    dr_pseudo_outcome,
    dr_pseudo_outcomes,
    eif,
    ep_plugin_risk,
    onestep_risk,
)
from .risks import RiskSpec, cate_risk_spec, crr_risk_spec, evaluate_loss, resolve_spec
from .sieve import (
    CosineBasis,
    DebiasResult,
    LinearBasis,
    build_debias_features,
    check_score_equation,
    debias_outcome_regression,
)
from .simulate import (
    BenchmarkResult,
    ScenarioConfig,
    draw_covariates,
    generate,
    mse_against_truth,
    run_benchmark,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkResult",
    "CosineBasis",
    "CVEPLearner",
    "Dataset",
    "DebiasResult",
    "DRLearner",
    "EPLearner",
    "FoldAssignment",
    "GradientBoostedTrees",
    "IPWELearner",
    "KernelRegression",
    "KNNEPLearner",
    "KNNRegressor",
    "LinearBasis",
    "NuisanceEstimates",
    "PseudoRegression",
    "RiskSpec",
    "RLearner",
    "ScenarioConfig",
    "TLearner",
    "WeightedLinearRegression",
    "WeightedLogisticRegression",
    "build_debias_features",
    "cate_risk_spec",
    "check_score_equation",
    "crr_dr_pseudo",
    "crr_ep_pseudo",
    "crr_risk_spec",
    "cv_select",
    "debias_outcome_regression",
    "dr_pseudo_outcome",
    "dr_pseudo_outcomes",
    "draw_covariates",
    "eif",
    "ep_plugin_risk",
    "evaluate_loss",
    "fit_nuisances",
    "generate",
    "load_dataset_csv",
    "load_model",
    "make_learner",
    "mse_against_truth",
    "onestep_risk",
    "partition_folds",
    "predict_contrast",
    "resolve_spec",
    "run_benchmark",
    "save_dataset_csv",
    "save_model",
    "validate_dataset",
]
