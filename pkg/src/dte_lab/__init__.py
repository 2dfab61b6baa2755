"""Distributional treatment effect estimation for randomized experiments.

The package estimates average, distributional, and probability treatment
effects from unit-level experiment data, with regression-adjusted CDF
estimators, cross-fitted nuisance models, and bootstrap inference.
"""
from .dataset import (
    AteResult,
    CdfPair,
    EffectCurve,
    ExperimentDataset,
    LocationGrid,
    build_grid,
    read_csv_dataset,
    subset_by_group,
    validate_dataset,
)
from .diagnostics import BalanceRow, balance_table
from .errors import (
    ConfigError,
    DegenerateGridError,
    DteLabError,
    EmptyArmError,
    EstimationError,
    ValidationError,
)
from .estimators import (
    adjusted_cdf_pair,
    ate,
    ate_adjusted,
    ate_from_dte,
    dte,
    empirical_cdf_pair,
    pte,
    rearrange_cdf_pair,
)
from .inference import BootstrapConfig, BootstrapResult, attach_inference, bootstrap
from .nuisance import (
    CrossFitPredictions,
    FoldPlan,
    cross_fit,
    make_fold_plan,
    make_learner_factory,
)
from .pipeline import EstimateBundle, EstimateSettings, run_estimate

__version__ = "0.1.0"

__all__ = [
    "AteResult",
    "CdfPair",
    "EffectCurve",
    "ExperimentDataset",
    "LocationGrid",
    "build_grid",
    "read_csv_dataset",
    "subset_by_group",
    "validate_dataset",
    "ConfigError",
    "DegenerateGridError",
    "DteLabError",
    "EmptyArmError",
    "EstimationError",
    "ValidationError",
    "BalanceRow",
    "balance_table",
    "adjusted_cdf_pair",
    "ate",
    "ate_adjusted",
    "ate_from_dte",
    "dte",
    "empirical_cdf_pair",
    "pte",
    "rearrange_cdf_pair",
    "BootstrapConfig",
    "BootstrapResult",
    "attach_inference",
    "bootstrap",
    "CrossFitPredictions",
    "FoldPlan",
    "cross_fit",
    "make_fold_plan",
    "make_learner_factory",
    "EstimateBundle",
    "EstimateSettings",
    "run_estimate",
    "__version__",
]
