"""Adaptive cost-sensitive learning for binary classifiers."""

__version__ = "0.1.0"

from .core import (
    CostMatrix,
    LabeledDataset,
    LambdaState,
    SubgroupPartition,
    partition_by_probability,
    validate_dataset,
)
from .costmodel import (
    ThresholdCandidates,
    classify,
    empirical_cost,
    expected_risk,
    negative_multiplier,
    optimal_threshold,
    search_optimal_threshold,
)
from .loss import (
    LossSpec,
    averaged_lambda,
    exact_odds_factor,
    negative_weight,
    prior_shift_probability,
    subgroup_lambda,
    weighted_ce,
    weighted_ce_gradient,
)
from .adaptive import AdaCslConfig, AdaCslResult, adapt_lambda, run_adacsl
from .errors import (
    AdaCslError,
    ConfigError,
    InvalidCostError,
    InvalidInputError,
    TrainingDivergedError,
)
