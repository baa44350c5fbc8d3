"""Comparison methods: plain CE, threshold adjustment, fixed weighted CE, resampling, SMOTE."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .core import CostMatrix, LabeledDataset
from .costmodel import classify, empirical_cost, negative_multiplier, optimal_threshold
from .errors import InvalidInputError
from .loss import LossSpec
from .nnet import NetworkParams, TrainConfig, init_network, predict_batch, train_epoch

SYMMETRIC = CostMatrix(1.0, 1.0)


@dataclass(frozen=True, eq=False)
class FitResult:
    params: NetworkParams
    best_params: NetworkParams
    best_epoch: int
    val_costs: tuple
    decision_threshold: float


def fit_fixed(
    train: LabeledDataset,
    val: LabeledDataset,
    spec: LossSpec,
    cfg: TrainConfig,
    select_cm: CostMatrix,
    decision_threshold: float = 0.5,
    params: Optional[NetworkParams] = None,
) -> FitResult:
    """Train ``cfg.max_epochs`` epochs on a fixed loss, keeping the min-val-cost model."""
    if params is None:
        params = init_network(cfg.layer_sizes(train.n_features), cfg.seed, cfg.activation)
    best, best_epoch, best_cost = params, 0, np.inf
    costs = []
    for epoch in range(1, cfg.max_epochs + 1):
        params, _ = train_epoch(params, train, spec, cfg, epoch)
        c = empirical_cost(predict_batch(params, val.features), val.labels, decision_threshold, select_cm)
        costs.append(c)
        if c < best_cost:
            best, best_epoch, best_cost = params, epoch, c
    return FitResult(params, best, best_epoch, tuple(costs), decision_threshold)


def train_standard(train, val, cfg: TrainConfig, select_cm: CostMatrix = SYMMETRIC) -> FitResult:
    """Unweighted cross-entropy, decisions at 0.5."""
    return fit_fixed(train, val, LossSpec.standard(), cfg, select_cm, 0.5)


def train_weighted_ce(train, val, cfg: TrainConfig, cm: CostMatrix, t_prime: float = 0.5) -> FitResult:
    """Cross-entropy with the negative term scaled by (c_fp/c_fn)(1-t')/t', lambda fixed at 1."""
    return fit_fixed(train, val, LossSpec(cm, t_prime, 1.0), cfg, cm, t_prime)


def train_threshold_adjusted(train, val, cfg: TrainConfig, cm: CostMatrix) -> FitResult:
    """Plain CE model; selection and decisions at the cost-optimal cutoff."""
    return fit_fixed(train, val, LossSpec.standard(), cfg, cm, optimal_threshold(cm))


def train_resampled(train, val, cfg: TrainConfig, cm: CostMatrix, t_prime: float = 0.5) -> FitResult:
    resampled = resample_by_cost(train, cm, t_prime, cfg.seed)
    return fit_fixed(resampled, val, LossSpec.standard(), cfg, cm, t_prime)


def train_smote(
    train, val, cfg: TrainConfig, cm: CostMatrix, k: int = 5, target_ratio: float = 1.0
) -> FitResult:
    oversampled = smote_oversample(train, k, target_ratio, cfg.seed)
    return fit_fixed(oversampled, val, LossSpec.standard(), cfg, cm, 0.5)


@dataclass(frozen=True, eq=False)
class DecisionRule:
    params: NetworkParams
    tau: float

    def __call__(self, features) -> np.ndarray:
        return classify(predict_batch(self.params, features), self.tau)


def threshold_adjusted_decision(params: NetworkParams, cm: CostMatrix) -> DecisionRule:
    return DecisionRule(params, optimal_threshold(cm))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def resample_by_cost(ds: LabeledDataset, cm: CostMatrix, t_prime: float, seed: int) -> LabeledDataset:
    """Scale the negative count by the cost multiplier; positives are untouched.

    Below 1, negatives are subsampled without replacement; above 1 they are
    copied whole and topped up with a sampled remainder. The result always
    holds exactly round(m * |D-|) negatives (halves round up).
    """
    m = negative_multiplier(cm, t_prime)
    neg = np.flatnonzero(ds.labels == 0)
    pos = np.flatnonzero(ds.labels == 1)
    target = _round_half_up(m * neg.size)
    if target == 0:
        raise InvalidInputError("resampling would remove all negatives")
    if target == neg.size:
        return ds
    rng = np.random.default_rng(seed)
    copies, rem = divmod(target, neg.size)
    extra = np.sort(rng.choice(neg, size=rem, replace=False))
    keep = np.concatenate([pos, np.tile(neg, copies), extra])
    keep = keep[np.argsort(keep, kind="stable")]
    return ds.subset(keep)


def smote_oversample(ds: LabeledDataset, k: int = 5, target_ratio: float = 1.0, seed: int = 0) -> LabeledDataset:
    """Add interpolated minority rows until minority/majority reaches ``target_ratio``."""
    if k < 1 or target_ratio <= 0:
        raise InvalidInputError("k and target_ratio must be positive")
    n_pos = int(ds.labels.sum())
    n_neg = len(ds) - n_pos
    minority = 1 if n_pos <= n_neg else 0
    mino = np.flatnonzero(ds.labels == minority)
    n_maj = len(ds) - mino.size
    n_new = _round_half_up(target_ratio * n_maj) - mino.size
    if n_new <= 0:
        return ds
    if mino.size < k + 1:
        raise InvalidInputError(
            f"minority class has {mino.size} rows; SMOTE with k={k} needs at least {k + 1}"
        )
    x = ds.features[mino]
    _, nn = cKDTree(x).query(x, k=k + 1)
    # drop each point's own index; duplicates may put it anywhere in the row
    neighbors = np.empty((mino.size, k), dtype=np.int64)
    for i, row in enumerate(nn):
        others = row[row != i]
        neighbors[i] = others[:k]
    rng = np.random.default_rng(seed)
    base = rng.integers(0, mino.size, size=n_new)
    pick = neighbors[base, rng.integers(0, k, size=n_new)]
    u = rng.random((n_new, 1))
    synth = x[base] + u * (x[pick] - x[base])
    features = np.vstack([ds.features, synth])
    labels = np.concatenate([ds.labels, np.full(n_new, minority, dtype=np.int64)])
    return LabeledDataset(features, labels)
