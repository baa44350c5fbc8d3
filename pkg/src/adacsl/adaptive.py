"""Adaptive cost-sensitive training loop.

Each epoch trains on the weighted cross-entropy with the current lambda,
scores the validation set, bins it by predicted probability, searches the
cost-minimizing threshold in every bin and multiplies lambda by the
size-weighted mean of the per-bin exponential factors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import CostMatrix, EpochRecord, LabeledDataset, LambdaState, partition_by_probability
from .costmodel import DEFAULT_CANDIDATES, ThresholdCandidates, empirical_cost, search_optimal_threshold
from .errors import InvalidInputError
from .loss import LossSpec, averaged_lambda
from .nnet import NetworkParams, TrainConfig, init_network, predict_batch, train_epoch

log = logging.getLogger(__name__)

LAMBDA_MIN = 1e-3
LAMBDA_MAX = 1e3


@dataclass(frozen=True)
class AdaCslConfig:
    cm: CostMatrix
    t_prime: float = 0.5
    num_bins: int = 10
    candidates: ThresholdCandidates = DEFAULT_CANDIDATES
    epsilon: float = 0.01
    max_epochs: int = 30
    # stop test is skipped before this many epochs; 1 keeps the bare loop
    min_epochs: int = 1
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    lambda_bounds: tuple = (LAMBDA_MIN, LAMBDA_MAX)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidInputError("epsilon must be positive")
        if not 0.0 < self.t_prime < 1.0:
            raise InvalidInputError("t_prime must be in (0,1)")
        if self.num_bins < 1 or self.max_epochs < 1 or self.min_epochs < 1:
            raise InvalidInputError("num_bins, max_epochs and min_epochs must be positive")
        lo, hi = self.lambda_bounds
        if not 0 < lo <= 1 <= hi:
            raise InvalidInputError(f"lambda bounds must bracket 1, got {self.lambda_bounds}")

    def loss_spec(self, lam: float = 1.0) -> LossSpec:
        return LossSpec(self.cm, self.t_prime, lam)


@dataclass(frozen=True, eq=False)
class AdaCslResult:
    params: NetworkParams
    state: LambdaState
    best_params: NetworkParams
    best_epoch: int

    @property
    def thresholds_by_epoch(self) -> list:
        return [r.thresholds for r in self.state.trajectory]


def adapt_lambda(
    state: LambdaState,
    val_preds,
    val_labels,
    cfg: AdaCslConfig,
    train_cost: Optional[float] = None,
) -> LambdaState:
    """One lambda adjustment from validation predictions; no model involved."""
    part = partition_by_probability(val_preds, cfg.num_bins)
    y = np.asarray(val_labels)
    thresholds = []
    for m in range(part.num_bins):
        idx = part.members(m)
        if idx.size == 0:
            thresholds.append(None)
            continue
        thresholds.append(
            search_optimal_threshold(val_preds[idx], y[idx], cfg.cm, cfg.candidates, cfg.t_prime)
        )
    part = part.with_thresholds(thresholds)
    factor = averaged_lambda(part, cfg.t_prime)
    lo, hi = cfg.lambda_bounds
    raw = state.lambda_current * factor
    lam_next = float(min(max(raw, lo), hi))
    clamped = lam_next != raw
    if clamped:
        log.warning("lambda %.6g clamped to %.6g at epoch %d", raw, lam_next, state.epoch_index + 1)
    record = EpochRecord(
        epoch=state.epoch_index + 1,
        lambda_used=state.lambda_current,
        factor=factor,
        lambda_next=lam_next,
        thresholds=tuple(thresholds),
        bin_sizes=tuple(int(s) for s in part.bin_sizes),
        val_cost=empirical_cost(val_preds, y, cfg.t_prime, cfg.cm),
        train_cost=train_cost,
        clamped=clamped,
    )
    return LambdaState(lam_next, state.epoch_index + 1, state.trajectory + (record,))


def run_adacsl(
    train: LabeledDataset,
    val: LabeledDataset,
    cfg: AdaCslConfig,
    params: Optional[NetworkParams] = None,
) -> AdaCslResult:
    """Train with adaptive lambda until it settles within epsilon or max_epochs.

    The network keeps training from its current weights across adjustments.
    The model with the lowest validation cost at ``t_prime`` is returned as
    ``best_params`` next to the final one.
    """
    n_pos = int(val.labels.sum())
    if n_pos == 0 or n_pos == len(val):
        log.warning("validation set holds a single class; thresholds are weakly identified")
    tc = cfg.train_cfg
    if params is None:
        params = init_network(tc.layer_sizes(train.n_features), tc.seed, tc.activation)
    state = LambdaState()
    best, best_epoch, best_cost = params, 0, np.inf
    for epoch in range(1, cfg.max_epochs + 1):
        lam = state.lambda_current
        params, _ = train_epoch(params, train, cfg.loss_spec(lam), tc, epoch)
        train_cost = empirical_cost(
            predict_batch(params, train.features), train.labels, cfg.t_prime, cfg.cm
        )
        val_preds = predict_batch(params, val.features)
        state = adapt_lambda(state, val_preds, val.labels, cfg, train_cost=train_cost)
        rec = state.trajectory[-1]
        log.debug(
            "epoch %d lambda %.4f -> %.4f val cost %.1f", epoch, lam, rec.lambda_next, rec.val_cost
        )
        if rec.val_cost < best_cost:
            best, best_epoch, best_cost = params, epoch, rec.val_cost
        if epoch >= cfg.min_epochs and abs(rec.lambda_next - lam) < cfg.epsilon:
            break
    return AdaCslResult(params, state, best, best_epoch)
