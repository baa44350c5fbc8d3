"""Shared value types: cost matrices, labelled datasets, probability bins, lambda state."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidCostError, InvalidInputError


@dataclass(frozen=True)
class CostMatrix:
    """Binary misclassification costs with an implicit zero diagonal.

    ``c_fp`` is the cost of predicting 1 for an actual 0, ``c_fn`` the cost
    of predicting 0 for an actual 1.
    """

    c_fp: float
    c_fn: float

    def __post_init__(self):
        c_fp, c_fn = float(self.c_fp), float(self.c_fn)
        if not (np.isfinite(c_fp) and np.isfinite(c_fn)):
            raise InvalidCostError(f"costs must be finite, got c_fp={c_fp}, c_fn={c_fn}")
        if c_fp < 0 or c_fn < 0:
            raise InvalidCostError(f"costs must be nonnegative, got c_fp={c_fp}, c_fn={c_fn}")
        if c_fp == 0 and c_fn == 0:
            raise InvalidCostError("c_fp and c_fn cannot both be zero")
        object.__setattr__(self, "c_fp", c_fp)
        object.__setattr__(self, "c_fn", c_fn)

    @classmethod
    def from_ratio(cls, rho: float) -> "CostMatrix":
        """Cost matrix with c_fp = 1 and c_fn = rho."""
        return cls(c_fp=1.0, c_fn=rho)

    @property
    def rho(self) -> float:
        if self.c_fp == 0:
            return float("inf")
        return self.c_fn / self.c_fp

    def scaled(self, s: float) -> "CostMatrix":
        return CostMatrix(self.c_fp * s, self.c_fn * s)


@dataclass(frozen=True)
class DatasetReport:
    n_rows: int
    n_features: int
    n_pos: int
    n_neg: int

    @property
    def imbalance_ratio(self) -> float:
        """|D-| / |D+| (inf when there are no positives)."""
        if self.n_pos == 0:
            return float("inf")
        return self.n_neg / self.n_pos


def validate_dataset(ds: "LabeledDataset") -> DatasetReport:
    return _check(ds.features, ds.labels)


def _check(features, labels) -> DatasetReport:
    if isinstance(features, (list, tuple)):
        if len(features) == 0:
            raise InvalidInputError("empty dataset")
        widths = [len(row) if np.ndim(row) else 1 for row in features]
        for i, w in enumerate(widths):
            if w != widths[0]:
                raise InvalidInputError(f"ragged row {i}: expected {widths[0]} columns, got {w}")
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        raise InvalidInputError(f"features must be a 2-d matrix, got {x.ndim} dims")
    if x.shape[0] == 0 or y.size == 0:
        raise InvalidInputError("empty dataset")
    if x.shape[1] < 1:
        raise InvalidInputError("features need at least one column")
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise InvalidInputError(
            f"row count mismatch: {x.shape[0]} feature rows vs {y.size} labels"
        )
    bad = ~np.isfinite(x).all(axis=1)
    if bad.any():
        raise InvalidInputError(f"non-finite feature at row {int(np.argmax(bad))}")
    yf = y.astype(np.float64)
    bad = ~((yf == 0) | (yf == 1))
    if bad.any():
        raise InvalidInputError(f"label out of {{0,1}} at row {int(np.argmax(bad))}")
    n_pos = int((yf == 1).sum())
    return DatasetReport(x.shape[0], x.shape[1], n_pos, x.shape[0] - n_pos)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature matrix (K x d) plus binary labels; validated on construction."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        _check(self.features, self.labels)
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.asarray(self.labels).astype(np.int64)
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.features[idx], self.labels[idx])

    def equals(self, other: "LabeledDataset") -> bool:
        return np.array_equal(self.features, other.features) and np.array_equal(
            self.labels, other.labels
        )


def check_probs(preds, n: Optional[int] = None) -> np.ndarray:
    """Coerce a prediction vector to float64 and check every entry is in [0, 1]."""
    p = np.asarray(preds, dtype=np.float64).reshape(-1)
    if n is not None and p.shape[0] != n:
        raise InvalidInputError(f"expected {n} predictions, got {p.shape[0]}")
    bad = ~(np.isfinite(p) & (p >= 0.0) & (p <= 1.0))
    if bad.any():
        i = int(np.argmax(bad))
        raise InvalidInputError(f"probability out of [0,1] at index {i}: {p[i]!r}")
    return p


def check_labels(labels, n: Optional[int] = None) -> np.ndarray:
    y = np.asarray(labels).reshape(-1)
    if n is not None and y.shape[0] != n:
        raise InvalidInputError(f"length mismatch: {n} predictions vs {y.shape[0]} labels")
    bad = ~((y == 0) | (y == 1))
    if bad.any():
        raise InvalidInputError(f"label out of {{0,1}} at row {int(np.argmax(bad))}")
    return y.astype(np.int64)


@dataclass(frozen=True, eq=False)
class SubgroupPartition:
    """Assignment of instances to equal-width probability bins.

    ``bin_thresholds[m]`` is None for empty bins and for bins whose
    threshold has not been searched yet.
    """

    bin_edges: np.ndarray
    assignments: np.ndarray
    bin_sizes: np.ndarray
    bin_thresholds: tuple = ()

    @property
    def num_bins(self) -> int:
        return self.bin_sizes.shape[0]

    def members(self, m: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == m)

    def with_thresholds(self, thresholds: Sequence[Optional[float]]) -> "SubgroupPartition":
        if len(thresholds) != self.num_bins:
            raise InvalidInputError(
                f"expected {self.num_bins} thresholds, got {len(thresholds)}"
            )
        out = []
        for m, t in enumerate(thresholds):
            if self.bin_sizes[m] == 0:
                if t is not None:
                    raise InvalidInputError(f"empty bin {m} cannot carry a threshold")
                out.append(None)
                continue
            if t is not None and not 0.0 <= t <= 1.0:
                raise InvalidInputError(f"threshold for bin {m} outside [0,1]: {t}")
            out.append(None if t is None else float(t))
        return replace(self, bin_thresholds=tuple(out))


def partition_by_probability(preds, num_bins: int = 10) -> SubgroupPartition:
    """Split predictions into ``num_bins`` equal-width bins over [0, 1].

    Bins are half-open ``[m/M, (m+1)/M)``; p = 1.0 lands in the last bin.
    """
    if int(num_bins) != num_bins or num_bins < 1:
        raise InvalidInputError(f"num_bins must be a positive integer, got {num_bins}")
    num_bins = int(num_bins)
    p = check_probs(preds)
    if p.size == 0:
        raise InvalidInputError("empty prediction vector")
    assignments = np.minimum(np.floor(p * num_bins).astype(np.int64), num_bins - 1)
    sizes = np.bincount(assignments, minlength=num_bins)
    edges = np.linspace(0.0, 1.0, num_bins + 1)
    return SubgroupPartition(
        bin_edges=edges,
        assignments=assignments,
        bin_sizes=sizes,
        bin_thresholds=(None,) * num_bins,
    )


@dataclass(frozen=True)
class EpochRecord:
    """One adaptation step: the lambda trained with, the factor found, the result."""

    epoch: int
    lambda_used: float
    factor: float
    lambda_next: float
    thresholds: tuple
    bin_sizes: tuple
    val_cost: float
    train_cost: Optional[float] = None
    clamped: bool = False


@dataclass(frozen=True)
class LambdaState:
    lambda_current: float = 1.0
    epoch_index: int = 0
    trajectory: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not (np.isfinite(self.lambda_current) and self.lambda_current > 0):
            raise InvalidInputError(f"lambda must be positive, got {self.lambda_current}")

    def lambdas(self) -> np.ndarray:
        return np.array([r.lambda_next for r in self.trajectory])

    def val_costs(self) -> np.ndarray:
        return np.array([r.val_cost for r in self.trajectory])
