"""Decision-level cost arithmetic for binary classification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CostMatrix, check_labels, check_probs
from .errors import InvalidCostError, InvalidInputError

# Relative tolerance under which two candidate costs count as tied.
_TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class ThresholdCandidates:
    """Sorted, non-empty set of candidate thresholds in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.size == 0:
            raise InvalidInputError("threshold candidates must be non-empty")
        if not (np.isfinite(v).all() and (v >= 0).all() and (v <= 1).all()):
            raise InvalidInputError("threshold candidates must lie in [0,1]")
        v = np.unique(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def grid(cls, step: float = 0.01) -> "ThresholdCandidates":
        """{step, 2*step, ..., 1-step}; the default is 0.01..0.99."""
        n = int(round(1.0 / step))
        return cls(np.round(np.arange(1, n) * step, 12))

    @classmethod
    def from_midpoints(cls, preds) -> "ThresholdCandidates":
        """Midpoints between consecutive distinct predicted probabilities."""
        p = np.unique(check_probs(preds))
        if p.size < 2:
            return cls(p)
        return cls((p[:-1] + p[1:]) / 2.0)

    def __len__(self) -> int:
        return self.values.shape[0]


def optimal_threshold(cm: CostMatrix) -> float:
    """Cost-minimizing probability cutoff c_fp / (c_fp + c_fn)."""
    total = cm.c_fp + cm.c_fn
    if total <= 0:
        raise InvalidCostError("c_fp + c_fn must be positive")
    return cm.c_fp / total


def expected_risk(p_pos: float, predicted_class: int, cm: CostMatrix) -> float:
    if not 0.0 <= p_pos <= 1.0:
        raise InvalidInputError(f"p_pos must be in [0,1], got {p_pos}")
    if predicted_class == 0:
        return p_pos * cm.c_fn
    if predicted_class == 1:
        return (1.0 - p_pos) * cm.c_fp
    raise InvalidInputError(f"predicted_class must be 0 or 1, got {predicted_class}")


def classify(preds, tau: float) -> np.ndarray:
    """Label 1 where p > tau (strict), else 0."""
    p = check_probs(preds)
    return (p > tau).astype(np.int64)


def error_counts(preds, labels, tau: float) -> tuple[int, int]:
    """(false positives, false negatives) at threshold tau."""
    p = check_probs(preds)
    y = check_labels(labels, p.shape[0])
    yhat = p > tau
    fp = int(np.count_nonzero(yhat & (y == 0)))
    fn = int(np.count_nonzero(~yhat & (y == 1)))
    return fp, fn


def empirical_cost(preds, labels, tau: float, cm: CostMatrix) -> float:
    fp, fn = error_counts(preds, labels, tau)
    return fp * cm.c_fp + fn * cm.c_fn


def candidate_costs(preds, labels, cm: CostMatrix, candidates) -> np.ndarray:
    """Empirical cost at every candidate threshold, in one sorted pass."""
    p = check_probs(preds)
    y = check_labels(labels, p.shape[0])
    taus = _as_candidates(candidates).values
    neg = np.sort(p[y == 0])
    pos = np.sort(p[y == 1])
    # count of negatives with p > tau, positives with p <= tau
    fp = neg.size - np.searchsorted(neg, taus, side="right")
    fn = np.searchsorted(pos, taus, side="right")
    return fp * cm.c_fp + fn * cm.c_fn


def search_optimal_threshold(
    preds, labels, cm: CostMatrix, candidates=None, t_prime: float = 0.5
) -> float:
    """Candidate threshold minimizing empirical cost.

    Ties go to the candidate closest to ``t_prime``, then to the smaller one.
    """
    p = check_probs(preds)
    if p.size == 0:
        raise InvalidInputError("cannot search a threshold on empty predictions")
    cand = _as_candidates(candidates)
    costs = candidate_costs(p, labels, cm, cand)
    best = costs.min()
    tied = np.flatnonzero(costs <= best + _TIE_RTOL * max(abs(best), 1.0))
    taus = cand.values[tied]
    dist = np.abs(taus - t_prime)
    # taus ascending, so argmin picks the smaller tau among equal distances
    return float(taus[np.argmin(dist)])


def negative_multiplier(cm: CostMatrix, t_prime: float) -> float:
    """Factor on the negative count that moves the cost-optimal cutoff to t_prime."""
    if not 0.0 < t_prime < 1.0:
        raise InvalidInputError(f"t_prime must be in (0,1), got {t_prime}")
    if cm.c_fn == 0:
        raise InvalidCostError("c_fn must be positive")
    return (cm.c_fp / cm.c_fn) * ((1.0 - t_prime) / t_prime)


def _as_candidates(candidates) -> ThresholdCandidates:
    if candidates is None:
        return DEFAULT_CANDIDATES
    if isinstance(candidates, ThresholdCandidates):
        return candidates
    return ThresholdCandidates(candidates)


DEFAULT_CANDIDATES = ThresholdCandidates.grid(0.01)
