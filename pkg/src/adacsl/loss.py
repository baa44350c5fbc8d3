"""Cost-weighted cross-entropy and the adaptive lambda factor.

The loss for a single example is

    L(y, y_hat) = -y log(y_hat) - w (1 - y) log(1 - y_hat)

with negative-class weight ``w = lambda * (c_fp / c_fn) * (1 - t') / t'``.
At ``lambda = 1`` a model minimizing this loss is cost-optimal when
thresholded at ``t'``; lambda corrects for the gap between the threshold
that actually minimizes validation cost and ``t'``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CostMatrix, SubgroupPartition
from .errors import InvalidCostError, InvalidInputError

PROB_CLIP = 1e-12


@dataclass(frozen=True)
class LossSpec:
    cm: CostMatrix
    t_prime: float = 0.5
    lam: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.t_prime < 1.0:
            raise InvalidInputError(f"t_prime must be in (0,1), got {self.t_prime}")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise InvalidInputError(f"lambda must be positive, got {self.lam}")

    @classmethod
    def standard(cls) -> "LossSpec":
        """Plain (unweighted) cross-entropy."""
        return cls(CostMatrix(1.0, 1.0), 0.5, 1.0)

    def with_lambda(self, lam: float) -> "LossSpec":
        return LossSpec(self.cm, self.t_prime, lam)


def negative_weight(spec: LossSpec) -> float:
    if spec.cm.c_fn == 0:
        raise InvalidCostError("c_fn must be positive for a weighted loss")
    return spec.lam * (spec.cm.c_fp / spec.cm.c_fn) * ((1.0 - spec.t_prime) / spec.t_prime)


def _clip(y_hat):
    return np.clip(y_hat, PROB_CLIP, 1.0 - PROB_CLIP)


def weighted_ce(y, y_hat, w: float):
    """Per-example weighted cross-entropy (natural log); broadcasts over arrays."""
    y = np.asarray(y, dtype=np.float64)
    q = _clip(np.asarray(y_hat, dtype=np.float64))
    out = -y * np.log(q) - w * (1.0 - y) * np.log1p(-q)
    return out if out.ndim else float(out)


def weighted_ce_gradient(y, y_hat, w: float):
    """d weighted_ce / d y_hat."""
    y = np.asarray(y, dtype=np.float64)
    q = _clip(np.asarray(y_hat, dtype=np.float64))
    out = -y / q + w * (1.0 - y) / (1.0 - q)
    return out if out.ndim else float(out)


def binary_cross_entropy(y, y_hat):
    """Unweighted mean cross-entropy, used for reporting."""
    return float(np.mean(weighted_ce(y, y_hat, 1.0)))


def _check_t_prime(t_prime: float) -> None:
    if not 0.0 < t_prime < 1.0:
        raise InvalidInputError(f"t_prime must be in (0,1), got {t_prime}")


def subgroup_lambda(t_prime: float, t_actual: float) -> float:
    """exp(-(t' - t_actual) / (t' (1 - t'))).

    Above 1 when the cost-minimizing threshold sits above t', i.e. the model
    over-predicts positives and negatives need more weight.
    """
    _check_t_prime(t_prime)
    return float(np.exp(-(t_prime - t_actual) / (t_prime * (1.0 - t_prime))))


def exact_odds_factor(t_prime: float, t_actual: float) -> float:
    """Odds ratio that the exponential in `subgroup_lambda` linearizes."""
    _check_t_prime(t_prime)
    if not 0.0 < t_actual < 1.0:
        raise InvalidInputError(f"t_actual must be in (0,1), got {t_actual}")
    return (t_actual / (1.0 - t_actual)) * ((1.0 - t_prime) / t_prime)


def averaged_lambda(partition: SubgroupPartition, t_prime: float) -> float:
    """Size-weighted mean of the per-bin factors over non-empty bins."""
    _check_t_prime(t_prime)
    num = 0.0
    den = 0
    for size, t in zip(partition.bin_sizes, partition.bin_thresholds):
        if size == 0:
            continue
        if t is None:
            raise InvalidInputError("non-empty bin without a threshold")
        num += int(size) * subgroup_lambda(t_prime, t)
        den += int(size)
    if den == 0:
        raise InvalidInputError("all bins are empty")
    return num / den


def prior_shift_probability(y_hat: float, p_old: float, p_new: float) -> float:
    """Re-target a posterior from base rate ``p_old`` to ``p_new``.

    Scales the odds by (p_new / (1 - p_new)) * ((1 - p_old) / p_old). Expanded,
    the denominator is ``p_old - p_old*y_hat + p_new*y_hat - p_old*p_new``; a
    form with ``-y_hat`` in place of ``-p_old*y_hat`` does not return ``y_hat``
    when ``p_new == p_old`` and is not used. The factored form below keeps every
    term positive, so nothing cancels near the ends of (0, 1).
    """
    for name, v in (("y_hat", y_hat), ("p_old", p_old), ("p_new", p_new)):
        if not 0.0 < v < 1.0:
            raise InvalidInputError(f"{name} must be in (0,1), got {v}")
    a = p_new * (1.0 - p_old)
    b = p_old * (1.0 - p_new)
    return y_hat * a / (y_hat * a + (1.0 - y_hat) * b)
