"""Feed-forward binary classifier trained with plain mini-batch SGD.

Hidden layers use a configurable activation; the single output unit is a
logistic sigmoid. Weights are stored as (fan_in, fan_out) matrices so a
layer computes ``h @ W + b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError, TrainingDivergedError
from .loss import PROB_CLIP, LossSpec, negative_weight, weighted_ce

_ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True, eq=False)
class NetworkParams:
    layer_sizes: tuple
    weights: tuple
    biases: tuple
    activation: str = "relu"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or sizes[-1] != 1 or min(sizes) < 1:
            raise InvalidInputError(f"bad layer sizes {sizes}; need [d, ..., 1]")
        if self.activation not in _ACTIVATIONS:
            raise InvalidInputError(f"unknown activation {self.activation!r}")
        ws = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=np.float64).reshape(-1) for b in self.biases)
        if len(ws) != len(sizes) - 1 or len(bs) != len(ws):
            raise InvalidInputError("one weight matrix and bias vector per layer required")
        for i, (w, b) in enumerate(zip(ws, bs)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise InvalidInputError(f"layer {i} shapes {w.shape}/{b.shape} do not chain")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise InvalidInputError(f"non-finite parameters in layer {i}")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts += [w.ravel(), b]
        return np.concatenate(parts)

    def with_flat(self, theta: np.ndarray) -> "NetworkParams":
        ws, bs, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(theta[k:k + w.size].reshape(w.shape))
            k += w.size
            bs.append(theta[k:k + b.size].copy())
            k += b.size
        return NetworkParams(self.layer_sizes, tuple(ws), tuple(bs), self.activation)

    def equals(self, other: "NetworkParams") -> bool:
        return (
            self.layer_sizes == other.layer_sizes
            and self.activation == other.activation
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )

    def to_json(self) -> str:
        """Checkpoint as JSON; floats are written with round-trip precision."""
        doc = {
            "format": "adacsl-mlp/1",
            "layer_sizes": list(self.layer_sizes),
            "activation": self.activation,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "NetworkParams":
        doc = json.loads(text)
        if doc.get("format") != "adacsl-mlp/1":
            raise InvalidInputError(f"unrecognized checkpoint format {doc.get('format')!r}")
        sizes = doc["layer_sizes"]
        ws = [
            np.asarray(w, dtype=np.float64).reshape(sizes[i], sizes[i + 1])
            for i, w in enumerate(doc["weights"])
        ]
        return cls(tuple(sizes), tuple(ws), tuple(doc["biases"]), doc["activation"])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 64
    weight_decay: float = 0.0
    max_epochs: int = 30
    seed: int = 0
    hidden: tuple = (32,)
    activation: str = "relu"

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise InvalidInputError("learning_rate must be nonnegative")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise InvalidInputError("batch_size and max_epochs must be positive")
        if self.weight_decay < 0:
            raise InvalidInputError("weight_decay must be nonnegative")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def layer_sizes(self, d: int) -> tuple:
        return (d, *self.hidden, 1)


def init_network(layer_sizes, seed: int, activation: str = "relu") -> NetworkParams:
    """He-scaled normal weights (sqrt(2 / fan_in)), zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) == 0:
        raise InvalidInputError("empty layer list")
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        gain = 2.0 if activation == "relu" else 1.0
        ws.append(rng.normal(0.0, np.sqrt(gain / fan_in), size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return NetworkParams(sizes, tuple(ws), tuple(bs), activation)


def sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _act(name: str, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(name: str, z, a):
    if name == "relu":
        return (z > 0).astype(np.float64)
    return 1.0 - a * a


def _as_matrix(params: NetworkParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != params.n_inputs:
        raise InvalidInputError(
            f"expected {params.n_inputs} features per row, got shape {x.shape}"
        )
    return x


def _forward_cache(params: NetworkParams, x: np.ndarray):
    zs, acts = [], [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        zs.append(z)
        h = z if i == last else _act(params.activation, z)
        acts.append(h)
    return zs, acts


def forward(params: NetworkParams, x) -> float:
    """Positive-class probability for a single feature row."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("forward takes a single feature row")
    return float(predict_batch(params, x.reshape(1, -1))[0])


def predict_batch(params: NetworkParams, features) -> np.ndarray:
    x = _as_matrix(params, features)
    zs, _ = _forward_cache(params, x)
    return np.clip(sigmoid(zs[-1][:, 0]), PROB_CLIP, 1.0 - PROB_CLIP)


def loss_and_gradients(params: NetworkParams, x, y, w: float, weight_decay: float = 0.0):
    """Mean weighted CE over the batch and its gradient for every parameter.

    Weight decay adds ``decay * W`` to each weight gradient (biases excluded),
    i.e. the gradient of ``0.5 * decay * ||W||^2``; the returned loss is the
    data term only.
    """
    x = _as_matrix(params, x)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = x.shape[0]
    if n == 0 or y.shape[0] != n:
        raise InvalidInputError("batch must be non-empty with one label per row")
    zs, acts = _forward_cache(params, x)
    y_hat = np.clip(sigmoid(zs[-1][:, 0]), PROB_CLIP, 1.0 - PROB_CLIP)
    loss = float(np.mean(weighted_ce(y, y_hat, w)))
    # d loss / d logit, written in terms of y_hat to stay finite
    delta = ((-y * (1.0 - y_hat) + w * (1.0 - y) * y_hat) / n).reshape(-1, 1)
    gw, gb = [None] * len(params.weights), [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if weight_decay:
            gw[i] = gw[i] + weight_decay * params.weights[i]
        if i > 0:
            delta = (delta @ params.weights[i].T) * _act_grad(
                params.activation, zs[i - 1], acts[i]
            )
    return loss, gw, gb


def train_batch(
    params: NetworkParams,
    batch,
    spec: LossSpec,
    cfg: TrainConfig,
    epoch: Optional[int] = None,
    batch_index: Optional[int] = None,
):
    """One SGD step on the batch mean loss; returns (new params, batch loss)."""
    x, y = batch
    w = negative_weight(spec)
    loss, gw, gb = loss_and_gradients(params, x, y, w, cfg.weight_decay)
    if not all(np.isfinite(g).all() for g in (*gw, *gb)) or not np.isfinite(loss):
        raise TrainingDivergedError("non-finite gradient", epoch, batch_index)
    lr = cfg.learning_rate
    # overflow here is caught by the finiteness check in NetworkParams
    with np.errstate(over="ignore", invalid="ignore"):
        ws = tuple(p - lr * g for p, g in zip(params.weights, gw))
        bs = tuple(p - lr * g for p, g in zip(params.biases, gb))
    try:
        new = NetworkParams(params.layer_sizes, ws, bs, params.activation)
    except InvalidInputError as exc:
        raise TrainingDivergedError(str(exc), epoch, batch_index) from exc
    return new, loss


def batch_order(n: int, cfg: TrainConfig, epoch: int) -> list:
    """Seeded per-epoch shuffle split into batches of ``cfg.batch_size``."""
    rng = np.random.default_rng([cfg.seed, epoch])
    perm = rng.permutation(n)
    return [perm[i:i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]


def train_epoch(params: NetworkParams, ds, spec: LossSpec, cfg: TrainConfig, epoch: int):
    """Run every batch of one epoch; returns (params, mean batch loss)."""
    losses = []
    for b, idx in enumerate(batch_order(len(ds), cfg, epoch)):
        params, loss = train_batch(
            params, (ds.features[idx], ds.labels[idx]), spec, cfg, epoch, b
        )
        losses.append(loss)
    return params, float(np.mean(losses))

