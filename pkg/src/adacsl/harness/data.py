"""Synthetic data generation, CSV ingestion and splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from ..core import LabeledDataset, validate_dataset
from ..errors import InvalidInputError


@dataclass(frozen=True)
class SyntheticSpec:
    """Two unit-covariance Gaussians separated along the first axis.

    ``val_shift`` moves the validation and test positives (scalar: along
    the first axis, sequence: per coordinate) so a model fit on the
    training data is locally miscalibrated there.
    """

    n_train: int = 10000
    n_val: int = 20000
    n_test: int = 10000
    d: int = 2
    class_sep: float = 1.0
    imbalance_ratio: float = 4.0
    val_shift: Union[float, tuple] = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_train", "n_val", "n_test", "d"):
            if int(getattr(self, name)) < 1:
                raise InvalidInputError(f"{name} must be positive")
        if not self.imbalance_ratio > 0:
            raise InvalidInputError("imbalance_ratio must be positive")
        if not isinstance(self.val_shift, (int, float)):
            object.__setattr__(self, "val_shift", tuple(float(v) for v in self.val_shift))
            if len(self.val_shift) != self.d:
                raise InvalidInputError(f"val_shift needs {self.d} entries")

    def shift_vector(self) -> np.ndarray:
        if isinstance(self.val_shift, tuple):
            return np.asarray(self.val_shift, dtype=np.float64)
        v = np.zeros(self.d)
        v[0] = float(self.val_shift)
        return v

    def class_counts(self, n: int) -> tuple[int, int]:
        """(negatives, positives) for a split of size n."""
        n_pos = int(math.floor(n / (1.0 + self.imbalance_ratio) + 0.5))
        n_pos = min(max(n_pos, 1), n - 1) if n > 1 else n_pos
        return n - n_pos, n_pos


def generate_synthetic(spec: SyntheticSpec):
    """Return (train, val, test) datasets drawn with ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    mu_pos = np.zeros(spec.d)
    mu_pos[0] = spec.class_sep
    shift = spec.shift_vector()

    def draw(n, pos_shift):
        n_neg, n_pos = spec.class_counts(n)
        if n_neg < 1 or n_pos < 1:
            raise InvalidInputError(f"split of {n} rows cannot hold both classes")
        x = np.vstack([
            rng.standard_normal((n_neg, spec.d)),
            rng.standard_normal((n_pos, spec.d)) + mu_pos + pos_shift,
        ])
        y = np.concatenate([np.zeros(n_neg, dtype=np.int64), np.ones(n_pos, dtype=np.int64)])
        perm = rng.permutation(n)
        return LabeledDataset(x[perm], y[perm])

    train = draw(spec.n_train, np.zeros(spec.d))
    val = draw(spec.n_val, shift)
    test = draw(spec.n_test, shift)
    return train, val, test


def load_csv(path) -> LabeledDataset:
    """Read a header + rows CSV whose last column is the 0/1 label."""
    path = Path(path)
    rows, labels = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not header:
            raise InvalidInputError(f"{path}: expected header row")
        if _looks_numeric(header):
            raise InvalidInputError(f"{path}: expected header row, line 1 is numeric")
        width = len(header)
        if width < 2:
            raise InvalidInputError(f"{path}: need at least one feature column and a label")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise InvalidInputError(f"{path}: line {line} has {len(row)} fields, expected {width}")
            try:
                feats = [float(c) for c in row[:-1]]
            except ValueError as exc:
                raise InvalidInputError(f"{path}: line {line}: {exc}") from None
            if not all(math.isfinite(v) for v in feats):
                raise InvalidInputError(f"{path}: line {line}: non-finite feature")
            lab = row[-1].strip()
            if lab not in ("0", "1", "0.0", "1.0"):
                raise InvalidInputError(f"{path}: line {line}: label {lab!r} out of {{0,1}}")
            rows.append(feats)
            labels.append(int(float(lab)))
    if not rows:
        raise InvalidInputError(f"{path}: empty dataset")
    ds = LabeledDataset(np.asarray(rows), np.asarray(labels))
    validate_dataset(ds)
    return ds


def _looks_numeric(cells) -> bool:
    try:
        [float(c) for c in cells]
    except ValueError:
        return False
    return True


def write_csv(ds: LabeledDataset, path, feature_names=None) -> None:
    names = feature_names or [f"x{i}" for i in range(ds.n_features)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "label"])
        for row, lab in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def split_indices(labels, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> tuple:
    """Seeded disjoint (train, val, test) row indices, stratified by label."""
    fr = np.asarray(fractions, dtype=np.float64)
    if fr.shape != (3,) or (fr <= 0).any() or not np.isclose(fr.sum(), 1.0):
        raise InvalidInputError(f"split fractions must be three positives summing to 1, got {fractions}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    parts = [[], [], []]
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        n_train = int(round(fr[0] * idx.size))
        n_val = int(round(fr[1] * idx.size))
        parts[0].append(idx[:n_train])
        parts[1].append(idx[n_train:n_train + n_val])
        parts[2].append(idx[n_train + n_val:])
    out = tuple(np.sort(np.concatenate(p)) for p in parts)
    if any(idx.size == 0 for idx in out):
        raise InvalidInputError("split produced an empty partition")
    return out


def split_dataset(ds: LabeledDataset, fractions=(0.6, 0.2, 0.2), seed: int = 0):
    """Seeded disjoint train/val/test split, stratified by label."""
    return tuple(ds.subset(idx) for idx in split_indices(ds.labels, fractions, seed))
