"""Loading, binarizing and splitting classification datasets.

Every formulation in this package works on binary features, so categorical
columns are expanded here:

* a column whose values are already ``0``/``1`` is kept as is;
* a column with exactly two levels becomes one indicator column for the
  larger level (``col=level``);
* a column with three or more levels is one-hot encoded, one column per level.

Integer-coded columns (``1``, ``2``, ``3``...) are treated as category codes
as long as they have at most ``max_levels`` distinct values.  Anything that
looks continuous is rejected: discretize it first.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "BinaryDataset",
    "DatasetError",
    "SplitSpec",
    "load_csv",
    "split",
    "subsample",
]


class DatasetError(ValueError):
    """Raised for malformed or unsupported input data."""


@dataclass(frozen=True)
class BinaryDataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    feature_names: tuple[str, ...]
    row_ids: np.ndarray = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.int8)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise DatasetError("features must be a 2-d array")
        n, F = X.shape
        if n < 1 or F < 1:
            raise DatasetError(f"need at least one row and one feature, got {X.shape}")
        if not np.isin(X, (0, 1)).all():
            raise DatasetError("features must be 0/1")
        if y.shape != (n,):
            raise DatasetError("labels must have one entry per row")
        K = len(self.class_names)
        if K < 2:
            raise DatasetError("need at least two classes")
        if y.min() < 0 or y.max() >= K:
            raise DatasetError("label index out of range")
        if len(self.feature_names) != F:
            raise DatasetError("feature_names length does not match features")
        rid = np.arange(n) if self.row_ids is None else np.asarray(self.row_ids, dtype=np.int64)
        if rid.shape != (n,):
            raise DatasetError("row_ids must have one entry per row")
        X.setflags(write=False)
        y.setflags(write=False)
        rid.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "row_ids", rid)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @classmethod
    def from_arrays(cls, X, y, class_names: Sequence[str] | None = None,
                    feature_names: Sequence[str] | None = None) -> "BinaryDataset":
        X = np.asarray(X)
        y = np.asarray(y)
        if class_names is None:
            class_names = [str(k) for k in range(max(2, int(y.max()) + 1))]
        if feature_names is None:
            feature_names = [f"x{f}" for f in range(X.shape[1])]
        return cls(X, y, tuple(class_names), tuple(feature_names))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, idx) -> "BinaryDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return BinaryDataset(self.features[idx], self.labels[idx], self.class_names,
                             self.feature_names, self.row_ids[idx], self.warnings)

    def concat(self, other: "BinaryDataset") -> "BinaryDataset":
        if other.feature_names != self.feature_names or other.class_names != self.class_names:
            raise DatasetError("cannot concatenate datasets with different columns")
        return BinaryDataset(np.vstack([self.features, other.features]),
                             np.concatenate([self.labels, other.labels]),
                             self.class_names, self.feature_names,
                             np.concatenate([self.row_ids, other.row_ids]), self.warnings)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: Fraction = Fraction(1, 2)
    validation_fraction: Fraction = Fraction(1, 4)
    test_fraction: Fraction = Fraction(1, 4)
    seed: int = 0

    def __post_init__(self):
        fr = [Fraction(str(v)) if isinstance(v, float) else Fraction(v)
              for v in (self.train_fraction, self.validation_fraction, self.test_fraction)]
        if any(v < 0 for v in fr):
            raise DatasetError("split fractions must be nonnegative")
        if sum(fr) != 1:
            raise DatasetError(f"split fractions must sum to 1, got {float(sum(fr))}")
        if fr[0] <= 0:
            raise DatasetError("train_fraction must be positive")
        object.__setattr__(self, "train_fraction", fr[0])
        object.__setattr__(self, "validation_fraction", fr[1])
        object.__setattr__(self, "test_fraction", fr[2])
        object.__setattr__(self, "seed", int(self.seed))


def _parse_number(s: str):
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _level_key(v: str):
    num = _parse_number(v)
    return (0, num, v) if num is not None else (1, 0.0, v)


def _encode_column(name: str, values: list[str], max_levels: int):
    """Return (columns, names, warning-or-None) for one raw column."""
    nums = [_parse_number(v) for v in values]
    if all(x is not None for x in nums):
        if any(x != int(x) for x in nums):
            raise DatasetError(
                f"column {name!r} holds non-integer numbers; continuous features must be "
                "discretized and binarized before loading")
        levels = sorted(set(nums))
        if set(levels) <= {0.0, 1.0}:
            col = np.array([int(x) for x in nums], dtype=np.int8)
            warn = f"column {name!r} is constant" if len(levels) == 1 else None
            return [col], [name], warn
        if len(levels) > max_levels:
            raise DatasetError(
                f"column {name!r} is numeric with {len(levels)} distinct values; "
                "discretize it into at most a few categories before loading")
    levels = sorted(set(values), key=_level_key)
    if len(levels) > max_levels:
        raise DatasetError(
            f"column {name!r} has {len(levels)} categories (max_levels={max_levels})")
    warn = None
    if len(levels) == 1:
        warn = f"column {name!r} is constant"
    if len(levels) == 2:
        hi = levels[1]
        return [np.array([v == hi for v in values], dtype=np.int8)], [f"{name}={hi}"], warn
    cols = [np.array([v == lv for v in values], dtype=np.int8) for lv in levels]
    return cols, [f"{name}={lv}" for lv in levels], warn


def load_csv(path, label_column: str | None = None, max_levels: int = 12) -> BinaryDataset:
    """Read a comma-separated file with a header row into a `BinaryDataset`.

    ``label_column`` defaults to the last column.  Class indices follow the order
    in which labels first appear in the file.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [[c.strip() for c in r] for r in csv.reader(fh) if any(c.strip() for c in r)]
    if len(rows) < 2:
        raise DatasetError(f"{path}: need a header row and at least one data row")
    header, body = rows[0], rows[1:]
    for ln, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DatasetError(f"{path}:{ln}: expected {len(header)} fields, got {len(r)}")
    if label_column is None:
        label_column = header[-1]
    if label_column not in header:
        raise DatasetError(f"{path}: label column {label_column!r} not in header {header}")
    li = header.index(label_column)
    if len(header) < 2:
        raise DatasetError(f"{path}: no feature columns")

    class_names: list[str] = []
    labels = []
    for r in body:
        v = r[li]
        if v == "":
            raise DatasetError(f"{path}: empty label")
        if v not in class_names:
            class_names.append(v)
        labels.append(class_names.index(v))

    cols, names, warns = [], [], []
    for j, name in enumerate(header):
        if j == li:
            continue
        values = [r[j] for r in body]
        if any(v == "" for v in values):
            raise DatasetError(f"{path}: column {name!r} has missing values")
        c, nm, w = _encode_column(name, values, max_levels)
        cols += c
        names += nm
        if w:
            warns.append(w)
    if len(class_names) < 2:
        raise DatasetError(f"{path}: label column {label_column!r} has a single class")
    X = np.column_stack(cols)
    return BinaryDataset(X, np.array(labels), tuple(class_names), tuple(names),
                         warnings=tuple(warns))


def _part_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    n_val = math.floor(spec.validation_fraction * n)
    n_test = math.floor(spec.test_fraction * n)
    return n - n_val - n_test, n_val, n_test


def split(ds: BinaryDataset, spec: SplitSpec):
    """Shuffle rows with ``spec.seed`` and cut them into train/validation/test.

    Validation and test sizes are floored; the remainder goes to training.
    Rows inside each part keep their original relative order.
    """
    n = ds.n_samples
    sizes = _part_sizes(n, spec)
    fracs = (spec.train_fraction, spec.validation_fraction, spec.test_fraction)
    for name, size, frac in zip(("train", "validation", "test"), sizes, fracs):
        if frac > 0 and size == 0:
            raise DatasetError(f"{name} part is empty: {n} rows are too few for fraction {frac}")
    perm = np.random.default_rng(spec.seed).permutation(n)
    a, b = sizes[0], sizes[0] + sizes[1]
    parts = (perm[:a], perm[a:b], perm[b:])
    return tuple(ds.subset(np.sort(p)) for p in parts)


def subsample(ds: BinaryDataset, n: int, seed: int = 0) -> BinaryDataset:
    """Deterministic sample of ``n`` rows without replacement (original order kept)."""
    if not 1 <= n <= ds.n_samples:
        raise DatasetError(f"cannot draw {n} rows from {ds.n_samples}")
    idx = np.random.default_rng(seed).choice(ds.n_samples, size=n, replace=False)
    return ds.subset(np.sort(idx))
