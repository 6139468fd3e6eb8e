"""Shared enumeration helpers for the test suite."""
import itertools

import numpy as np
from flowoct.dataset_io import BinaryDataset
from flowoct.tree import TreeSolution


def all_trees(topo, F, K, relaxed=False):
    """Every integral (b, w) on ``topo``; with ``relaxed`` nodes may also do nothing."""
    inner = [None] + [("b", f) for f in range(F)] + [("w", k) for k in range(K)]
    outer = [None] + [("w", k) for k in range(K)]
    if not relaxed:
        inner, outer = inner[1:], outer[1:]
    N, L = topo.internal, topo.leaves
    for ch in itertools.product(*([inner] * len(N) + [outer] * len(L))):
        splits = {n: c[1] for n, c in zip(N + L, ch) if c and c[0] == "b"}
        labels = {n: c[1] for n, c in zip(N + L, ch) if c and c[0] == "w"}
        yield TreeSolution.from_rules(topo, F, K, splits, labels, relaxed)


def random_dataset(rng, n_rows, n_features, n_classes=2):
    X = rng.integers(0, 2, (n_rows, n_features))
    y = rng.integers(0, n_classes, n_rows)
    y[: n_classes] = np.arange(n_classes)
    return BinaryDataset.from_arrays(X, y)
