"""Bundled benchmark data.

The CSV files under ``flowoct/data`` are generated by ``scripts/make_datasets.py``
from the defining rules of the MONK's problems and the balance-scale problem.
balance-scale is the complete 5^4 attribute grid, identical in content to the
public file.  The MONK training sets are deterministic samples of the 432-point
attribute grid with the public row counts (124, 169, 122); they are not the
public samples.  monk3 carries label noise on 5% of its rows, like the original.
"""
from __future__ import annotations

import itertools
from importlib import resources

import numpy as np

from .dataset_io import BinaryDataset, load_csv

MONK_LEVELS = (3, 3, 2, 3, 4, 2)
MONK_SIZES = {1: 124, 2: 169, 3: 122}
BUILTIN = ("monk1", "monk2", "monk3", "balance-scale")


def monk_rule(problem: int, a) -> int:
    a1, a2, a3, a4, a5, a6 = a
    if problem == 1:
        return int(a1 == a2 or a5 == 1)
    if problem == 2:
        return int(sum(v == 1 for v in a) == 2)
    if problem == 3:
        return int((a5 == 3 and a4 == 1) or (a5 != 4 and a2 != 3))
    raise ValueError(f"unknown MONK problem {problem}")


def monk_rows(problem: int, seed: int | None = None):
    """Attribute rows and labels for a MONK training sample."""
    grid = list(itertools.product(*(range(1, m + 1) for m in MONK_LEVELS)))
    rng = np.random.default_rng(1000 + problem if seed is None else seed)
    idx = np.sort(rng.choice(len(grid), size=MONK_SIZES[problem], replace=False))
    rows = [grid[i] for i in idx]
    labels = [monk_rule(problem, r) for r in rows]
    if problem == 3:
        noisy = rng.choice(len(rows), size=round(0.05 * len(rows)), replace=False)
        for i in noisy:
            labels[i] = 1 - labels[i]
    return rows, labels


def balance_rows():
    rows, labels = [], []
    for lw, ld, rw, rd in itertools.product(range(1, 6), repeat=4):
        left, right = lw * ld, rw * rd
        rows.append((lw, ld, rw, rd))
        labels.append("L" if left > right else "R" if left < right else "B")
    return rows, labels


def data_path(name: str):
    if name not in BUILTIN:
        raise KeyError(f"unknown builtin dataset {name!r}; choose from {BUILTIN}")
    return resources.files("flowoct") / "data" / f"{name}.csv"


def load_builtin(name: str, label: str | None = None) -> BinaryDataset:
    with resources.as_file(data_path(name)) as p:
        return load_csv(p, label_column=label or "class")
