"""Training runs, the validation sweep over lambda, and the exhaustive-tree oracle."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bnb import SolveReport, solve_mip
from .dataset_io import BinaryDataset, SplitSpec, load_csv, split
from .formulations import FormulationConfig, build, decode
from .tree import TreeSolution, TreeTopology, route

DEFAULT_GRID = tuple(round(0.1 * j, 1) for j in range(10))

__all__ = [
    "DEFAULT_GRID", "RunSpec", "RunResult", "load_data", "fit", "train", "lambda_sweep",
    "enumerate_all_trees", "tree_count", "accuracy", "relabel_terminals", "tree_record", "result_document",
]


@dataclass(frozen=True)
class RunSpec:
    data: str
    label: str | None = None
    formulation: str = "flowoct"
    depth: int = 2
    lam: float = 0.0
    lambda_grid: tuple | None = None
    time_limit: float = 60.0
    seed: int = 0
    split: SplitSpec | None = None
    multi_cuts: bool = False
    lp_method: str = "auto"
    out: str | None = None
    log_path: str | None = None

    def __post_init__(self):
        if int(self.depth) < 1:
            raise ValueError("depth must be at least 1")
        if not self.time_limit > 0:
            raise ValueError("time limit must be positive")
        if self.lambda_grid is not None and len(self.lambda_grid) == 0:
            raise ValueError("lambda grid is empty")


@dataclass
class RunResult:
    tree: TreeSolution
    lam: float
    train_accuracy: float
    validation_accuracy: float | None
    test_accuracy: float | None
    status: str
    objective: float
    bound: float
    gap_percent: float
    time: float
    nodes: int
    lazy_cuts: int
    n_train: int
    sweep: list = field(default_factory=list)
    dataset: BinaryDataset | None = field(default=None, repr=False)


def load_data(path_or_name: str, label: str | None = None) -> BinaryDataset:
    from .datasets import BUILTIN, load_builtin

    if path_or_name in BUILTIN and not Path(path_or_name).exists():
        return load_builtin(path_or_name, label)
    return load_csv(path_or_name, label_column=label)


def accuracy(tree: TreeSolution, ds: BinaryDataset) -> float:
    if ds.n_samples == 0:
        return math.nan
    return 100.0 * float(np.mean(tree.predict(ds.features) == ds.labels))


def fit(ds: BinaryDataset, formulation: str, depth: int, lam: float, time_limit: float = 60.0,
        multi_cuts: bool = False, lp_method: str = "auto", log_path=None):
    """Solve one model on ``ds``; returns (tree or None, SolveReport, model)."""
    cfg = FormulationConfig(depth, lam, formulation, multi_cuts)
    model = build(ds, cfg)
    rep = solve_mip(model, time_limit=time_limit, lp_method=lp_method, log_path=log_path)
    tree = decode(model.layout, rep.x) if rep.has_incumbent else None
    if tree is not None:
        tree = relabel_terminals(tree, ds)
    return tree, rep, model


def relabel_terminals(tree: TreeSolution, ds: BinaryDataset) -> TreeSolution:
    """Give every terminal node reached by training rows its majority class.

    Never lowers the number of correct rows and leaves the splits alone, so an
    optimal tree stays optimal.  It only matters when the objective ignores
    labels (lambda = 1).  Unreached terminals keep their label; ties keep the
    current label when it is among the winners, else the smallest class.
    """
    topo = tree.topo
    counts = {}
    for x, y in zip(ds.features, ds.labels):
        n, k = route(topo, tree, x)
        if k is not None:
            counts.setdefault(n, np.zeros(ds.n_classes, int))[y] += 1
    w = np.array(tree.w)
    for n, c in counts.items():
        cur = tree.label_at(n)
        if c[cur] < c.max():
            w[n] = 0
            w[n, int(np.argmax(c))] = 1
    return TreeSolution(topo, tree.b, w, tree.relaxed)


def _result(tree, rep: SolveReport, lam, train, val, test, sweep=()) -> RunResult:
    if tree is None:
        raise RuntimeError("no feasible tree found within the limits")
    return RunResult(
        tree, lam, accuracy(tree, train),
        None if val is None else accuracy(tree, val),
        None if test is None else accuracy(tree, test),
        rep.status, rep.objective, rep.bound, 100.0 * rep.gap, rep.time, rep.nodes,
        rep.lazy_cuts, train.n_samples, list(sweep), train)


def train(spec: RunSpec) -> RunResult:
    """Train with one lambda; on all rows, or on the train part when ``spec.split`` is set."""
    ds = load_data(spec.data, spec.label)
    if spec.split is not None:
        tr, va, te = split(ds, spec.split)
    else:
        tr, va, te = ds, None, None
    tree, rep, _ = fit(tr, spec.formulation, spec.depth, spec.lam, spec.time_limit,
                       spec.multi_cuts, spec.lp_method, spec.log_path)
    return _result(tree, rep, spec.lam, tr, va, te)


def lambda_sweep(spec: RunSpec) -> RunResult:
    """Pick lambda on the validation part, retrain on train+validation, report test accuracy.

    Validation ties go to the smaller lambda.
    """
    grid = tuple(spec.lambda_grid) if spec.lambda_grid else DEFAULT_GRID
    ds = load_data(spec.data, spec.label)
    tr, va, te = split(ds, spec.split or SplitSpec(seed=spec.seed))
    sweep = []
    for lam in sorted(grid):
        tree, rep, _ = fit(tr, spec.formulation, spec.depth, lam, spec.time_limit,
                           spec.multi_cuts, spec.lp_method)
        acc = accuracy(tree, va) if tree is not None else -1.0
        sweep.append({"lambda": lam, "validation_accuracy": acc, "status": rep.status,
                      "gap_percent": 100.0 * rep.gap})
    best = max(sweep, key=lambda r: (r["validation_accuracy"], -r["lambda"]))["lambda"]
    full = tr.concat(va)
    tree, rep, _ = fit(full, spec.formulation, spec.depth, best, spec.time_limit,
                       spec.multi_cuts, spec.lp_method, spec.log_path)
    res = _result(tree, rep, best, full, va, te, sweep)
    return res


def tree_count(n_features: int, n_classes: int, depth: int) -> int:
    """Number of equality-feasible (b, w) assignments."""
    topo = TreeTopology(depth)
    return (n_features + n_classes) ** len(topo.internal) * n_classes ** len(topo.leaves)


def enumerate_all_trees(ds: BinaryDataset, depth: int, cap: int = 10 ** 7, lam: float = 0.0):
    """Best tree by exhaustive enumeration of equality-feasible (b, w).

    Scores ``(1 - lam) * correct - lam * splits``.  Ties go to the
    lexicographically smallest assignment (b block then w block, in variable
    order).  Returns ``(objective, tree)``.
    """
    topo = TreeTopology(depth)
    F, K = ds.n_features, ds.n_classes
    N, L = topo.internal, topo.leaves
    count = tree_count(F, K, depth)
    if count > cap:
        raise ValueError(f"{count} trees exceed the enumeration cap {cap}; use a smaller instance")
    X, y = ds.features, ds.labels
    # distinct rows with class counts make scoring independent of |I|
    rows, inv = np.unique(X, axis=0, return_inverse=True)
    counts = np.zeros((len(rows), K), int)
    np.add.at(counts, (inv.ravel(), y), 1)
    best, best_key, best_tree = -math.inf, None, None
    inner = [("w", k) for k in range(K)] + [("b", f) for f in range(F)]
    for choice in itertools.product(inner, repeat=len(N)):
        splits = {n: c[1] for n, c in zip(N, choice) if c[0] == "b"}
        internal_labels = {n: c[1] for n, c in zip(N, choice) if c[0] == "w"}
        # terminal node of each distinct row under this internal structure
        term = []
        for r in rows:
            n = 1
            while n in splits:
                n = 2 * n + int(r[splits[n]])
            term.append(n)
        fixed = sum(counts[j, internal_labels[n]] for j, n in enumerate(term) if n in internal_labels)
        reach = {}
        for j, n in enumerate(term):
            if n not in internal_labels:
                reach.setdefault(n, np.zeros(K, int))
                reach[n] += counts[j]
        for labels in itertools.product(range(K), repeat=len(L)):
            correct = fixed + sum(reach[n][k] for n, k in zip(L, labels) if n in reach)
            obj = (1.0 - lam) * correct - lam * len(splits)
            if obj < best - 1e-12:
                continue
            lab = dict(internal_labels)
            lab.update(zip(L, labels))
            tree = TreeSolution.from_rules(topo, F, K, splits, lab)
            key = tree.key()
            if obj > best + 1e-12 or key < best_key:
                best, best_key, best_tree = obj, key, tree
    return best, best_tree


def tree_record(tree: TreeSolution, ds: BinaryDataset, n: int = 1) -> dict:
    """Nested node records: splits carry the feature name, terminals the class."""
    topo = tree.topo
    f = None if topo.is_leaf(n) else tree.feature_at(n)
    if f is not None:
        return {"node": n, "feature": ds.feature_names[f], "feature_index": f,
                "if_0": tree_record(tree, ds, 2 * n), "if_1": tree_record(tree, ds, 2 * n + 1)}
    k = tree.label_at(n)
    return {"node": n, "predict": ds.class_names[k], "class_index": k}


def result_document(res: RunResult, spec: RunSpec) -> str:
    """JSON document with run settings, scores, solver statistics and the tree."""
    ds = res.dataset
    doc = {
        "data": spec.data,
        "formulation": spec.formulation,
        "depth": spec.depth,
        "lambda": res.lam,
        "seed": spec.seed,
        "time_limit": spec.time_limit,
        "multi_cuts": spec.multi_cuts,
        "n_train": res.n_train,
        "train_accuracy": res.train_accuracy,
        "validation_accuracy": res.validation_accuracy,
        "test_accuracy": res.test_accuracy,
        "status": res.status,
        "objective": res.objective,
        "bound": res.bound,
        "gap_percent": res.gap_percent,
        "time_seconds": round(res.time, 3),
        "nodes": res.nodes,
        "lazy_cuts": res.lazy_cuts,
        "splits": res.tree.n_splits,
        "sweep": res.sweep,
        "tree": tree_record(res.tree, ds),
    }
    return json.dumps(doc, indent=2, default=_json_default) + "\n"


def _json_default(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    raise TypeError(type(v))
