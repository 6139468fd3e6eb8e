"""MIP models for optimal classification trees on binary data.

Three families share one variable-layout convention (b block, then w block,
then per-datapoint variables), so solutions decode the same way:

``flowoct``
    every datapoint pushes at most one unit of flow from the source through
    the tree to the sink; flow reaches the sink only through a node labelled
    with the datapoint's class.
``benders``
    the master over (b, w, g) whose flow subproblems are replaced by min-cut
    rows added lazily (see `flowoct.benders`).
``oct``
    the big-M leaf-assignment model specialised to binary features.  Nodes
    that do not split send every datapoint right.

All models maximize ``(1 - lam) * correct - lam * splits``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bnb import Cut, MipModel, objective_granularity
from .dataset_io import BinaryDataset
from .tree import SINK, SOURCE, TreeSolution, TreeTopology, route

FAMILIES = ("flowoct", "benders", "oct")

__all__ = [
    "FAMILIES", "FormulationConfig", "Layout", "MultiCut", "build", "build_flowoct",
    "build_benders_master", "build_oct", "generate_multi_cuts", "decode", "encode",
    "tree_objective",
]


@dataclass(frozen=True)
class FormulationConfig:
    depth: int
    lam: float = 0.0
    family: str = "flowoct"
    enable_multi_cuts: bool = False

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 1:
            raise ValueError(f"depth must be an integer >= 1, got {self.depth}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.enable_multi_cuts and self.family != "flowoct":
            raise ValueError("multi-point cuts apply to the flowoct family only")

    @property
    def topology(self) -> TreeTopology:
        return TreeTopology(int(self.depth))


@dataclass
class Layout:
    """Variable indices of a built model; -1 marks an absent slot."""

    family: str
    topo: TreeTopology
    n_samples: int
    n_features: int
    n_classes: int
    b: np.ndarray
    w: np.ndarray
    z: np.ndarray | None = None
    g: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def _arc_name(a) -> str:
    return f"({a[0]},{a[1]})"


def _base_layout(model: MipModel, ds: BinaryDataset, cfg: FormulationConfig, w_nodes) -> Layout:
    topo = cfg.topology
    F, K = ds.n_features, ds.n_classes
    b = np.full((topo.n_slots, F), -1, dtype=np.int64)
    w = np.full((topo.n_slots, K), -1, dtype=np.int64)
    for n in topo.internal:
        for f in range(F):
            b[n, f] = model.add_var(f"b[{n},{f}]", obj=-cfg.lam, integer=True)
    for n in w_nodes:
        for k in range(K):
            w[n, k] = model.add_var(f"w[{n},{k}]", integer=True)
    return Layout(cfg.family, topo, ds.n_samples, F, K, b, w)


def _assignment_rows(model: MipModel, lay: Layout, sense: str = "=="):
    for n in lay.topo.internal:
        coefs = {j: 1.0 for j in lay.b[n]}
        coefs.update({j: 1.0 for j in lay.w[n]})
        model.add_constr(coefs, sense, 1.0, f"assign[{n}]")
    for n in lay.topo.leaves:
        model.add_constr({j: 1.0 for j in lay.w[n]}, sense, 1.0, f"assign[{n}]")


def _finish(model: MipModel, lay: Layout, ds: BinaryDataset, cfg: FormulationConfig):
    model.layout = lay
    model.dataset = ds
    model.config = cfg
    model.granularity = objective_granularity([1.0 - cfg.lam, cfg.lam])
    model.heuristic = lambda x: _round_heuristic(lay, ds, cfg, x)
    return model


def build_flowoct(ds: BinaryDataset, cfg: FormulationConfig) -> MipModel:
    if cfg.family != "flowoct":
        raise ValueError("build_flowoct needs family='flowoct'")
    topo = cfg.topology
    model = MipModel(f"flowoct_d{cfg.depth}")
    lay = _base_layout(model, ds, cfg, topo.nodes)
    arcs = topo.arcs
    acc = 1.0 - cfg.lam
    z = np.full((ds.n_samples, len(arcs)), -1, dtype=np.int64)
    for i in range(ds.n_samples):
        for a, arc in enumerate(arcs):
            z[i, a] = model.add_var(f"z[{i},{_arc_name(arc)}]", obj=acc if arc[1] == SINK else 0.0)
    lay.z = z
    ai = topo.arc_index
    _assignment_rows(model, lay)
    X, y = ds.features, ds.labels
    for i in range(ds.n_samples):
        zi = z[i]
        for n in topo.nodes:
            into = zi[ai[(topo.parent(n), n)]]
            coefs = {into: 1.0, zi[ai[(n, SINK)]]: -1.0}
            if not topo.is_leaf(n):
                coefs[zi[ai[(n, 2 * n)]]] = -1.0
                coefs[zi[ai[(n, 2 * n + 1)]]] = -1.0
            model.add_constr(coefs, "==", 0.0, f"flow[{i},{n}]")
        model.add_constr({zi[ai[(SOURCE, 1)]]: 1.0}, "<=", 1.0, f"source[{i}]")
        for n in topo.internal:
            left = {zi[ai[(n, 2 * n)]]: 1.0}
            left.update({lay.b[n, f]: -1.0 for f in np.flatnonzero(X[i] == 0)})
            model.add_constr(left, "<=", 0.0, f"left[{i},{n}]")
            right = {zi[ai[(n, 2 * n + 1)]]: 1.0}
            right.update({lay.b[n, f]: -1.0 for f in np.flatnonzero(X[i] == 1)})
            model.add_constr(right, "<=", 0.0, f"right[{i},{n}]")
        for n in topo.nodes:
            model.add_constr({zi[ai[(n, SINK)]]: 1.0, lay.w[n, y[i]]: -1.0}, "<=", 0.0,
                             f"sink[{i},{n}]")
    if cfg.enable_multi_cuts:
        for mc in generate_multi_cuts(ds, topo):
            model.add_constr(mc.coefs(lay), "<=", 1.0, mc.name)
    return _finish(model, lay, ds, cfg)


def build_benders_master(ds: BinaryDataset, cfg: FormulationConfig, lazy: bool = True) -> MipModel:
    """Master over (b, w, g); the min-cut rows are supplied by a lazy callback."""
    if cfg.family != "benders":
        raise ValueError("build_benders_master needs family='benders'")
    topo = cfg.topology
    model = MipModel(f"benders_d{cfg.depth}")
    lay = _base_layout(model, ds, cfg, topo.nodes)
    lay.g = np.array([model.add_var(f"g[{i}]", obj=1.0 - cfg.lam) for i in range(ds.n_samples)],
                     dtype=np.int64)
    _assignment_rows(model, lay)
    _finish(model, lay, ds, cfg)
    if lazy:
        from .benders import lazy_callback

        model.lazy = lazy_callback(lay, ds)
    return model


def build_oct(ds: BinaryDataset, cfg: FormulationConfig) -> MipModel:
    if cfg.family != "oct":
        raise ValueError("build_oct needs family='oct'")
    topo = cfg.topology
    I, K = ds.n_samples, ds.n_classes
    M = float(I)
    acc = 1.0 - cfg.lam
    model = MipModel(f"oct_d{cfg.depth}")
    lay = _base_layout(model, ds, cfg, topo.leaves)
    # the split penalty sits on d, not on b
    for j in lay.b[list(topo.internal)].ravel():
        model.set_objective(j, 0.0)
    S = topo.n_slots
    d = np.full(S, -1, dtype=np.int64)
    v = np.full(S, -1, dtype=np.int64)
    for n in topo.internal:
        d[n] = model.add_var(f"d[{n}]", obj=-cfg.lam, integer=True)
    for n in topo.internal:
        v[n] = model.add_var(f"v[{n}]")
    ll = np.full(S, -1, dtype=np.int64)
    for n in topo.leaves:
        ll[n] = model.add_var(f"l[{n}]", integer=True)
    zeta = np.full((I, S), -1, dtype=np.int64)
    for i in range(I):
        for n in topo.leaves:
            zeta[i, n] = model.add_var(f"zeta[{i},{n}]", integer=True)
    L = np.full(S, -1, dtype=np.int64)
    P = np.full(S, -1, dtype=np.int64)
    Pk = np.full((S, K), -1, dtype=np.int64)
    for n in topo.leaves:
        L[n] = model.add_var(f"L[{n}]", 0.0, M, obj=-acc)
    for n in topo.leaves:
        P[n] = model.add_var(f"P[{n}]", 0.0, M)
    for n in topo.leaves:
        for k in range(K):
            Pk[n, k] = model.add_var(f"P[{n},{k}]", 0.0, M)
    model.obj_offset = acc * I
    lay.extra = dict(d=d, v=v, l=ll, zeta=zeta, L=L, P=P, Pk=Pk)

    X, y = ds.features, ds.labels
    for n in topo.leaves:
        for k in range(K):
            model.add_constr({L[n]: 1.0, P[n]: -1.0, Pk[n, k]: 1.0, lay.w[n, k]: -M}, ">=", -M,
                             f"miss_lo[{n},{k}]")
            model.add_constr({L[n]: 1.0, P[n]: -1.0, Pk[n, k]: 1.0, lay.w[n, k]: -M}, "<=", 0.0,
                             f"miss_hi[{n},{k}]")
        for k in range(K):
            coefs = {Pk[n, k]: 1.0}
            coefs.update({zeta[i, n]: -1.0 for i in np.flatnonzero(y == k)})
            model.add_constr(coefs, "==", 0.0, f"count[{n},{k}]")
        coefs = {P[n]: 1.0}
        coefs.update({zeta[i, n]: -1.0 for i in range(I)})
        model.add_constr(coefs, "==", 0.0, f"count[{n}]")
        coefs = {ll[n]: 1.0}
        coefs.update({lay.w[n, k]: -1.0 for k in range(K)})
        model.add_constr(coefs, "==", 0.0, f"labelled[{n}]")
        for i in range(I):
            model.add_constr({zeta[i, n]: 1.0, ll[n]: -1.0}, "<=", 0.0, f"occupied[{i},{n}]")
    for i in range(I):
        model.add_constr({zeta[i, n]: 1.0 for n in topo.leaves}, "==", 1.0, f"one_leaf[{i}]")
    for i in range(I):
        ones = np.flatnonzero(X[i] == 1)
        for n in topo.leaves:
            for m in topo.ancestors_right(n):
                coefs = {lay.b[m, f]: 1.0 for f in ones}
                coefs[v[m]] = -1.0
                coefs[zeta[i, n]] = -1.0
                model.add_constr(coefs, ">=", -1.0, f"go_right[{i},{n},{m}]")
            for m in topo.ancestors_left(n):
                coefs = {lay.b[m, f]: 1.0 for f in ones}
                coefs[v[m]] = -1.0
                coefs[zeta[i, n]] = 2.0
                model.add_constr(coefs, "<=", 1.0, f"go_left[{i},{n},{m}]")
    for n in topo.internal:
        coefs = {j: 1.0 for j in lay.b[n]}
        coefs[d[n]] = -1.0
        model.add_constr(coefs, "==", 0.0, f"split[{n}]")
    for n in topo.internal:
        model.add_constr({v[n]: 1.0, d[n]: -1.0}, "<=", 0.0, f"cutoff[{n}]")
    for n in topo.internal:
        if n != 1:
            model.add_constr({d[n]: 1.0, d[n // 2]: -1.0}, "<=", 0.0, f"hierarchy[{n}]")
    return _finish(model, lay, ds, cfg)


def build(ds: BinaryDataset, cfg: FormulationConfig) -> MipModel:
    return {"flowoct": build_flowoct, "benders": build_benders_master,
            "oct": build_oct}[cfg.family](ds, cfg)


# --------------------------------------------------------------------------- multi-point cuts

@dataclass(frozen=True)
class MultiCut:
    """``sum_{i in H} z[i, (n, 2n)] <= 1 - b[n, f]``."""

    node: int
    feature: int
    members: tuple

    @property
    def name(self) -> str:
        return f"multi[{self.node},{self.feature}]"

    def coefs(self, lay: Layout) -> dict:
        a = lay.topo.arc_index[(self.node, 2 * self.node)]
        out = {int(lay.z[i, a]): 1.0 for i in self.members}
        out[int(lay.b[self.node, self.feature])] = 1.0
        return out

    def to_cut(self, lay: Layout) -> Cut:
        return Cut.from_dict(self.coefs(lay), "<=", 1.0, self.name)


def generate_multi_cuts(ds: BinaryDataset, topo: TreeTopology) -> list[MultiCut]:
    """One cut per bottom-layer node and feature, with H chosen greedily.

    H holds the first datapoint (by index) of each class among rows with
    ``x_f = 1``.
    """
    bottom = [n for n in topo.internal if topo.is_leaf(2 * n)]
    out = []
    for n in bottom:
        for f in range(ds.n_features):
            seen, members = set(), []
            for i in np.flatnonzero(ds.features[:, f] == 1):
                k = int(ds.labels[i])
                if k not in seen:
                    seen.add(k)
                    members.append(int(i))
            if members:
                out.append(MultiCut(n, f, tuple(members)))
    return out


# --------------------------------------------------------------------------- decode / encode

def _oct_skips(lay: Layout, x, n: int) -> bool:
    ex = lay.extra
    return x[ex["d"][n]] < 0.5 or x[ex["v"][n]] <= 1e-6


def decode(lay: Layout, x) -> TreeSolution:
    """Tree encoded by an integral solution vector ``x``."""
    topo = lay.topo
    x = np.asarray(x, float)
    if lay.family != "oct":
        b = np.zeros((topo.n_slots, lay.n_features), np.int8)
        w = np.zeros((topo.n_slots, lay.n_classes), np.int8)
        for n in topo.internal:
            b[n] = np.round(x[lay.b[n]])
        for n in topo.nodes:
            w[n] = np.round(x[lay.w[n]])
        return TreeSolution(topo, b, w)
    return _decode_oct(lay, x)


def _leaf_label(lay: Layout, x, n: int) -> int:
    vals = x[lay.w[n]]
    return int(np.argmax(vals)) if vals.max() > 0.5 else 0


def _decode_oct(lay: Layout, x) -> TreeSolution:
    """OCT sends every datapoint right at a node that does not split (``d = 0``
    or cut-off ``v = 0``).  Such a node is rewritten as its right child's
    subtree moved up one level; a node whose right spine ends in a leaf
    becomes a labelled node."""
    topo = lay.topo
    splits, labels = {}, {}

    def effective(n):
        # follow forced right moves until a real split or a leaf
        while not topo.is_leaf(n) and _oct_skips(lay, x, n):
            n = 2 * n + 1
        return n

    def place(target, source):
        src = effective(source)
        if topo.is_leaf(src):
            labels[target] = _leaf_label(lay, x, src)
            fill_below(target, labels[target])
            return
        if topo.is_leaf(target):
            # cannot happen: a subtree never gets deeper when moved up
            raise AssertionError("OCT decode placed a split on a leaf")
        splits[target] = int(np.argmax(x[lay.b[src]]))
        place(2 * target, 2 * src)
        place(2 * target + 1, 2 * src + 1)

    def fill_below(n, k):
        # nodes under a labelled node are unreachable; keep them well-formed
        if topo.is_leaf(n):
            return
        for c in (2 * n, 2 * n + 1):
            labels[c] = k
            fill_below(c, k)

    place(1, 1)
    return TreeSolution.from_rules(topo, lay.n_features, lay.n_classes, splits, labels)


def _flows(topo: TreeTopology, tree: TreeSolution, x, y):
    n, k = route(topo, tree, x)
    if k != y:
        return {}
    p = topo.path_to(n)
    arcs = [(SOURCE, 1)] + list(zip(p, p[1:])) + [(n, SINK)]
    return {a: 1.0 for a in arcs}


def encode(lay: Layout, ds: BinaryDataset, tree: TreeSolution) -> np.ndarray:
    """Feasible solution vector for ``tree`` (per-datapoint parts set optimally)."""
    topo = lay.topo
    nvar = int(max(lay.b.max(), lay.w.max(),
                   -1 if lay.z is None else lay.z.max(),
                   -1 if lay.g is None else lay.g.max(),
                   *[-1] + [int(np.max(a)) for a in lay.extra.values()])) + 1
    x = np.zeros(nvar)
    X, y = ds.features, ds.labels
    if lay.family != "oct":
        for n in topo.internal:
            x[lay.b[n]] = tree.b[n]
        for n in topo.nodes:
            x[lay.w[n]] = tree.w[n]
        for i in range(ds.n_samples):
            fl = _flows(topo, tree, X[i], int(y[i]))
            if lay.z is not None:
                for a, v in fl.items():
                    x[lay.z[i, topo.arc_index[a]]] = v
            if lay.g is not None:
                x[lay.g[i]] = 1.0 if fl else 0.0
        return x
    ex = lay.extra
    # nodes split only while every ancestor splits; a labelled node sends all
    # datapoints down its right spine, whose leaf carries the label
    active = {}
    for n in topo.internal:
        up = n == 1 or active.get(n // 2, False)
        active[n] = up and tree.feature_at(n) is not None
    leaf_label = {}
    for n in topo.internal:
        if active[n]:
            f = tree.feature_at(n)
            x[lay.b[n, f]] = 1.0
            x[ex["d"][n]] = 1.0
            x[ex["v"][n]] = 1.0
    for n in topo.nodes:
        if (n == 1 or active.get(n // 2, False)) and not (n in active and active[n]):
            k = tree.label_at(n)
            m = n
            while not topo.is_leaf(m):
                m = 2 * m + 1
            leaf_label[m] = k
    for n in topo.leaves:
        if n in leaf_label:
            x[lay.w[n, leaf_label[n]]] = 1.0
            x[ex["l"][n]] = 1.0
    for i in range(ds.n_samples):
        n = 1
        while not topo.is_leaf(n):
            n = 2 * n + (1 if not active[n] or X[i, tree.feature_at(n)] == 1 else 0)
        x[ex["zeta"][i, n]] = 1.0
    for n in topo.leaves:
        members = np.flatnonzero(x[ex["zeta"][:, n]] > 0.5)
        x[ex["P"][n]] = members.size
        for k in range(lay.n_classes):
            x[ex["Pk"][n, k]] = int(np.sum(y[members] == k))
        if n in leaf_label:
            x[ex["L"][n]] = members.size - x[ex["Pk"][n, leaf_label[n]]]
    return x


def tree_objective(tree: TreeSolution, ds: BinaryDataset, lam: float) -> float:
    """``(1 - lam) * correct - lam * splits`` for an explicit tree."""
    correct = int(np.sum(tree.predict(ds.features) == ds.labels))
    return (1.0 - lam) * correct - lam * tree.n_splits


def _majority_relabel(topo: TreeTopology, tree: TreeSolution, ds: BinaryDataset) -> TreeSolution:
    """Keep the splits, give each terminal node the majority class it receives."""
    counts = {}
    for xi, yi in zip(ds.features, ds.labels):
        n, _ = route(topo, tree, xi)
        counts.setdefault(n, np.zeros(tree.n_classes, int))[yi] += 1
    w = np.array(tree.w)
    for n in topo.nodes:
        if w[n].any() and n in counts:
            w[n] = 0
            w[n, int(np.argmax(counts[n]))] = 1
    return TreeSolution(topo, tree.b, w)


def _round_heuristic(lay: Layout, ds: BinaryDataset, cfg: FormulationConfig, x):
    """Round an LP point to a tree, relabel by majority, and encode it."""
    topo = lay.topo
    splits, labels = {}, {}
    for n in topo.internal:
        if lay.family == "oct":
            bn = x[lay.b[n]]
            if bn.max() > 0.5 and (n == 1 or (n // 2) in splits):
                splits[n] = int(np.argmax(bn))
            else:
                labels[n] = 0
        else:
            bn, wn = x[lay.b[n]], x[lay.w[n]]
            if bn.max() >= wn.max():
                splits[n] = int(np.argmax(bn))
            else:
                labels[n] = int(np.argmax(wn))
    for n in topo.leaves:
        labels[n] = int(np.argmax(x[lay.w[n]]))
    tree = TreeSolution.from_rules(topo, lay.n_features, lay.n_classes, splits, labels)
    tree = _majority_relabel(topo, tree, ds)
    if cfg.lam > 0:
        # drop splits whose subtrees predict one class everywhere
        tree = _prune_uniform(topo, tree)
    return encode(lay, ds, tree)


def _prune_uniform(topo: TreeTopology, tree: TreeSolution) -> TreeSolution:
    splits = {n: tree.feature_at(n) for n in topo.internal if tree.feature_at(n) is not None}
    labels = {n: tree.label_at(n) for n in topo.nodes if tree.label_at(n) is not None}

    def uniform(n):
        if n in labels:
            return labels[n]
        if n not in splits:
            return None
        a, b = uniform(2 * n), uniform(2 * n + 1)
        return a if a is not None and a == b else None

    changed = True
    while changed:
        changed = False
        for n in sorted(splits, reverse=True):
            k = uniform(n)
            if k is not None:
                del splits[n]
                labels[n] = k
                changed = True
    for n in list(labels):
        if n != 1 and not _reachable(n, splits):
            del labels[n]
    for n in topo.leaves:
        labels.setdefault(n, 0)
    for n in topo.internal:
        if n not in splits and n not in labels:
            labels[n] = 0
    return TreeSolution.from_rules(topo, tree.n_features, tree.n_classes, splits, labels)


def _reachable(n: int, splits: dict) -> bool:
    while n != 1:
        n //= 2
        if n not in splits:
            return False
    return True
