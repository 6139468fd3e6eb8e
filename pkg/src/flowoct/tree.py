"""Decision-tree graph, solutions, routing and brute-force flow/cut oracles.

Nodes use heap numbering: the root is 1, node ``n`` has children ``2n`` and
``2n + 1``.  A depth-``d`` tree has internal nodes ``1 .. 2**d - 1`` and leaves
``2**d .. 2**(d+1) - 1``.  The graph adds a source ``"s"`` feeding the root and
a sink ``"t"`` reachable from every node.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

SOURCE = "s"
SINK = "t"

__all__ = [
    "SOURCE", "SINK", "TreeTopology", "TreeSolution", "ArcCapacities", "MaxFlow", "MinCut",
    "capacities", "route", "g_eval", "max_flow_bruteforce", "min_cut_bruteforce",
]


@dataclass(frozen=True)
class TreeTopology:
    depth: int

    def __post_init__(self):
        if int(self.depth) < 1:
            raise ValueError("tree depth must be at least 1")

    @cached_property
    def internal(self) -> tuple[int, ...]:
        return tuple(range(1, 2 ** self.depth))

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        return tuple(range(2 ** self.depth, 2 ** (self.depth + 1)))

    @cached_property
    def nodes(self) -> tuple[int, ...]:
        return self.internal + self.leaves

    @property
    def n_slots(self) -> int:
        """Row count of node-indexed arrays (index 0 is unused)."""
        return 2 ** (self.depth + 1)

    def is_leaf(self, n: int) -> bool:
        return n >= 2 ** self.depth

    @staticmethod
    def left(n: int) -> int:
        return 2 * n

    @staticmethod
    def right(n: int) -> int:
        return 2 * n + 1

    @staticmethod
    def parent(n: int):
        return SOURCE if n == 1 else n // 2

    def path_to(self, n: int) -> tuple[int, ...]:
        """Nodes from the root down to ``n`` inclusive."""
        out = []
        while n >= 1:
            out.append(n)
            n //= 2
        return tuple(reversed(out))

    def ancestors_left(self, n: int) -> tuple[int, ...]:
        """Ancestors of ``n`` whose left branch lies on the root-to-``n`` path."""
        p = self.path_to(n)
        return tuple(a for a, c in zip(p, p[1:]) if c == 2 * a)

    def ancestors_right(self, n: int) -> tuple[int, ...]:
        p = self.path_to(n)
        return tuple(a for a, c in zip(p, p[1:]) if c == 2 * a + 1)

    def subtree_leaves(self, n: int) -> tuple[int, ...]:
        lo, hi = n, n
        while lo < 2 ** self.depth:
            lo, hi = 2 * lo, 2 * hi + 1
        return tuple(range(lo, hi + 1))

    @cached_property
    def arcs(self) -> tuple[tuple, ...]:
        out = [(SOURCE, 1)]
        for n in self.internal:
            out += [(n, 2 * n), (n, 2 * n + 1)]
        out += [(n, SINK) for n in self.nodes]
        return tuple(out)

    @cached_property
    def arc_index(self) -> dict:
        return {a: j for j, a in enumerate(self.arcs)}


@dataclass(frozen=True)
class TreeSolution:
    """Integral branching/labelling decisions.

    ``b[n, f] = 1`` means node ``n`` tests feature ``f`` (``x_f = 0`` goes left),
    ``w[n, k] = 1`` means node ``n`` predicts class ``k``.  Both arrays have
    ``topo.n_slots`` rows indexed by node number; row 0 and the ``b`` rows of
    leaves are zero.  ``relaxed=True`` allows a node to do neither (the
    inequality version of the assignment constraints).
    """

    topo: TreeTopology
    b: np.ndarray
    w: np.ndarray
    relaxed: bool = False

    def __post_init__(self):
        b = np.array(self.b, dtype=np.int8)
        w = np.array(self.w, dtype=np.int8)
        S = self.topo.n_slots
        if b.ndim != 2 or w.ndim != 2 or b.shape[0] != S or w.shape[0] != S:
            raise ValueError(f"b and w need {S} node rows")
        if not (np.isin(b, (0, 1)).all() and np.isin(w, (0, 1)).all()):
            raise ValueError("b and w must be 0/1")
        if b[0].any() or w[0].any() or b[list(self.topo.leaves)].any():
            raise ValueError("row 0 and leaf rows of b must be zero")
        tot = b.sum(axis=1) + w.sum(axis=1)
        nodes = list(self.topo.nodes)
        if self.relaxed:
            if (tot[nodes] > 1).any():
                raise ValueError("a node branches or labels more than once")
        elif (tot[nodes] != 1).any():
            bad = [n for n in nodes if tot[n] != 1]
            raise ValueError(f"nodes {bad} must branch on one feature or carry one label")
        b.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "w", w)

    @property
    def n_features(self) -> int:
        return self.b.shape[1]

    @property
    def n_classes(self) -> int:
        return self.w.shape[1]

    @classmethod
    def from_rules(cls, topo: TreeTopology, n_features: int, n_classes: int,
                   splits: dict | None = None, labels: dict | None = None,
                   relaxed: bool = False) -> "TreeSolution":
        """Build from ``{node: feature}`` and ``{node: class}`` maps."""
        b = np.zeros((topo.n_slots, n_features), dtype=np.int8)
        w = np.zeros((topo.n_slots, n_classes), dtype=np.int8)
        for n, f in (splits or {}).items():
            b[n, f] = 1
        for n, k in (labels or {}).items():
            w[n, k] = 1
        return cls(topo, b, w, relaxed)

    def feature_at(self, n: int):
        hit = np.flatnonzero(self.b[n])
        return int(hit[0]) if hit.size else None

    def label_at(self, n: int):
        hit = np.flatnonzero(self.w[n])
        return int(hit[0]) if hit.size else None

    @property
    def n_splits(self) -> int:
        return int(self.b.sum())

    def predict(self, X) -> np.ndarray:
        """Predicted class per row, -1 for rows stopping at a dead end."""
        return np.array([-1 if (k := route(self.topo, self, x)[1]) is None else k for x in X])

    def key(self) -> tuple:
        """Lexicographic sort key over (b block, w block) in variable order."""
        N, NL = list(self.topo.internal), list(self.topo.nodes)
        return tuple(self.b[N].ravel()) + tuple(self.w[NL].ravel())


@dataclass(frozen=True)
class ArcCapacities:
    topo: TreeTopology
    cap: dict = field(hash=False)

    def __getitem__(self, arc) -> int:
        return self.cap[arc]


def capacities(topo: TreeTopology, sol: TreeSolution, x, y: int) -> ArcCapacities:
    """Arc capacities c(b, w) seen by one datapoint."""
    x = np.asarray(x)
    cap = {(SOURCE, 1): 1}
    for n in topo.internal:
        cap[(n, 2 * n)] = int(sol.b[n][x == 0].sum())
        cap[(n, 2 * n + 1)] = int(sol.b[n][x == 1].sum())
    for n in topo.nodes:
        cap[(n, SINK)] = int(sol.w[n, y])
    return ArcCapacities(topo, cap)


def route(topo: TreeTopology, sol: TreeSolution, x):
    """Follow datapoint ``x`` from the root; return ``(node, class or None)``."""
    n = 1
    while True:
        if not topo.is_leaf(n):
            f = sol.feature_at(n)
            if f is not None:
                n = 2 * n if x[f] == 0 else 2 * n + 1
                continue
        return n, sol.label_at(n)


def g_eval(topo: TreeTopology, sol: TreeSolution, x, y: int) -> int:
    return int(route(topo, sol, x)[1] == y)


@dataclass(frozen=True)
class MaxFlow:
    value: int
    flow: dict = field(hash=False)


@dataclass(frozen=True)
class MinCut:
    value: int
    q: dict = field(hash=False)
    p: dict = field(hash=False)

    @property
    def source_set(self) -> tuple:
        return tuple(n for n, v in self.p.items() if v)


def _check_unit(caps: ArcCapacities):
    if any(v not in (0, 1) for v in caps.cap.values()):
        raise ValueError("brute-force oracles need 0/1 capacities")


def max_flow_bruteforce(caps: ArcCapacities) -> MaxFlow:
    """Best single s-t path by enumeration.

    Every s-t path is ``s -> 1 -> ... -> m -> t`` for some tree node ``m``.  The
    source arc has capacity 1, so the max flow equals the best path bottleneck.
    """
    _check_unit(caps)
    topo = caps.topo
    best_val, best_arcs = 0, ()
    for m in topo.nodes:
        p = topo.path_to(m)
        arcs = ((SOURCE, 1),) + tuple(zip(p, p[1:])) + ((m, SINK),)
        val = min(caps[a] for a in arcs)
        if val > best_val:
            best_val, best_arcs = val, arcs
    flow = {a: 0 for a in topo.arcs}
    for a in best_arcs:
        flow[a] = best_val
    for n in topo.nodes:
        inflow = flow[(topo.parent(n), n)]
        out = flow[(n, SINK)] + (0 if topo.is_leaf(n) else flow[(n, 2 * n)] + flow[(n, 2 * n + 1)])
        assert inflow == out
    return MaxFlow(best_val, flow)


@lru_cache(maxsize=8)
def _source_sets(depth: int) -> tuple:
    """Bitmasks over node positions, by increasing size then lexicographic order."""
    k = 2 ** (depth + 1) - 1
    out = []
    for r in range(k + 1):
        for combo in itertools.combinations(range(k), r):
            out.append(sum(1 << j for j in combo))
    return tuple(out)


def min_cut_bruteforce(caps: ArcCapacities) -> MinCut:
    """Minimum s-t cut by enumerating every source-side node set.

    Among minimum cuts the smallest source set wins (then lexicographic order),
    which is the set of nodes reachable from ``s`` when the cut value is 0.
    """
    _check_unit(caps)
    topo = caps.topo
    if topo.depth > 3:
        raise ValueError("min_cut_bruteforce enumerates 2^|nodes| sets; depth <= 3 only")
    nodes = topo.nodes
    pos = {n: j for j, n in enumerate(nodes)}
    # only arcs of capacity 1 cost anything; s is always on the source side
    live = []
    for (u, v), c in caps.cap.items():
        if c:
            live.append((-1 if u == SOURCE else 1 << pos[u], -1 if v == SINK else 1 << pos[v]))
    best_val, best_mask = None, 0
    for mask in _source_sets(topo.depth):
        val = 0
        for mu, mv in live:
            if (mu == -1 or mask & mu) and (mv == -1 or not mask & mv):
                val += 1
        if best_val is None or val < best_val:
            best_val, best_mask = val, mask
            if val == 0:
                break
    side = {SOURCE, *(n for n in nodes if best_mask >> pos[n] & 1)}
    q = {(u, v): int(u in side and v not in side) for (u, v) in topo.arcs}
    p = {n: int(n in side) for n in nodes}
    return MinCut(best_val, q, p)
