"""Min-cut separation for the Benders master and facet certification.

For an integral tree (b, w) and datapoint i the arc capacities c(b, w) form
a graph in which every node has at most one outgoing arc of capacity 1.
`separate` walks that unique path from the root.  If it ends at a node that
sends i to the sink, no cut is violated; otherwise the nodes visited form the
source side S of a zero-capacity cut and the cut

    g_i <= sum of c_a(b, w) over arcs a leaving S

is returned in (b, w, g) coefficient form.

Cut dump format (`BendersCut.dump`), one line per cut::

    cut i=<datapoint> S=<n1>,<n2>,... rhs=<term>+<term>+...

where each term is ``b[n,f]`` or ``w[n,k]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .bnb import Cut
from .tree import SINK, SOURCE, TreeSolution, TreeTopology, g_eval

__all__ = [
    "SeparationError", "FacetError", "BendersCut", "SeparationOutcome", "FacetReport",
    "separate", "separate_all", "closed_form_terms", "lazy_callback", "verify_facet",
    "facet_rank_bruteforce", "affine_rank",
]


class SeparationError(ValueError):
    """The queried master point violates the separation preconditions."""


class FacetError(AssertionError):
    """A constructed facet point is infeasible or off the cut."""


@dataclass(frozen=True)
class BendersCut:
    """``g[i] <= sum(b[n,f] for (n,f) in b_terms) + sum(w[n,k] for (n,k) in w_terms)``."""

    i: int
    path: tuple
    q: dict = field(hash=False, compare=False)
    b_terms: tuple = ()
    w_terms: tuple = ()
    solution: TreeSolution | None = field(default=None, hash=False, compare=False)
    x: np.ndarray | None = field(default=None, hash=False, compare=False, repr=False)
    y: int = 0

    @property
    def terminal(self) -> int:
        return self.path[-1]

    def rhs(self, b, w) -> int:
        return int(sum(b[n][f] for n, f in self.b_terms) + sum(w[n][k] for n, k in self.w_terms))

    def to_cut(self, lay) -> Cut:
        coefs = {int(lay.g[self.i]): 1.0}
        for n, f in self.b_terms:
            coefs[int(lay.b[n, f])] = -1.0
        for n, k in self.w_terms:
            coefs[int(lay.w[n, k])] = -1.0
        return Cut.from_dict(coefs, "<=", 0.0, f"benders[{self.i},{self.terminal}]")

    def dump(self) -> str:
        terms = [f"b[{n},{f}]" for n, f in self.b_terms] + [f"w[{n},{k}]" for n, k in self.w_terms]
        return f"cut i={self.i} S={','.join(map(str, self.path))} rhs={'+'.join(terms) or '0'}"


@dataclass(frozen=True)
class SeparationOutcome:
    verdict: str
    cut: BendersCut | None
    path: tuple
    steps: int


def _arc_terms(topo: TreeTopology, x, y: int, arc, n_features: int):
    """Variables whose sum is the capacity of ``arc`` for datapoint (x, y)."""
    u, v = arc
    if u == SOURCE:
        return [], []
    if v == SINK:
        return [], [(u, y)]
    want = 0 if v == 2 * u else 1
    return [(u, f) for f in range(n_features) if x[f] == want], []


def separate(topo: TreeTopology, sol: TreeSolution, x, y: int, g: float,
             i: int = 0) -> SeparationOutcome:
    """Find a violated min-cut inequality for datapoint ``i`` or report none."""
    if g <= 0:
        return SeparationOutcome("no_cut", None, (), 0)
    x = np.asarray(x)
    b, w = sol.b, sol.w
    q = {a: 0 for a in topo.arcs}
    path = []
    n = 1
    steps = 0
    while True:
        steps += 1
        if steps > topo.depth + 1:
            raise AssertionError("separation walked past a leaf")
        path.append(n)
        leaf = topo.is_leaf(n)
        c_left = 0 if leaf else int(b[n][x == 0].sum())
        c_right = 0 if leaf else int(b[n][x == 1].sum())
        c_sink = int(w[n, y])
        if c_left + c_right + c_sink > 1:
            raise SeparationError(f"node {n} has two outgoing arcs of capacity 1 for datapoint {i}")
        if c_left == 1:
            q[(n, 2 * n + 1)] = 1
            q[(n, SINK)] = 1
            n = 2 * n
        elif c_right == 1:
            q[(n, 2 * n)] = 1
            q[(n, SINK)] = 1
            n = 2 * n + 1
        elif c_sink == 0:
            if not leaf:
                q[(n, 2 * n)] = 1
                q[(n, 2 * n + 1)] = 1
            q[(n, SINK)] = 1
            break
        else:
            return SeparationOutcome("no_cut", None, tuple(path), steps)
    bt, wt = [], []
    for a in topo.arcs:
        if q[a]:
            tb, tw = _arc_terms(topo, x, y, a, sol.n_features)
            bt += tb
            wt += tw
    cut = BendersCut(i, tuple(path), q, tuple(sorted(bt)), tuple(sorted(wt)), sol, x.copy(), int(y))
    assert cut.rhs(b, w) == 0
    return SeparationOutcome("cut", cut, tuple(path), steps)


def separate_all(topo: TreeTopology, sol: TreeSolution, X, y, g) -> list[BendersCut]:
    out = []
    for i in range(len(y)):
        res = separate(topo, sol, X[i], int(y[i]), g[i], i)
        if res.verdict == "cut":
            out.append(res.cut)
    return out


def closed_form_terms(topo: TreeTopology, sol: TreeSolution, x, y: int, path):
    """Right-hand side of the cut written directly from the path S.

    ``w[n_last, y]`` plus, for every node on S that branches on ``f(n)``, the
    features ``f`` with ``x_f != x_f(n)``; a terminal internal node without a
    split contributes all of its ``b`` variables.  Label terms of non-terminal
    path nodes are not part of this form.
    """
    x = np.asarray(x)
    last = path[-1]
    bt = []
    for n in path:
        if topo.is_leaf(n):
            continue
        fn = sol.feature_at(n)
        if fn is None:
            bt += [(n, f) for f in range(sol.n_features)]
        else:
            bt += [(n, f) for f in range(sol.n_features) if x[f] != x[fn]]
    return tuple(sorted(bt)), ((last, int(y)),)


def lazy_callback(lay, ds):
    """Callback for `bnb.solve_mip`: Algorithm-style cuts at integral points."""
    from .formulations import decode

    topo = lay.topo
    X, y = ds.features, ds.labels

    def callback(xv):
        sol = decode(lay, xv)
        g = np.where(xv[lay.g] > 1e-6, xv[lay.g], 0.0)
        return [c.to_cut(lay) for c in separate_all(topo, sol, X, y, g)]

    return callback


# --------------------------------------------------------------------------- facets

def affine_rank(points) -> int:
    """Exact affine rank of integer points (rank of differences to the first)."""
    pts = [list(map(Fraction, p)) for p in points]
    if not pts:
        return -1
    base = pts[0]
    rows = [[a - b for a, b in zip(p, base)] for p in pts[1:]]
    rank = 0
    ncol = len(base)
    for c in range(ncol):
        piv = next((r for r in range(rank, len(rows)) if rows[r][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        pr = rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][c] != 0:
                fac = rows[r][c] / pr[c]
                rows[r] = [a - fac * b for a, b in zip(rows[r], pr)]
        rank += 1
    return rank


@dataclass(frozen=True)
class FacetReport:
    facet_confirmed: bool
    rank: int
    target: int
    points: tuple = field(repr=False)
    method: str = "table"


def _point_ok(topo, X, y, b, w, g) -> bool:
    sol = TreeSolution(topo, b, w, relaxed=True)
    if not all(0 <= v <= 1 for v in g):
        return False
    return all(g[j] <= g_eval(topo, sol, X[j], int(y[j])) for j in range(len(y)))


def verify_facet(topo: TreeTopology, ds, cut: BendersCut) -> FacetReport:
    """Build the affinely independent point families for ``cut`` and check them.

    For a full tree (every internal node splits) the explicit families are
    built in the (b, w, g) space of the master and the rank is taken over the
    b, leaf-w and g coordinates, where the target is
    ``|N x F| + |L x K| + |I| - 1``.  Cuts from trees with internal labels
    carry internal w terms, so for those the face dimension is certified by
    enumerating the full space instead (``method="enumeration"``).
    """
    sol = cut.solution
    X, y = ds.features, ds.labels
    F, K, I = sol.n_features, sol.n_classes, len(y)
    N, Lv = topo.internal, topo.leaves
    if any(sol.w[n].any() for n in N) or any(sol.feature_at(n) is None for n in N):
        rank, dim = facet_rank_bruteforce(topo, ds, cut)
        return FacetReport(rank == dim - 1, rank, dim - 1, (), "enumeration")
    i, yi = cut.i, int(cut.y)
    S = [n for n in cut.path if not topo.is_leaf(n)]
    ni = cut.terminal
    if not topo.is_leaf(ni):
        raise ValueError("cut path must end at a leaf for a full tree")
    notS = [n for n in N if n not in S]
    xi = X[i]
    bbar = np.array(sol.b)
    fn = {n: sol.feature_at(n) for n in N}

    def leaf_of(j):
        n = 1
        while not topo.is_leaf(n):
            n = 2 * n + int(X[j, fn[n]])
        return n

    def blank():
        b = np.zeros_like(bbar)
        for n in S:
            b[n] = bbar[n]
        return b, np.zeros_like(sol.w), np.zeros(I, int)

    pts = []

    def add(row, b, w, g):
        if not _point_ok(topo, X, y, b, w, g):
            raise FacetError(f"family {row}: point is not in the relaxed master set")
        if g[i] != cut.rhs(b, w):
            raise FacetError(f"family {row}: cut is not tight (g={g[i]}, rhs={cut.rhs(b, w)})")
        pts.append((row, b, w, g))

    add(1, *blank())
    for n in Lv:
        for k in range(K):
            if k != yi:
                b, w, g = blank()
                w[n, k] = 1
                add(2, b, w, g)
    for n in Lv:
        if n != ni:
            b, w, g = blank()
            w[n, yi] = 1
            add(3, b, w, g)
    b, w, g = blank()
    w[ni, yi] = 1
    g[i] = 1
    add(4, b, w, g)
    for n in notS:
        for f in range(F):
            b, w, g = blank()
            b[n, f] = 1
            add(5, b, w, g)
    for n in S:
        b, w, g = blank()
        b[n, fn[n]] = 0
        add(6, b, w, g)
        for f in range(F):
            if f == fn[n]:
                continue
            b, w, g = blank()
            b[n, fn[n]] = 0
            b[n, f] = 1
            if xi[f] == xi[fn[n]]:
                add(7, b, w, g)
                continue
            for m in Lv:
                if m != ni:
                    w[m, yi] = 1
            g[i] = 1
            # i now leaves the path at n; if it lands on an internal node
            # (which does not split here) label that node so i is classified
            c = 2 * n + int(xi[f])
            if not topo.is_leaf(c):
                w[c, yi] = 1
            add(8, b, w, g)
    for j in range(I):
        if j == i:
            continue
        b, w, g = blank()
        for n in notS:
            b[n] = bbar[n]
        nj = leaf_of(j)
        if int(y[j]) != yi or nj != ni:
            w[nj, int(y[j])] = 1
            g[j] = 1
            add(9 if int(y[j]) != yi else 10, b, w, g)
        else:
            w[ni, yi] = 1
            g[i] = g[j] = 1
            add(11, b, w, g)

    proj = [np.concatenate([b[list(N)].ravel(), w[list(Lv)].ravel(), g]) for _, b, w, g in pts]
    target = len(N) * F + len(Lv) * K + I - 1
    if len(pts) != target + 1:
        raise FacetError(f"built {len(pts)} points, expected {target + 1}")
    rank = affine_rank(proj)
    return FacetReport(rank == target, rank, target, tuple(pts))


# ----- brute-force face dimension in the full (b, w, g) space

_P = 2_147_483_647


def _rank_mod_p(M: np.ndarray) -> int:
    A = np.array(M, dtype=np.int64) % _P
    rank = 0
    rows, cols = A.shape
    for c in range(cols):
        nz = np.flatnonzero(A[rank:, c]) + rank
        if nz.size == 0:
            continue
        p = nz[0]
        A[[rank, p]] = A[[p, rank]]
        inv = pow(int(A[rank, c]), _P - 2, _P)
        A[rank] = (A[rank] * inv) % _P
        others = np.flatnonzero(A[:, c])
        others = others[others != rank]
        if others.size:
            A[others] = (A[others] - (A[others, c:c + 1] * A[rank]) % _P) % _P
        rank += 1
        if rank == rows:
            break
    return rank


@lru_cache(maxsize=8)
def _relaxed_points(depth: int, F: int, K: int, Xb: bytes, yb: bytes, shape: tuple):
    """Every integral relaxed (b, w) as a 0/1 row, with g_eval for each datapoint."""
    topo = TreeTopology(depth)
    X = np.frombuffer(Xb, dtype=np.int8).reshape(shape)
    y = np.frombuffer(yb, dtype=np.int64)
    N, NL = topo.internal, topo.nodes
    nN = len(N)
    # option codes: -1 nothing, 0..F-1 split on f, F..F+K-1 label k-F
    inner = range(-1, F + K)
    outer = [-1] + list(range(F, F + K))
    count = len(inner) ** nN * len(outer) ** len(topo.leaves)
    if count > 300_000:
        raise ValueError(f"{count} relaxed trees is too many to enumerate")
    V, G = [], []
    width = nN * F + len(NL) * K
    for choice in itertools.product(*([inner] * nN + [outer] * len(topo.leaves))):
        row = np.zeros(width, np.int64)
        for a, c in enumerate(choice):
            if c < 0:
                continue
            if c < F:
                row[a * F + c] = 1
            else:
                row[nN * F + a * K + c - F] = 1
        V.append(row)
        gs = []
        for xj, yj in zip(X, y):
            n = 1
            while True:
                c = choice[n - 1]
                if 0 <= c < F:
                    n = 2 * n + int(xj[c])
                    continue
                gs.append(int(c == F + yj))
                break
        G.append(gs)
    return np.array(V, np.int64), np.array(G, np.int64)


def facet_rank_bruteforce(topo: TreeTopology, ds, cut: BendersCut):
    """(affine rank of the face, dimension of conv(H_<=)) by enumeration.

    The face is spanned by the vertices of conv(H_<=) where the cut is tight.
    The rank is computed modulo a large prime, which never exceeds the
    rational rank; since every face point satisfies the cut with equality the
    rational rank is at most ``dim - 1``, so ``rank == dim - 1`` certifies a
    facet exactly.
    """
    X, y = ds.features, ds.labels
    F, K, I = ds.n_features, ds.n_classes, len(y)
    V, G = _relaxed_points(topo.depth, F, K, X.tobytes(), np.asarray(y, np.int64).tobytes(),
                           X.shape)
    N, NL = topo.internal, topo.nodes
    bpos = {(n, f): a * F + f for a, n in enumerate(N) for f in range(F)}
    wpos = {(n, k): len(N) * F + a * K + k for a, n in enumerate(NL) for k in range(K)}
    coef = np.zeros(V.shape[1], np.int64)
    for t in cut.b_terms:
        coef[bpos[t]] += 1
    for t in cut.w_terms:
        coef[wpos[t]] += 1
    rhs = V @ coef
    i = cut.i
    if np.any(G[:, i] > rhs):
        raise FacetError("cut is violated by a relaxed master point")
    on = (rhs == 0) | ((rhs == 1) & (G[:, i] == 1))
    base = np.hstack([V[on], np.zeros((on.sum(), I), np.int64)])
    base[:, V.shape[1] + i] = rhs[on]
    blocks = [base]
    for j in range(I):
        if j != i:
            sel = G[on, j] == 1
            extra = base[sel].copy()
            extra[:, V.shape[1] + j] = 1
            blocks.append(extra)
    P = np.unique(np.vstack(blocks), axis=0)
    dim = P.shape[1]
    rank = _rank_mod_p(P[1:] - P[0]) if len(P) > 1 else 0
    return rank, dim
