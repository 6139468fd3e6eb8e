"""Branch-and-bound for 0/1 mixed-integer programs with lazy constraints.

A `MipModel` is built incrementally (``add_var`` / ``add_constr``) and frozen
into a `LinearProgram` when solved.  Lazy constraint callbacks receive the
integral LP point at every LP-integral node and return cuts violated there;
the cuts join a global pool and the node is re-solved.

Node log (``log_path``): one JSON object per processed node with keys
``node``, ``depth``, ``bound`` (node LP bound), ``global_bound``,
``incumbent`` (``null`` until one exists), ``cuts`` (pool size) and
``event`` (``branch``, ``integral``, ``pruned``, ``infeasible``).
"""
from __future__ import annotations

import heapq
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .linprog import (TOL_FEAS, TOL_INT, LinearProgram, LpSolution, primal_violation,
                      solve_lp, write_lp)

__all__ = ["Cut", "MipModel", "SolveReport", "LazyCutError", "solve_mip", "register_lazy"]


class LazyCutError(RuntimeError):
    """A lazy callback returned a cut that does not cut off the current point."""


@dataclass(frozen=True)
class Cut:
    """Linear row ``sum(vals * x[idx]) sense rhs``."""

    idx: tuple
    vals: tuple
    sense: str
    rhs: float
    name: str = ""

    @classmethod
    def from_dict(cls, coefs: dict, sense: str, rhs: float, name: str = "") -> "Cut":
        items = sorted((int(j), float(v)) for j, v in coefs.items() if v != 0)
        return cls(tuple(j for j, _ in items), tuple(v for _, v in items), sense, float(rhs), name)

    def activity(self, x) -> float:
        return float(sum(v * x[j] for j, v in zip(self.idx, self.vals)))

    def violation(self, x) -> float:
        a = self.activity(x)
        if self.sense == "<=":
            return a - self.rhs
        if self.sense == ">=":
            return self.rhs - a
        return abs(a - self.rhs)


class MipModel:
    """Maximization MIP whose integer variables are all binary."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.var_index: dict[str, int] = {}
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._obj: list[float] = []
        self._int: list[bool] = []
        self._rows: list[Cut] = []
        self.obj_offset = 0.0
        self.lazy: Callable | None = None
        self.heuristic: Callable | None = None
        # spacing of objective values attained by integer-feasible points (if known)
        self.granularity: float | None = None
        self._lp: LinearProgram | None = None

    # -- building
    def add_var(self, name: str, lb: float = 0.0, ub: float = 1.0, obj: float = 0.0,
                integer: bool = False) -> int:
        if name in self.var_index:
            raise ValueError(f"duplicate variable {name!r}")
        if integer and (lb < 0 or ub > 1):
            raise ValueError(f"integer variable {name!r} must live in [0, 1]")
        j = len(self.var_names)
        self.var_names.append(name)
        self.var_index[name] = j
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._obj.append(float(obj))
        self._int.append(bool(integer))
        self._lp = None
        return j

    def add_constr(self, coefs: dict, sense: str, rhs: float, name: str = "") -> Cut:
        row = Cut.from_dict(coefs, sense, rhs, name or f"r{len(self._rows)}")
        self._rows.append(row)
        self._lp = None
        return row

    def set_objective(self, j: int, coef: float):
        self._obj[j] = float(coef)
        self._lp = None

    # -- views
    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self._rows)

    @property
    def rows(self) -> tuple:
        return tuple(self._rows)

    @property
    def integer(self) -> np.ndarray:
        return np.array(self._int, dtype=bool)

    def to_lp(self) -> LinearProgram:
        if self._lp is None:
            self._lp = LinearProgram(np.array(self._obj), _rows_matrix(self._rows, self.n_vars),
                                     tuple(r.sense for r in self._rows),
                                     np.array([r.rhs for r in self._rows]),
                                     np.array(self._lb), np.array(self._ub), self.obj_offset)
        return self._lp

    def objective(self, x) -> float:
        return float(np.dot(self._obj, x) + self.obj_offset)

    def relaxation(self, method: str = "auto") -> LpSolution:
        """LP relaxation of the static rows (lazy rows excluded)."""
        lp = self.to_lp()
        return solve_lp(lp, method=_pick_method(lp, method))

    def values(self, x) -> dict:
        return {nm: float(v) for nm, v in zip(self.var_names, x)}

    def export_lp(self, path):
        write_lp(self.to_lp(), path, self.var_names, self.integer,
                 [r.name for r in self._rows], comment=f"{self.name}: maximization")


def _rows_matrix(rows: Sequence[Cut], n: int) -> sp.csr_matrix:
    data, ind, ptr = [], [], [0]
    for r in rows:
        ind.extend(r.idx)
        data.extend(r.vals)
        ptr.append(len(ind))
    return sp.csr_matrix((np.array(data, float), np.array(ind, np.int64), np.array(ptr)),
                         shape=(len(rows), n))


def register_lazy(model: MipModel, callback: Callable) -> MipModel:
    """Attach ``callback(x) -> list[Cut]``, called at every LP-integral node."""
    model.lazy = callback
    return model


@dataclass
class SolveReport:
    status: str
    objective: float
    bound: float
    gap: float
    nodes: int
    time: float
    x: np.ndarray | None = field(default=None, repr=False)
    lazy_cuts: int = 0
    lp_iterations: int = 0
    bound_trace: list = field(default_factory=list, repr=False)

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None


def _finite(v):
    """Log value: non-finite bounds become null so each line stays valid JSON."""
    return v if v is not None and math.isfinite(v) else None


def _gap(bound: float, inc: float) -> float:
    if not math.isfinite(inc):
        return math.inf
    return abs(bound - inc) / max(1.0, abs(inc))


def _pick_method(lp: LinearProgram, method: str) -> str:
    if method != "auto":
        return method
    return "simplex" if lp.n_vars * lp.n_rows <= 60_000 else "highs"


@dataclass
class _Node:
    lb: np.ndarray
    ub: np.ndarray
    bound: float
    depth: int
    basis: object = None
    ident: int = 0


def _round_down(v: float, gran: float | None) -> float:
    if gran is None or not math.isfinite(v):
        return v
    return math.floor(v / gran + 1e-6) * gran


def solve_mip(model: MipModel, time_limit: float | None = None, node_limit: int | None = None,
              lp_method: str = "auto", log_path=None, tol_int: float = TOL_INT) -> SolveReport:
    """Best-bound branch and bound.

    Open nodes are ordered by LP bound; equal bounds go to the deepest node,
    then first-in first-out.  Branching picks the most fractional binary
    (lowest index on ties) and explores the ``= 1`` child first.
    """
    t0 = time.perf_counter()
    base = model.to_lp()
    integer = model.integer
    int_idx = np.flatnonzero(integer)
    gran = model.granularity

    pool: list[Cut] = []
    lp_cache = {"n": -1, "lp": base}

    def current_lp() -> LinearProgram:
        if lp_cache["n"] != len(pool):
            lp = base
            if pool:
                lp = base.with_rows(_rows_matrix(pool, base.n_vars), [c.sense for c in pool],
                                    [c.rhs for c in pool])
            lp_cache.update(n=len(pool), lp=lp)
        return lp_cache["lp"]

    inc_obj, inc_x = -math.inf, None
    iters = 0
    trace = []
    log = open(log_path, "w") if log_path else None

    def emit(node, bound, event):
        if log:
            rec = {"node": node.ident, "depth": node.depth, "bound": _finite(bound),
                   "global_bound": _finite(global_bound),
                   "incumbent": inc_obj if inc_x is not None else None,
                   "cuts": len(pool), "event": event}
            log.write(json.dumps(rec) + "\n")

    def add_cuts(cuts, x, strict):
        for c in cuts:
            if strict and c.violation(x) <= 1e-9:
                raise LazyCutError(f"lazy cut {c.name or c} is not violated at the current point")
            pool.append(c)

    def try_incumbent(x):
        nonlocal inc_obj, inc_x
        if model.lazy is not None:
            cuts = list(model.lazy(x))
            if cuts:
                add_cuts(cuts, x, strict=True)
                return False
        obj = model.objective(x)
        if gran is not None:
            # continuous parts of an integral tree carry solver noise
            snapped = round(obj / gran) * gran
            if abs(snapped - obj) <= 1e-6:
                obj = snapped
        if obj > inc_obj + 1e-9:
            inc_obj, inc_x = obj, x.copy()
        return True

    seq = 0
    root = _Node(base.lb.copy(), base.ub.copy(), math.inf, 0)
    heap = [(-math.inf, 0, 0, root)]
    global_bound = math.inf
    nodes = 0
    status = "optimal"
    try:
        while heap:
            # global bound = best open bound (nodes are popped in bound order)
            top = -heap[0][0]
            gb = max(top, inc_obj) if math.isfinite(top) else top
            if gb < global_bound:
                global_bound = gb
                trace.append(global_bound)
            if time_limit is not None and time.perf_counter() - t0 > time_limit:
                status = "time_limit"
                break
            if node_limit is not None and nodes >= node_limit:
                status = "node_limit"
                break
            _, _, _, node = heapq.heappop(heap)
            if _round_down(node.bound, gran) <= inc_obj + 1e-9:
                continue
            nodes += 1
            basis = node.basis
            while True:
                lp = current_lp().with_bounds(node.lb, node.ub)
                # chosen per solve: the cut pool can grow the LP past the simplex range
                method = _pick_method(lp, lp_method)
                sol = solve_lp(lp, method=method, warm_start=basis if method == "simplex" else None)
                iters += sol.iterations
                if not sol.optimal:
                    emit(node, None, "infeasible")
                    break
                bound = min(sol.objective, node.bound)
                if _round_down(bound, gran) <= inc_obj + 1e-9:
                    emit(node, bound, "pruned")
                    break
                x = sol.x
                frac = np.abs(x[int_idx] - np.round(x[int_idx]))
                fractional = int_idx[frac > tol_int]
                if fractional.size == 0:
                    xi = x.copy()
                    xi[int_idx] = np.round(xi[int_idx])
                    if try_incumbent(xi):
                        emit(node, bound, "integral")
                        break
                    basis = sol.basis
                    continue
                if model.heuristic is not None:
                    cand = model.heuristic(x)
                    if cand is not None:
                        cand = np.asarray(cand, float)
                        if primal_violation(current_lp(), cand) <= TOL_FEAS and \
                                model.objective(cand) > inc_obj + 1e-9:
                            n_before = len(pool)
                            try_incumbent(cand)
                            if len(pool) != n_before:
                                basis = sol.basis
                                continue
                    if _round_down(bound, gran) <= inc_obj + 1e-9:
                        emit(node, bound, "pruned")
                        break
                dist = np.abs(x[fractional] - 0.5)
                j = int(fractional[np.argmin(dist)])
                for val in (1.0, 0.0):
                    lb, ub = node.lb.copy(), node.ub.copy()
                    lb[j] = ub[j] = val
                    seq += 1
                    child = _Node(lb, ub, bound, node.depth + 1, sol.basis, seq)
                    key = -_round_down(bound, gran)
                    heapq.heappush(heap, (round(key, 9), -child.depth, seq, child))
                emit(node, bound, "branch")
                break
        if not heap and status == "optimal":
            global_bound = inc_obj if inc_x is not None else -math.inf
            trace.append(global_bound)
    finally:
        if log:
            log.close()
    if status == "optimal" and inc_x is None:
        status = "infeasible"
    bound = global_bound
    if inc_x is not None and status == "optimal":
        bound = inc_obj
    return SolveReport(status, inc_obj if inc_x is not None else -math.inf, bound,
                       _gap(bound, inc_obj) if inc_x is not None else math.inf, nodes,
                       time.perf_counter() - t0, inc_x, len(pool), iters, trace)


def objective_granularity(weights: Sequence[float], max_den: int = 1000) -> float | None:
    """Common spacing of ``sum(w_k * n_k)`` over integers ``n_k``, when rational.

    Used to round node bounds down when every integer-feasible objective is a
    multiple of the spacing.  Returns None if a weight is not a small rational.
    """
    g = Fraction(0)
    for w in weights:
        fw = Fraction(w).limit_denominator(max_den)
        if abs(float(fw) - w) > 1e-12:
            return None
        if fw != 0:
            g = fw if g == 0 else Fraction(math.gcd(g.numerator * fw.denominator,
                                                    fw.numerator * g.denominator),
                                           g.denominator * fw.denominator)
    return float(abs(g)) if g != 0 else None
