"""Dense bounded-variable simplex and LP utilities.

Problems are stated as maximization::

    max  c @ x + offset
    s.t. A[i] @ x  (<= | == | >=)  rhs[i]
         lb <= x <= ub            (finite bounds)

Internally each row gets a slack ``s_i`` with ``A x + s = rhs`` whose bounds
encode the relation (``[0, inf)`` for ``<=``, ``(-inf, 0]`` for ``>=``,
``[0, 0]`` for ``==``), and the simplex minimizes ``-c @ x``.

Dual values follow the maximization convention: ``y_i >= 0`` on ``<=`` rows,
``y_i <= 0`` on ``>=`` rows, free on ``==`` rows, and the reduced costs are
``c - A.T @ y``.  Because every variable is boxed, any sign-feasible ``y``
yields the upper bound ``dual_objective(lp, y)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.linalg.blas import dger as _dger

__all__ = [
    "TOL_FEAS", "TOL_GAP", "TOL_INT",
    "LinearProgram", "LpSolution", "Basis", "Certificate", "LpError", "CyclingError",
    "solve_lp", "check_optimality", "check_farkas", "dual_objective",
    "primal_violation", "write_lp", "read_lp",
]

TOL_FEAS = 1e-7
TOL_GAP = 1e-6
TOL_INT = 1e-6

_PIV = 1e-9      # smallest usable pivot element
_OPT = 1e-9      # reduced-cost optimality tolerance
_PFEAS = 1e-9    # primal bound tolerance inside the simplex
_REFACTOR = 50   # pivots between explicit basis re-inversions
_STALL = 20      # degenerate pivots before switching to Bland's rule

SENSES = ("<=", "==", ">=")


class LpError(RuntimeError):
    pass


class CyclingError(LpError):
    def __init__(self, msg, trace):
        super().__init__(msg + "\nlast pivots (iter, phase, entering, leaving, objective):\n"
                         + "\n".join(map(str, trace)))
        self.trace = trace


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    A: sp.csr_matrix
    senses: tuple
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        n = c.shape[0]
        A = sp.csr_matrix(self.A, dtype=float)
        if A.shape[0] == 0:
            A = sp.csr_matrix((0, n))
        if A.shape[1] != n:
            raise ValueError(f"A has {A.shape[1]} columns, expected {n}")
        m = A.shape[0]
        senses = tuple(self.senses)
        if len(senses) != m or any(s not in SENSES for s in senses):
            raise ValueError("one relation in {<=, ==, >=} per row required")
        rhs = np.asarray(self.rhs, dtype=float).reshape(m)
        lb = np.asarray(self.lb, dtype=float).reshape(n)
        ub = np.asarray(self.ub, dtype=float).reshape(n)
        if not (np.isfinite(lb).all() and np.isfinite(ub).all()):
            raise ValueError("all variable bounds must be finite")
        if (lb > ub).any():
            raise ValueError("lower bound above upper bound")
        for name, v in (("c", c), ("rhs", rhs), ("lb", lb), ("ub", ub)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "senses", senses)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @cached_property
    def sense_array(self) -> np.ndarray:
        return np.array(self.senses, dtype="<U2")

    def with_bounds(self, lb, ub) -> "LinearProgram":
        """Same rows, new bounds; skips re-validating the matrix."""
        n = self.n_vars
        lb = np.array(lb, dtype=float).reshape(n)
        ub = np.array(ub, dtype=float).reshape(n)
        if not (np.isfinite(lb).all() and np.isfinite(ub).all()) or (lb > ub).any():
            raise ValueError("bounds must be finite with lb <= ub")
        lb.setflags(write=False)
        ub.setflags(write=False)
        out = object.__new__(LinearProgram)
        out.__dict__.update(self.__dict__)
        object.__setattr__(out, "lb", lb)
        object.__setattr__(out, "ub", ub)
        return out

    def with_rows(self, A_new, senses, rhs) -> "LinearProgram":
        A_new = sp.csr_matrix(A_new, shape=(len(senses), self.n_vars))
        return replace(self, A=sp.vstack([self.A, A_new], format="csr"),
                       senses=self.senses + tuple(senses),
                       rhs=np.concatenate([self.rhs, np.asarray(rhs, float)]))

    def objective(self, x) -> float:
        return float(self.c @ x + self.offset)


@dataclass(frozen=True)
class Basis:
    """Simplex basis over structural columns ``0..n-1`` and slack ``n + i`` of row ``i``.

    ``basic`` lists one column per row; ``at_upper`` flags nonbasic columns
    resting at their upper bound.
    """

    basic: np.ndarray
    at_upper: np.ndarray


@dataclass(frozen=True)
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = math.nan
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    farkas: np.ndarray | None = None
    basis: Basis | None = None
    iterations: int = 0
    method: str = "simplex"

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass(frozen=True)
class Certificate:
    primal_violation: float
    dual_violation: float
    gap: float
    ok: bool


# --------------------------------------------------------------------------- checks

def _slack_bounds(senses):
    lo = np.array([0.0 if s != ">=" else -np.inf for s in senses])
    hi = np.array([0.0 if s != "<=" else np.inf for s in senses])
    return lo, hi


def primal_violation(lp: LinearProgram, x) -> float:
    x = np.asarray(x, float)
    act = lp.A @ x
    viol = [0.0, float(np.max(lp.lb - x, initial=0.0)), float(np.max(x - lp.ub, initial=0.0))]
    s = lp.sense_array
    if lp.n_rows:
        viol.append(float(np.max(np.where(s != ">=", act - lp.rhs, 0.0), initial=0.0)))
        viol.append(float(np.max(np.where(s != "<=", lp.rhs - act, 0.0), initial=0.0)))
    return max(viol)


def _dual_sign_violation(lp: LinearProgram, y) -> float:
    s = lp.sense_array
    if not lp.n_rows:
        return 0.0
    bad = np.where(s == "<=", -y, np.where(s == ">=", y, 0.0))
    return float(max(0.0, bad.max()))


def dual_objective(lp: LinearProgram, y) -> float:
    """Upper bound on the LP value implied by sign-feasible row multipliers ``y``."""
    y = np.asarray(y, float)
    r = lp.c - lp.A.T @ y
    return float(lp.rhs @ y + np.where(r > 0, r * lp.ub, r * lp.lb).sum() + lp.offset)


def check_optimality(lp: LinearProgram, sol: LpSolution, tol_feas: float = TOL_FEAS,
                     tol_gap: float = TOL_GAP) -> Certificate:
    """Primal feasibility, dual sign feasibility and duality gap of a claimed optimum."""
    pv = primal_violation(lp, sol.x)
    dv = _dual_sign_violation(lp, sol.duals)
    gap = abs(dual_objective(lp, sol.duals) - lp.objective(sol.x))
    return Certificate(pv, dv, gap, pv <= tol_feas and dv <= tol_feas and gap <= tol_gap)


def check_farkas(lp: LinearProgram, y, tol: float = 1e-9) -> bool:
    """True if ``y`` proves infeasibility.

    ``y`` must be sign-feasible (as duals are) and satisfy
    ``min over the box of (A.T y) @ x > rhs @ y``, so no box point can satisfy
    the rows.
    """
    if y is None:
        return False
    y = np.asarray(y, float)
    if _dual_sign_violation(lp, y) > tol:
        return False
    r = lp.A.T @ y
    lowest = np.where(r > 0, r * lp.lb, r * lp.ub).sum()
    return bool(lowest > lp.rhs @ y + tol * max(1.0, np.abs(y).sum()))


# --------------------------------------------------------------------------- simplex

_BASIC, _LOWER, _UPPER = 0, 1, 2


class _Simplex:
    """Working state of one solve: dense [A I] matrix, bounds, basis and its inverse."""

    def __init__(self, lp: LinearProgram, max_iter: int | None, pricing: str):
        self.lp = lp
        n, m = lp.n_vars, lp.n_rows
        self.n, self.m = n, m
        self._A = lp.A.toarray()
        self.M = np.hstack([self._A, np.eye(m)])
        self.b = lp.rhs.astype(float).copy()
        slo, shi = _slack_bounds(lp.senses)
        self.lo = np.concatenate([lp.lb, slo])
        self.hi = np.concatenate([lp.ub, shi])
        self.cost = np.concatenate([-lp.c, np.zeros(m)])
        self.max_iter = max_iter or 20000 + 50 * (n + m)
        self.pricing = pricing
        self.iterations = 0
        self.trace: list = []
        self.n_art = 0

    # -- basis bookkeeping
    def _factor(self):
        n, m = self.n, self.m
        basis = self.basis
        slack = (basis >= n) & (basis < n + m)
        try:
            if slack.sum() * 4 < m:
                self.Binv = np.linalg.inv(self.M[:, basis])
            else:
                self.Binv = self._block_inverse(slack)
        except np.linalg.LinAlgError:
            return False
        if self.Binv is None:
            return False
        if not np.isfinite(self.Binv).all():
            return False
        self._since_factor = 0
        return True

    def _row(self, v):
        """``v @ M``; the slack block of M is the identity."""
        n, m = self.n, self.m
        if self.M.shape[1] != n + m:
            return v @ self.M
        return np.concatenate([v @ self._A, v])

    def _column(self, q):
        """``Binv @ M[:, q]``."""
        if self.n <= q < self.n + self.m:
            return self.Binv[:, q - self.n].copy()
        return self.Binv @ self.M[:, q]

    def _block_inverse(self, slack):
        """Inverse of a basis with many unit slack columns.

        With ``R`` the rows whose slack is nonbasic and ``C`` the other basic
        columns, only ``C[R]`` needs inverting; the slack rows follow by
        substitution.
        """
        m, n = self.m, self.n
        spos = np.flatnonzero(slack)
        srow = self.basis[spos] - n
        cpos = np.flatnonzero(~slack)
        in_s = np.zeros(m, bool)
        in_s[srow] = True
        R = np.flatnonzero(~in_s)
        if len(R) != len(cpos):
            return None
        C = self.M[:, self.basis[cpos]]
        Binv = np.zeros((m, m))
        if len(cpos):
            top = np.linalg.inv(C[R])
            Binv[np.ix_(cpos, R)] = top
            Binv[spos] = -(C[srow] @ Binv[cpos])
        Binv[spos, srow] += 1.0
        return Binv

    def _recompute_xb(self):
        nb = self.state != _BASIC
        self.x[self.basis] = 0.0
        rhs = self.b - self.M[:, nb] @ self.x[nb]
        self.x[self.basis] = self.Binv @ rhs

    def _pivot(self, r: int, q: int, alpha: np.ndarray, leave_state: int):
        leaving = self.basis[r]
        self.basis[r] = q
        self.state[q] = _BASIC
        # must be nonbasic before a refactorization recomputes the basic values
        self.state[leaving] = leave_state
        piv = alpha[r]
        Br = self.Binv[r] / piv
        col = alpha.copy()
        col[r] = 0.0
        # in-place rank-1 update on the Fortran view of the C-ordered inverse
        _dger(-1.0, Br, col, a=self.Binv.T, overwrite_a=1)
        self.Binv[r] = Br
        self._since_factor += 1
        if self._since_factor >= _REFACTOR:
            if not self._factor():
                raise LpError("basis became singular")
            self._recompute_xb()
        return leaving

    def _record(self, phase, q, leaving, cost):
        self.iterations += 1
        obj = float(cost @ self.x)
        self.trace.append((self.iterations, phase, int(q), None if leaving is None else int(leaving), obj))
        if len(self.trace) > 25:
            del self.trace[0]
        if self.iterations > self.max_iter:
            raise CyclingError(f"simplex exceeded {self.max_iter} iterations", list(self.trace))

    # -- cold start
    def _cold_start(self):
        n, m = self.n, self.m
        self.x = np.concatenate([self.lo[:n].copy(), np.zeros(m)])
        s = self.b - self.M[:, :n] @ self.x[:n]
        basis, art_rows, art_sign = [], [], []
        state = np.full(n + m, _LOWER)
        for i in range(m):
            j = n + i
            if self.lo[j] - _PFEAS <= s[i] <= self.hi[j] + _PFEAS:
                self.x[j] = s[i]
                basis.append(j)
                state[j] = _BASIC
            else:
                v = self.lo[j] if s[i] < self.lo[j] else self.hi[j]
                self.x[j] = v
                state[j] = _LOWER if v == self.lo[j] else _UPPER
                art_rows.append(i)
                art_sign.append(1.0 if s[i] - v > 0 else -1.0)
                basis.append(-1)
        k = len(art_rows)
        self.n_art = k
        if k:
            art = np.zeros((m, k))
            art[art_rows, range(k)] = art_sign
            self.M = np.hstack([self.M, art])
            self.lo = np.concatenate([self.lo, np.zeros(k)])
            self.hi = np.concatenate([self.hi, np.full(k, np.inf)])
            self.cost = np.concatenate([self.cost, np.zeros(k)])
            vals = np.abs(s[art_rows] - self.x[n + np.array(art_rows)])
            self.x = np.concatenate([self.x, vals])
            state = np.concatenate([state, np.full(k, _BASIC)])
            for a, i in enumerate(art_rows):
                basis[i] = n + m + a
        self.state = state
        self.basis = np.array(basis, dtype=np.int64)
        self.Binv = np.diag(1.0 / np.diag(self.M[:, self.basis]))
        self._since_factor = 0

    # -- primal simplex on the current cost vector
    def _primal(self, cost, phase):
        degenerate = 0
        bland = self.pricing == "bland"
        while True:
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.M
            movable = self.hi > self.lo
            inc = (self.state == _LOWER) & (d < -_OPT) & movable
            dec = (self.state == _UPPER) & (d > _OPT) & movable
            cand = np.flatnonzero(inc | dec)
            if cand.size == 0:
                return y
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if inc[q] else -1.0
            alpha = self.Binv @ self.M[:, q]
            delta = direction * alpha
            xb = self.x[self.basis]
            lob, hib = self.lo[self.basis], self.hi[self.basis]
            ratios = np.full(self.m, np.inf)
            dn = delta > _PIV
            up = delta < -_PIV
            with np.errstate(invalid="ignore", divide="ignore"):
                ratios[dn] = (xb[dn] - lob[dn]) / delta[dn]
                ratios[up] = (hib[up] - xb[up]) / (-delta[up])
            ratios = np.maximum(ratios, 0.0)
            t_row = ratios.min() if self.m else np.inf
            t_flip = self.hi[q] - self.lo[q]
            if not np.isfinite(t_row) and not np.isfinite(t_flip):
                raise LpError("unbounded direction; all variables are boxed so this is a bug")
            if t_flip <= t_row:
                t = t_flip
                self.x[self.basis] = xb - t * delta
                self.x[q] += direction * t
                self.state[q] = _UPPER if direction > 0 else _LOWER
                leaving = None
            else:
                t = t_row
                ties = np.flatnonzero(ratios <= t_row + 1e-12)
                if bland:
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    r = int(ties[np.lexsort((self.basis[ties], -np.abs(alpha[ties])))[0]])
                lv = self.basis[r]
                self.x[self.basis] = xb - t * delta
                self.x[q] += direction * t
                if delta[r] > 0:
                    self.x[lv], st = self.lo[lv], _LOWER
                else:
                    self.x[lv], st = self.hi[lv], _UPPER
                leaving = self._pivot(r, q, alpha, st)
            self._record(phase, q, leaving, cost)
            if t <= 1e-12:
                degenerate += 1
                if degenerate >= _STALL:
                    bland = True
            else:
                degenerate = 0
                bland = self.pricing == "bland"

    def _drive_out_artificials(self):
        n, m = self.n, self.m
        for r in range(m):
            if self.basis[r] < n + m:
                continue
            row = self.Binv[r] @ self.M[:, : n + m]
            row[self.state[: n + m] == _BASIC] = 0.0
            j = np.flatnonzero(np.abs(row) > 1e-7)
            if j.size:
                q = int(j[0])
                alpha = self.Binv @ self.M[:, q]
                lv = self._pivot(r, q, alpha, _LOWER)
                self.x[lv] = 0.0
                self._recompute_xb()

    def solve_cold(self):
        self._cold_start()
        if self.n_art:
            c1 = np.zeros_like(self.cost)
            c1[self.n + self.m:] = 1.0
            y1 = self._primal(c1, 1)
            infeas = float(c1 @ self.x)
            if infeas > TOL_FEAS * max(1.0, np.abs(self.b).max(initial=0.0)):
                return "infeasible", -y1
            self._drive_out_artificials()
            self.hi[self.n + self.m:] = 0.0
            self.x[self.n + self.m:] = np.clip(self.x[self.n + self.m:], 0.0, 0.0)
            self._recompute_xb()
        self._primal(self.cost, 2)
        return "optimal", None

    # -- dual simplex from a dual-feasible basis
    def load_basis(self, basis: Basis) -> bool:
        n, m = self.n, self.m
        basic = np.asarray(basis.basic, dtype=np.int64)
        upper = np.asarray(basis.at_upper, dtype=bool)
        k = len(basic)
        if k > m or len(upper) < n + k:
            return False
        # rows added since the basis was taken enter with their slack basic
        basic = np.concatenate([basic, n + np.arange(k, m)])
        upper = np.concatenate([upper[: n + k], np.zeros(m - k, bool)])
        if len(set(basic.tolist())) != m:
            return False
        self.basis = basic
        self.state = np.where(upper, _UPPER, _LOWER)
        self.state[self.basis] = _BASIC
        self.state[(self.state == _LOWER) & ~np.isfinite(self.lo)] = _UPPER
        self.state[(self.state == _UPPER) & ~np.isfinite(self.hi)] = _LOWER
        self.x = np.where(self.state == _UPPER, self.hi, self.lo)
        self.x[~np.isfinite(self.x)] = 0.0
        if not self._factor():
            return False
        self._recompute_xb()
        return True

    def solve_dual(self):
        """Dual simplex; returns status and Farkas multipliers when infeasible."""
        cost = self.cost
        degenerate = 0
        bland = self.pricing == "bland"
        d = None
        boxed = np.isfinite(self.lo) & np.isfinite(self.hi)
        movable = self.hi > self.lo
        while True:
            if d is None:
                d = cost - self._row(cost[self.basis] @ self.Binv)
            wrong_lo = (self.state == _LOWER) & (d < -_OPT) & movable
            wrong_hi = (self.state == _UPPER) & (d > _OPT) & movable
            if (wrong_lo & ~boxed).any() or (wrong_hi & ~boxed).any():
                return "dual_infeasible", None
            if wrong_lo.any() or wrong_hi.any():
                self.state[wrong_lo] = _UPPER
                self.state[wrong_hi] = _LOWER
                nb = self.state != _BASIC
                self.x[nb] = np.where(self.state[nb] == _UPPER, self.hi[nb], self.lo[nb])
                self._recompute_xb()
            xb = self.x[self.basis]
            lob, hib = self.lo[self.basis], self.hi[self.basis]
            below = lob - xb
            above = xb - hib
            viol = np.maximum(below, above)
            rows = np.flatnonzero(viol > _PFEAS * 10)
            if rows.size == 0:
                return "optimal", None
            if bland:
                r = int(rows[np.argmin(self.basis[rows])])
            else:
                r = int(rows[np.argmax(viol[rows])])
            go_up = below[r] > 0
            rho = self.Binv[r]
            alpha_r = self._row(rho)
            lower_nb = self.state == _LOWER
            upper_nb = self.state == _UPPER
            if go_up:
                elig = movable & ((lower_nb & (alpha_r < -_PIV)) | (upper_nb & (alpha_r > _PIV)))
            else:
                elig = movable & ((lower_nb & (alpha_r > _PIV)) | (upper_nb & (alpha_r < -_PIV)))
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                pi = -rho if go_up else rho
                return "infeasible", -pi
            ratios = np.abs(d[cand]) / np.abs(alpha_r[cand])
            tmin = ratios.min()
            ties = cand[ratios <= tmin + 1e-12]
            if bland:
                q = int(ties[0])
            else:
                q = int(ties[np.lexsort((ties, -np.abs(alpha_r[ties])))[0]])
            alpha = self._column(q)
            lv = self.basis[r]
            target = self.lo[lv] if go_up else self.hi[lv]
            step = (self.x[lv] - target) / alpha[r]
            self.x[self.basis] -= step * alpha
            self.x[q] += step
            self.x[lv] = target
            leaving = self._pivot(r, q, alpha, _LOWER if go_up else _UPPER)
            if self._since_factor == 0:
                d = None  # fresh inverse: recompute instead of accumulating drift
            else:
                d = d - (d[q] / alpha_r[q]) * alpha_r
                d[self.basis] = 0.0
            self._record(3, q, leaving, cost)
            if tmin <= 1e-12:
                degenerate += 1
                if degenerate >= _STALL:
                    bland = True
            else:
                degenerate = 0
                bland = self.pricing == "bland"

    def export_basis(self) -> Basis:
        n, m = self.n, self.m
        basic = self.basis.copy()
        for r in np.flatnonzero(basic >= n + m):
            basic[r] = n + int(np.flatnonzero(self.M[:, basic[r]])[0])
        upper = self.state[: n + m] == _UPPER
        return Basis(basic, upper)

    def result(self, status, farkas, method) -> LpSolution:
        n = self.n
        if status != "optimal":
            return LpSolution("infeasible", farkas=farkas, iterations=self.iterations, method=method)
        x = np.clip(self.x[:n], self.lp.lb, self.lp.ub)
        y = -(self.cost[self.basis] @ self.Binv)
        s = self.lp.sense_array
        y = np.where((s == "<=") & (y < 0) & (y > -1e-9), 0.0, y)
        y = np.where((s == ">=") & (y > 0) & (y < 1e-9), 0.0, y)
        rc = self.lp.c - self.lp.A.T @ y
        return LpSolution("optimal", x, self.lp.objective(x), y, rc, None,
                          self.export_basis(), self.iterations, method)


def _solve_simplex(lp: LinearProgram, warm_start: Basis | None, max_iter, pricing) -> LpSolution:
    if lp.n_rows == 0:
        x = np.where(lp.c > 0, lp.ub, lp.lb)
        return LpSolution("optimal", x, lp.objective(x), np.zeros(0), lp.c.copy(),
                          basis=Basis(np.zeros(0, np.int64), lp.c > 0))
    if warm_start is not None:
        s = _Simplex(lp, max_iter, pricing)
        if s.load_basis(warm_start):
            status, farkas = s.solve_dual()
            if status != "dual_infeasible":
                if status == "infeasible" and not check_farkas(lp, farkas, 1e-7):
                    pass  # numerically shaky certificate: confirm with a cold solve
                else:
                    return s.result(status, farkas, "dual-simplex")
    s = _Simplex(lp, max_iter, pricing)
    status, farkas = s.solve_cold()
    return s.result(status, farkas, "simplex")


# --------------------------------------------------------------------------- HiGHS

def _split_rows(lp: LinearProgram):
    s = lp.sense_array
    le, ge, eq = np.flatnonzero(s == "<="), np.flatnonzero(s == ">="), np.flatnonzero(s == "==")
    A_ub = sp.vstack([lp.A[le], -lp.A[ge]], format="csr")
    b_ub = np.concatenate([lp.rhs[le], -lp.rhs[ge]])
    return le, ge, eq, A_ub, b_ub


def _solve_highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog

    le, ge, eq, A_ub, b_ub = _split_rows(lp)
    kw = dict(bounds=np.column_stack([lp.lb, lp.ub]), method="highs")
    if A_ub.shape[0]:
        kw.update(A_ub=A_ub, b_ub=b_ub)
    if eq.size:
        kw.update(A_eq=lp.A[eq], b_eq=lp.rhs[eq])
    res = linprog(-lp.c, **kw)
    if res.status == 2:
        return LpSolution("infeasible", farkas=_highs_farkas(lp), iterations=int(res.nit),
                          method="highs")
    if res.status != 0:
        raise LpError(f"HiGHS failed: {res.message}")
    y = np.zeros(lp.n_rows)
    if A_ub.shape[0]:
        mu = res.ineqlin.marginals
        y[le] = -mu[: le.size]
        y[ge] = mu[le.size:]
    if eq.size:
        y[eq] = -res.eqlin.marginals
    x = np.clip(res.x, lp.lb, lp.ub)
    return LpSolution("optimal", x, lp.objective(x), y, lp.c - lp.A.T @ y,
                      iterations=int(res.nit), method="highs")


def _highs_farkas(lp: LinearProgram):
    """Multipliers from the elastic problem ``min sum(violation)``."""
    m, n = lp.n_rows, lp.n_vars
    s = lp.sense_array
    # columns: x, e_plus (lowers a x), e_minus (raises a x)
    I = sp.identity(m, format="csr")
    A = sp.hstack([lp.A, -I, I], format="csr")
    lb = np.concatenate([lp.lb, np.zeros(2 * m)])
    big = 1e6 * (1 + np.abs(lp.rhs).max(initial=0) + np.abs(lp.A).sum())
    ub = np.concatenate([lp.ub, np.where(s != ">=", big, 0.0), np.where(s != "<=", big, 0.0)])
    c = np.concatenate([np.zeros(n), -np.ones(2 * m)])
    elastic = LinearProgram(c, A, lp.senses, lp.rhs, lb, ub)
    sol = _solve_highs(elastic)
    for cand in (sol.duals, -sol.duals):
        if check_farkas(lp, cand, 1e-7):
            return cand
    return sol.duals


# --------------------------------------------------------------------------- entry

def solve_lp(lp: LinearProgram, method: str = "simplex", warm_start: Basis | None = None,
             max_iter: int | None = None, pricing: str = "dantzig") -> LpSolution:
    """Solve ``lp`` to optimality or prove it infeasible.

    ``method="simplex"`` runs the in-house bounded simplex (dual simplex when a
    ``warm_start`` basis is given, two-phase primal otherwise); ``"highs"``
    delegates to SciPy's HiGHS.  ``pricing="bland"`` uses Bland's rule
    throughout; the default prices by largest reduced cost and falls back to
    Bland's rule after a run of degenerate pivots.
    """
    if method == "simplex":
        return _solve_simplex(lp, warm_start, max_iter, pricing)
    if method == "highs":
        return _solve_highs(lp)
    raise ValueError(f"unknown LP method {method!r}")


# --------------------------------------------------------------------------- LP files

def _lp_name(s: str) -> str:
    s = s.replace("[", "(").replace("]", ")").replace(" ", "")
    return re.sub(r"[^A-Za-z0-9_()!\"#$%&/,.;?@`'{}|~]", "_", s)


def _fmt(v: float) -> str:
    return repr(float(v)) if v != int(v) else str(int(v))


def _terms(idx, vals, names):
    out = []
    for j, v in zip(idx, vals):
        if v == 0:
            continue
        sign = "-" if v < 0 else "+"
        mag = abs(v)
        coef = "" if mag == 1 else _fmt(mag) + " "
        out.append(f"{sign} {coef}{names[j]}")
    if not out:
        return "0 " + names[0] if names else "0"
    s = " ".join(out)
    return s[2:] if s.startswith("+ ") else s


def write_lp(lp: LinearProgram, path, names=None, integer=None, row_names=None,
             comment: str | None = None) -> None:
    """Write ``lp`` in the CPLEX LP text format.

    Sections: ``Maximize`` / ``Subject To`` / ``Bounds`` / ``General`` / ``End``.
    Square brackets in names become parentheses.  A nonzero objective offset is
    written as a constant term of the objective.
    """
    n = lp.n_vars
    names = [_lp_name(s) for s in (names or [f"x{j}" for j in range(n)])]
    rnames = [_lp_name(s) for s in (row_names or [f"c{i}" for i in range(lp.n_rows)])]
    lines = []
    if comment:
        lines += [f"\\ {ln}" for ln in comment.splitlines()]
    nz = np.flatnonzero(lp.c)
    obj = _terms(nz, lp.c[nz], names)
    if lp.offset:
        obj += f" {'+' if lp.offset > 0 else '-'} {_fmt(abs(lp.offset))}"
    lines += ["Maximize", f" obj: {obj}", "Subject To"]
    A = lp.A.tocsr()
    for i in range(lp.n_rows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        expr = _terms(A.indices[lo:hi], A.data[lo:hi], names)
        op = {"<=": "<=", ">=": ">=", "==": "="}[lp.senses[i]]
        lines.append(f" {rnames[i]}: {expr} {op} {_fmt(lp.rhs[i])}")
    lines.append("Bounds")
    for j in range(n):
        if lp.lb[j] == lp.ub[j]:
            lines.append(f" {names[j]} = {_fmt(lp.lb[j])}")
        else:
            lines.append(f" {_fmt(lp.lb[j])} <= {names[j]} <= {_fmt(lp.ub[j])}")
    if integer is not None and np.any(integer):
        lines.append("General")
        ints = [names[j] for j in np.flatnonzero(integer)]
        for k in range(0, len(ints), 8):
            lines.append(" " + " ".join(ints[k:k + 8]))
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n")


_TERM = re.compile(r"([+-])?\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)?\s*([A-Za-z_(][^\s+\-]*)?")


def _parse_expr(expr: str, index: dict):
    coefs, const = {}, 0.0
    expr = expr.strip()
    pos = 0
    while pos < len(expr):
        m = _TERM.match(expr, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse LP expression near {expr[pos:]!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        num = float(m.group(2)) if m.group(2) else None
        name = m.group(3)
        if name is None:
            const += sign * (num or 0.0)
        else:
            coefs[index[name]] = coefs.get(index[name], 0.0) + sign * (1.0 if num is None else num)
        pos = m.end()
        while pos < len(expr) and expr[pos] == " ":
            pos += 1
    return coefs, const


def read_lp(path):
    """Parse a file produced by `write_lp`; returns ``(lp, names, integer_mask)``."""
    text = [ln.strip() for ln in Path(path).read_text().splitlines()]
    text = [ln for ln in text if ln and not ln.startswith("\\")]
    sections, cur = {}, None
    for ln in text:
        key = ln.lower()
        if key in ("maximize", "subject to", "bounds", "general", "end"):
            cur = key
            sections.setdefault(cur, [])
        else:
            sections[cur].append(ln)
    names = []
    for ln in sections.get("bounds", []):
        parts = ln.split()
        names.append(parts[0] if "=" == parts[1] else parts[2])
    index = {nm: j for j, nm in enumerate(names)}
    n = len(names)
    obj_line = " ".join(sections["maximize"]).split(":", 1)[1]
    coefs, offset = _parse_expr(obj_line, index)
    c = np.zeros(n)
    for j, v in coefs.items():
        c[j] = v
    rows, cols, vals, senses, rhs = [], [], [], [], []
    for i, ln in enumerate(sections.get("subject to", [])):
        body = ln.split(":", 1)[1]
        m = re.match(r"(.*?)\s*(<=|>=|=)\s*(\S+)$", body)
        lhs, op, r = m.group(1), m.group(2), float(m.group(3))
        terms, _ = _parse_expr(lhs, index) if not lhs.strip().startswith("0 ") else ({}, 0.0)
        for j, v in terms.items():
            rows.append(i)
            cols.append(j)
            vals.append(v)
        senses.append({"<=": "<=", ">=": ">=", "=": "=="}[op])
        rhs.append(r)
    lb, ub = np.zeros(n), np.zeros(n)
    for j, ln in enumerate(sections.get("bounds", [])):
        parts = ln.split()
        if parts[1] == "=":
            lb[j] = ub[j] = float(parts[2])
        else:
            lb[j], ub[j] = float(parts[0]), float(parts[4])
    integer = np.zeros(n, bool)
    for ln in sections.get("general", []):
        for nm in ln.split():
            integer[index[nm]] = True
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(senses), n))
    return LinearProgram(c, A, tuple(senses), np.array(rhs), lb, ub, offset), names, integer
