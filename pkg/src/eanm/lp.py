"""Linear programs and a bounded-variable primal simplex solver.

The solver is a dense revised simplex with an explicit basis inverse that is
refactorized periodically. Phase 1 starts from a crash basis that uses
singleton columns (usually slacks) in place of artificials. Dantzig pricing is used until a run of degenerate
pivots is seen, after which Bland's rule takes over until progress resumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

LE, EQ, GE = "<=", "=", ">="
SENSES = (LE, EQ, GE)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILED = "failed"

DEFAULT_TOL = 1e-7
_PIVOT_TOL = 1e-9


class SolverError(RuntimeError):
    pass


@dataclass
class Variable:
    name: str
    lower: float = 0.0
    upper: float = math.inf
    cost: float = 0.0


@dataclass
class Row:
    name: str
    coeffs: list[tuple[str, float]]
    sense: str
    rhs: float


@dataclass
class LinearProgram:
    """``min cost.x + offset`` subject to sparse rows and variable bounds."""

    variables: list[Variable] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    offset: float = 0.0
    name: str = "lp"

    def __post_init__(self):
        self._index = {v.name: k for k, v in enumerate(self.variables)}
        self._row_names = {r.name for r in self.rows}

    def add_variable(self, name: str, lower: float = 0.0, upper: float = math.inf,
                     cost: float = 0.0) -> str:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        self._index[name] = len(self.variables)
        self.variables.append(Variable(name, float(lower), float(upper), float(cost)))
        return name

    def add_row(self, name: str, coeffs: Iterable[tuple[str, float]], sense: str,
                rhs: float) -> str:
        if sense not in SENSES:
            raise ValueError(f"unknown row sense {sense!r}")
        if name in self._row_names:
            raise ValueError(f"duplicate row {name!r}")
        merged: dict[str, float] = {}
        for var, a in coeffs:
            if var not in self._index:
                raise KeyError(f"row {name!r} references unknown variable {var!r}")
            merged[var] = merged.get(var, 0.0) + float(a)
        self._row_names.add(name)
        self.rows.append(Row(name, [(v, a) for v, a in merged.items() if a != 0.0], sense,
                             float(rhs)))
        return name

    def add_cost(self, name: str, cost: float) -> None:
        self.variables[self._index[name]].cost += float(cost)

    def index(self, name: str) -> int:
        return self._index[name]

    def variable(self, name: str) -> Variable:
        return self.variables[self._index[name]]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def check(self) -> list[str]:
        out = []
        for v in self.variables:
            if v.lower > v.upper:
                out.append(f"variable {v.name}: lower > upper")
            if not math.isfinite(v.cost):
                out.append(f"variable {v.name}: non-finite cost")
        for r in self.rows:
            if not all(math.isfinite(a) for _, a in r.coeffs) or not math.isfinite(r.rhs):
                out.append(f"row {r.name}: non-finite data")
        return out

    def objective_value(self, values: dict[str, float]) -> float:
        return self.offset + sum(v.cost * values.get(v.name, 0.0) for v in self.variables)

    def row_activity(self, row: Row, values: dict[str, float]) -> float:
        return sum(a * values.get(v, 0.0) for v, a in row.coeffs)


@dataclass
class LpSolution:
    status: str
    objective: float = math.nan
    values: dict[str, float] = field(default_factory=dict)
    duals: dict[str, float] = field(default_factory=dict)
    dual_objective: float = math.nan
    iterations: int = 0
    basis_state: Optional["BasisState"] = field(default=None, repr=False, compare=False)

    @property
    def gap(self) -> float:
        return abs(self.objective - self.dual_objective)


class CompiledLP:
    """Dense equality form ``A x = b`` with slack columns appended after the originals."""

    def __init__(self, lp: LinearProgram):
        bad = lp.check()
        if bad:
            raise ValueError("; ".join(bad))
        n = len(lp.variables)
        m = len(lp.rows)
        n_slack = sum(1 for r in lp.rows if r.sense != EQ)
        A = np.zeros((m, n + n_slack))
        b = np.zeros(m)
        s = n
        for i, row in enumerate(lp.rows):
            for var, a in row.coeffs:
                A[i, lp.index(var)] += a
            b[i] = row.rhs
            if row.sense == LE:
                A[i, s] = 1.0
                s += 1
            elif row.sense == GE:
                A[i, s] = -1.0
                s += 1
        self.A = A
        self.b = b
        self.n = n
        self.c = np.concatenate([[v.cost for v in lp.variables], np.zeros(n_slack)])
        self.lower = np.array([v.lower for v in lp.variables])
        self.upper = np.array([v.upper for v in lp.variables])
        self.n_slack = n_slack
        self.offset = lp.offset
        self.var_names = lp.names
        self.row_names = [r.name for r in lp.rows]


@dataclass
class BasisState:
    """Final basis of a solve, reusable as a warm start after bound changes.

    Columns are the structural and slack columns followed by one phase-1
    artificial per row (with the stored ``sign``); artificials stay fixed at 0.
    """

    sign: np.ndarray
    basis: np.ndarray
    at_upper: np.ndarray


@dataclass
class _Result:
    status: str
    x: np.ndarray
    y: np.ndarray
    objective: float
    dual_objective: float
    iterations: int
    state: Optional[BasisState] = None


def _basis_inverse(B: np.ndarray) -> np.ndarray:
    """Inverse of a basis matrix, inverting densely only the block not covered by unit columns.

    Slack and artificial columns have one nonzero each. Ordering them first
    makes the basis block upper triangular, so only the square block of
    the remaining columns on the uncovered rows needs a dense inverse.
    """
    m = B.shape[0]
    if m == 0:
        return np.zeros((0, 0))
    nz = B != 0
    unit = np.flatnonzero(nz.sum(axis=0) == 1)
    rows = np.argmax(nz[:, unit], axis=0)
    rows, first = np.unique(rows, return_index=True)
    unit = unit[first]
    other = np.setdiff1d(np.arange(m), unit)
    free_rows = np.setdiff1d(np.arange(m), rows)
    d = B[rows, unit]
    inv22 = np.linalg.inv(B[np.ix_(free_rows, other)])
    binv = np.zeros((m, m))
    binv[np.ix_(other, free_rows)] = inv22
    binv[unit, rows] = 1.0 / d
    binv[np.ix_(unit, free_rows)] = -(B[np.ix_(rows, other)] @ inv22) / d[:, None]
    return binv


class _Tableau:
    """Revised-simplex working data over ``[A | diag(sign)]`` with an explicit basis inverse."""

    def __init__(self, A, b, sign, lo, hi, x, basis):
        m = A.shape[0]
        self.Af = np.hstack([A, np.diag(sign)])
        self.b = b
        self.m = m
        self.lo = lo
        self.hi = hi
        self.x = x
        self.basis = basis
        self.is_basic = np.zeros(self.Af.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.binv = np.eye(m)

    def refactor(self) -> None:
        try:
            self.binv = _basis_inverse(self.Af[:, self.basis])
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular basis") from exc
        nb = ~self.is_basic
        self.x[self.basis] = self.binv @ (self.b - self.Af[:, nb] @ self.x[nb])

    def pivot(self, leave: int, j: int, alpha: np.ndarray) -> None:
        row = self.binv[leave] / alpha[leave]
        self.binv -= np.outer(alpha, row)
        self.binv[leave] = row
        out = self.basis[leave]
        self.basis[leave] = j
        self.is_basic[out] = False
        self.is_basic[j] = True

    def state(self, sign) -> BasisState:
        at_upper = (~self.is_basic) & np.isfinite(self.hi) & (self.hi > self.lo) & np.isclose(
            self.x, self.hi, rtol=0, atol=1e-12)
        return BasisState(sign.copy(), self.basis.copy(), at_upper)

    def finish(self, c, n, sign, iters) -> _Result:
        """Duals, dual objective and the warm-start state at an optimal basis."""
        self.refactor()
        cost = np.concatenate([c, np.zeros(self.m)])
        y = cost[self.basis] @ self.binv
        d = cost - y @ self.Af
        dual = float(y @ self.b)
        for k in np.flatnonzero(np.abs(d) > 1e-12):
            bound = self.lo[k] if d[k] > 0 else self.hi[k]
            if np.isfinite(bound):
                dual += d[k] * bound
            elif abs(d[k]) > 1e-7:
                dual = -math.inf
        return _Result(OPTIMAL, self.x[:n].copy(), y, float(c @ self.x[:n]), dual, iters,
                       self.state(sign))


def _run_simplex(A, b, c, lb, ub, tol, max_iter, bland_after=40, refactor_every=40) -> _Result:
    m, n = A.shape
    nonbasic_start = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    resid = b - A @ nonbasic_start
    sign = np.where(resid >= 0, 1.0, -1.0)
    N = n + m
    lo = np.concatenate([lb, np.zeros(m)])
    hi = np.concatenate([ub, np.full(m, np.inf)])
    x = np.concatenate([nonbasic_start, np.abs(resid)])
    basis = np.arange(n, N)
    binv_diag = sign.copy()  # inverse of diag(sign) is itself
    # crash: a singleton column that can absorb its row's residual replaces the artificial
    nz = A != 0
    single = np.flatnonzero((nz.sum(axis=0) == 1) & (lb == 0) & (nonbasic_start == 0))
    for j in single:
        i = int(np.flatnonzero(nz[:, j])[0])
        if basis[i] != n + i:
            continue
        value = resid[i] / A[i, j]
        if 0 <= value <= ub[j]:
            basis[i] = j
            x[j] = value
            x[n + i] = 0.0
            binv_diag[i] = 1.0 / A[i, j]
    T = _Tableau(A, b, sign, lo, hi, x, basis)
    T.binv = np.diag(binv_diag)
    Af = T.Af
    iters = 0

    def iterate(cost) -> str:
        nonlocal iters
        degenerate = 0
        since_refactor = 0
        basis = T.basis
        is_basic = T.is_basic
        while True:
            if iters >= max_iter:
                return FAILED
            if since_refactor >= refactor_every:
                T.refactor()
                since_refactor = 0
            y = cost[basis] @ T.binv
            d = cost - y @ Af
            movable = (~is_basic) & (hi > lo)
            free = ~np.isfinite(lo) & ~np.isfinite(hi)
            at_lo = np.isclose(x, lo, rtol=0, atol=1e-12) | free
            at_hi = np.isclose(x, hi, rtol=0, atol=1e-12) | free
            inc = movable & at_lo & (d < -tol)
            dec = movable & at_hi & (d > tol)
            cand = np.flatnonzero(inc | dec)
            if cand.size == 0:
                return OPTIMAL
            bland = degenerate >= bland_after
            if bland:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if inc[j] else -1.0
            alpha = T.binv @ Af[:, j]
            da = direction * alpha
            t_best = hi[j] - lo[j]
            leave = -1
            leave_at_upper = False
            xb = x[basis]
            lob = lo[basis]
            hib = hi[basis]
            ratios = np.full(m, np.inf)
            pos = (da > _PIVOT_TOL) & np.isfinite(lob)
            neg = (da < -_PIVOT_TOL) & np.isfinite(hib)
            ratios[pos] = (xb[pos] - lob[pos]) / da[pos]
            ratios[neg] = (hib[neg] - xb[neg]) / -da[neg]
            np.maximum(ratios, 0.0, out=ratios)
            t_min = ratios.min() if m else np.inf
            if t_min < t_best - 1e-12:
                ties = np.flatnonzero(ratios <= t_min + 1e-12)
                if bland:
                    leave = int(ties[np.argmin(basis[ties])])
                else:
                    leave = int(ties[np.argmax(np.abs(da[ties]))])
                t_best = float(t_min)
                leave_at_upper = bool(neg[leave])
            if not np.isfinite(t_best):
                return UNBOUNDED
            iters += 1
            degenerate = degenerate + 1 if t_best <= 1e-12 else 0
            x[j] += direction * t_best
            x[basis] = xb - t_best * da
            if leave < 0:
                # bound flip of the entering variable
                x[j] = hi[j] if direction > 0 else lo[j]
                continue
            out = basis[leave]
            x[out] = hi[out] if leave_at_upper else lo[out]
            T.pivot(leave, j, alpha)
            since_refactor += 1

    phase1 = np.concatenate([np.zeros(n), np.ones(m)])
    status = iterate(phase1)
    if status == FAILED:
        return _Result(FAILED, x[:n], np.zeros(m), math.nan, math.nan, iters)
    T.refactor()
    infeas = float(x[n:].sum())
    if infeas > tol * max(1.0, float(np.abs(b).max(initial=0.0))):
        y = phase1[T.basis] @ T.binv
        return _Result(INFEASIBLE, x[:n], y, math.nan, math.nan, iters)
    hi[n:] = 0.0
    x[n:] = np.where(T.is_basic[n:], x[n:], 0.0)
    cost = np.concatenate([c, np.zeros(m)])
    status = iterate(cost)
    if status != OPTIMAL:
        return _Result(status, x[:n], np.zeros(m), math.nan, math.nan, iters)
    return T.finish(c, n, sign, iters)


def _dual_simplex(A, b, c, lb, ub, warm: BasisState, tol, max_iter,
                  refactor_every=40) -> Optional[_Result]:
    """Reoptimize from a dual-feasible basis after bound changes.

    Returns ``None`` when the warm start is unusable (a nonbasic variable
    sits on an infinite bound, the basis is not dual feasible, or the
    iteration cap is hit); the caller then solves from scratch.
    """
    m, n = A.shape
    N = n + m
    lo = np.concatenate([lb, np.zeros(m)])
    hi = np.concatenate([ub, np.zeros(m)])
    nb = np.ones(N, dtype=bool)
    nb[warm.basis] = False
    x = np.where(warm.at_upper, hi, lo)
    if not np.all(np.isfinite(x[nb])):
        return None
    x[~nb] = 0.0
    T = _Tableau(A, b, warm.sign, lo, hi, x, warm.basis.copy())
    try:
        T.refactor()
    except SolverError:
        return None
    cost = np.concatenate([c, np.zeros(m)])
    Af = T.Af
    iters = 0
    since_refactor = 0
    while True:
        if iters >= max_iter:
            return None
        if since_refactor >= refactor_every:
            T.refactor()
            since_refactor = 0
        basis = T.basis
        y = cost[basis] @ T.binv
        d = cost - y @ Af
        nonbasic = ~T.is_basic
        movable = nonbasic & (hi > lo)
        at_up = movable & np.isclose(x, hi, rtol=0, atol=1e-12)
        at_lo = movable & ~at_up
        if np.any(at_lo & (d < -10 * tol)) or np.any(at_up & (d > 10 * tol)):
            return None
        xb = x[basis]
        below = lo[basis] - xb
        above = xb - hi[basis]
        viol = np.maximum(below, above)
        r = int(np.argmax(viol))
        if viol[r] <= tol * max(1.0, abs(float(xb[r]))):
            return T.finish(c, n, warm.sign, iters)
        to_lower = below[r] > above[r]
        row = T.binv[r] @ Af
        if to_lower:
            cand = (at_lo & (row < -_PIVOT_TOL)) | (at_up & (row > _PIVOT_TOL))
        else:
            cand = (at_lo & (row > _PIVOT_TOL)) | (at_up & (row < -_PIVOT_TOL))
        idx = np.flatnonzero(cand)
        if idx.size == 0:
            return _Result(INFEASIBLE, x[:n], np.zeros(m), math.nan, math.nan, iters)
        ratios = np.abs(d[idx]) / np.abs(row[idx])
        best = ratios.min()
        ties = idx[ratios <= best + 1e-12]
        j = int(ties[np.argmax(np.abs(row[ties]))])
        alpha = T.binv @ Af[:, j]
        target = lo[basis[r]] if to_lower else hi[basis[r]]
        theta = (xb[r] - target) / alpha[r]
        x[j] += theta
        x[basis] = xb - theta * alpha
        out = basis[r]
        x[out] = target
        T.pivot(r, j, alpha)
        iters += 1
        since_refactor += 1


def solve_compiled(comp: CompiledLP, lower: Optional[Sequence[float]] = None,
                   upper: Optional[Sequence[float]] = None, tolerance: float = DEFAULT_TOL,
                   max_iter: Optional[int] = None,
                   warm_start: Optional[BasisState] = None) -> LpSolution:
    """Solve the compiled LP under the given variable bounds.

    With ``warm_start`` (the ``basis_state`` of an earlier solve of the same
    matrix) a dual simplex reoptimizes from that basis; it falls back to a
    cold two-phase solve when the basis cannot be reused.
    """
    lb = comp.lower if lower is None else np.asarray(lower, dtype=float)
    ub = comp.upper if upper is None else np.asarray(upper, dtype=float)
    if np.any(lb > ub + tolerance):
        return LpSolution(INFEASIBLE)
    slack_lb = np.zeros(comp.n_slack)
    slack_ub = np.full(comp.n_slack, np.inf)
    m, N = comp.A.shape
    if max_iter is None:
        max_iter = 50 * (m + N) + 1000
    full_lb = np.concatenate([lb, slack_lb])
    full_ub = np.concatenate([np.maximum(ub, lb), slack_ub])
    res = None
    if warm_start is not None:
        res = _dual_simplex(comp.A, comp.b, comp.c, full_lb, full_ub, warm_start,
                            tolerance, max_iter)
    if res is None:
        res = _run_simplex(comp.A, comp.b, comp.c, full_lb, full_ub, tolerance, max_iter)
    sol = LpSolution(res.status, iterations=res.iterations)
    sol.basis_state = res.state
    if res.status == OPTIMAL:
        xs = res.x[:comp.n]
        sol.objective = float(res.objective + comp.offset)
        sol.dual_objective = float(res.dual_objective + comp.offset)
        sol.values = dict(zip(comp.var_names, xs.tolist()))
        sol.duals = dict(zip(comp.row_names, res.y.tolist()))
    return sol


def solve_lp(lp: LinearProgram, tolerance: float = DEFAULT_TOL,
             max_iter: Optional[int] = None) -> LpSolution:
    """Solve ``lp`` exactly up to ``tolerance`` on row activity and reduced costs.

    Returns status ``failed`` rather than a point when the iteration cap is hit.
    """
    return solve_compiled(CompiledLP(lp), tolerance=tolerance, max_iter=max_iter)
