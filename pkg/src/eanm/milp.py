"""Mixed-integer models: best-bound branch-and-bound and fixed-format MPS files."""

from __future__ import annotations

import heapq
import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lp import (DEFAULT_TOL, EQ, FAILED, GE, INFEASIBLE, LE, OPTIMAL, UNBOUNDED, CompiledLP,
                 LinearProgram, SolverError, solve_compiled)

FEASIBLE = "feasible"
LIMIT_REACHED = "limit_reached"

INT_TOL = 1e-6


@dataclass
class MilpModel:
    lp: LinearProgram
    integers: set[str] = field(default_factory=set)

    def add_integer(self, name: str, lower: float = 0.0, upper: float = 1.0,
                    cost: float = 0.0) -> str:
        self.lp.add_variable(name, lower, upper, cost)
        self.integers.add(name)
        return name

    @property
    def binaries(self) -> set[str]:
        return {v for v in self.integers
                if self.lp.variable(v).lower >= 0 and self.lp.variable(v).upper <= 1}

    def check(self) -> list[str]:
        out = self.lp.check()
        for name in sorted(self.integers):
            if name not in self.lp:
                out.append(f"integer variable {name} is not a model variable")
                continue
            v = self.lp.variable(name)
            if not (math.isfinite(v.lower) and math.isfinite(v.upper)):
                out.append(f"integer variable {name} must have finite bounds")
        return out


@dataclass
class MilpSolution:
    status: str
    values: dict[str, float] = field(default_factory=dict)
    objective: float = math.nan
    bound: float = math.nan
    nodes: int = 0
    root_bound: float = math.nan
    bound_history: list[float] = field(default_factory=list)

    @property
    def gap(self) -> float:
        if not (math.isfinite(self.objective) and math.isfinite(self.bound)):
            return math.inf
        return max(0.0, self.objective - self.bound) / max(1.0, abs(self.objective))

    @property
    def has_incumbent(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE)


def solve_milp(model: MilpModel, node_limit: int = 200_000, time_limit: float = math.inf,
               gap: float = 0.0, tolerance: float = DEFAULT_TOL,
               int_tol: float = INT_TOL) -> MilpSolution:
    """Branch-and-bound over LP relaxations.

    Nodes are explored best-bound first (deeper node first on ties); branching
    picks the most fractional integer variable, lowest index on ties.
    """
    problems = model.check()
    if problems:
        raise ValueError("; ".join(problems))
    lp = model.lp
    comp = CompiledLP(lp)
    int_idx = np.array(sorted(lp.index(v) for v in model.integers), dtype=int)
    start = time.monotonic()

    incumbent: Optional[np.ndarray] = None
    inc_obj = math.inf
    heap: list = []
    seq = 0
    nodes = 0
    history: list[float] = []
    root_bound = math.nan

    lower0 = comp.lower.copy()
    upper0 = comp.upper.copy()
    if int_idx.size:
        lower0[int_idx] = np.ceil(lower0[int_idx] - int_tol)
        upper0[int_idx] = np.floor(upper0[int_idx] + int_tol)
    heapq.heappush(heap, (-math.inf, 0, seq, lower0, upper0, None))

    def prune_level() -> float:
        if incumbent is None:
            return math.inf
        return inc_obj - 1e-9 * max(1.0, abs(inc_obj))

    def done(status: str) -> MilpSolution:
        bound = min([inc_obj] + [h[0] for h in heap]) if heap else inc_obj
        sol = MilpSolution(status, nodes=nodes, root_bound=root_bound, bound_history=history)
        if incumbent is not None:
            sol.values = dict(zip(comp.var_names, incumbent.tolist()))
            sol.objective = lp.objective_value(sol.values)
            sol.bound = min(bound, sol.objective)
        else:
            sol.bound = bound
        return sol

    stopped = False
    while heap:
        parent_bound, neg_depth, node_id, lower, upper, warm = heap[0]
        if parent_bound >= prune_level():
            heap.clear()
            break
        if gap > 0 and incumbent is not None:
            if inc_obj - parent_bound <= gap * max(1.0, abs(inc_obj)):
                break
        if nodes >= node_limit or time.monotonic() - start > time_limit:
            stopped = True
            break
        heapq.heappop(heap)
        nodes += 1
        rel = solve_compiled(comp, lower, upper, tolerance, warm_start=warm)
        if rel.status == FAILED:
            raise SolverError(f"relaxation failed at branch-and-bound node {node_id} "
                              f"(depth {-neg_depth})")
        if nodes == 1:
            if rel.status == UNBOUNDED:
                raise SolverError("root relaxation is unbounded")
            root_bound = rel.objective if rel.status == OPTIMAL else math.inf
        if rel.status == OPTIMAL and rel.objective < prune_level():
            x = np.array([rel.values[n] for n in comp.var_names])
            frac = np.abs(x[int_idx] - np.round(x[int_idx])) if int_idx.size else np.zeros(0)
            if frac.size == 0 or frac.max() <= int_tol:
                x[int_idx] = np.round(x[int_idx])
                incumbent = x
                inc_obj = lp.objective_value(dict(zip(comp.var_names, x.tolist())))
            else:
                k = int(int_idx[int(np.argmax(frac))])
                v = x[k]
                down_up = upper.copy()
                down_up[k] = math.floor(v)
                up_lo = lower.copy()
                up_lo[k] = math.ceil(v)
                for lo_, hi_ in ((lower, down_up), (up_lo, upper)):
                    seq += 1
                    heapq.heappush(heap, (rel.objective, neg_depth - 1, seq, lo_, hi_,
                                          rel.basis_state))
        open_bound = min(h[0] for h in heap) if heap else inc_obj
        history.append(min(open_bound, inc_obj))

    if stopped:
        return done(FEASIBLE if incumbent is not None else LIMIT_REACHED)
    if incumbent is None:
        return done(INFEASIBLE)
    return done(OPTIMAL)


# ---------------------------------------------------------------- MPS files

_SECTIONS = ["NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"]
_ROW_TYPES = {LE: "L", GE: "G", EQ: "E"}
_ROW_SENSES = {"L": LE, "G": GE, "E": EQ}


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e11:
        return str(int(v))
    s = repr(float(v))
    if len(s) <= 12:
        return s
    for p in range(12, 0, -1):
        s = f"{v:.{p}g}"
        if len(s) <= 12:
            return s
    raise ValueError(f"cannot format {v!r} in 12 characters")


def _line(f1: str = "", f2: str = "", f3: str = "", f4: str = "", f5: str = "",
          f6: str = "") -> str:
    s = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}   {f5:<8}  {f6:>12}"
    return s.rstrip()


def _short_names(names: list[str], prefix: str, taken: set[str]) -> dict[str, str]:
    """Deterministic map long name -> unique name of at most 8 characters."""
    out: dict[str, str] = {}
    used = set(taken)
    for n in names:
        if len(n) <= 8 and n.isprintable() and " " not in n and n not in used \
                and not n.startswith("'"):
            out[n] = n
            used.add(n)
    k = 0
    for n in names:
        if n in out:
            continue
        while True:
            k += 1
            cand = f"{prefix}{k:07d}"
            if cand not in used:
                break
        out[n] = cand
        used.add(cand)
    return out


def _sidecar(path: str) -> str:
    return os.fspath(path) + ".names.json"


def export_lp_file(model: MilpModel, path) -> int:
    """Write ``model`` in fixed-format MPS; returns the number of bytes written.

    Names longer than 8 characters are replaced by generated ones and the
    mapping is written to ``<path>.names.json``.
    """
    problems = model.check()
    if problems:
        raise ValueError("; ".join(problems))
    lp = model.lp
    obj_name = "COST"
    row_map = _short_names([r.name for r in lp.rows], "R", {obj_name})
    col_map = _short_names(lp.names, "C", set())
    model_name = lp.name if len(lp.name) <= 8 and " " not in lp.name else "MODEL"

    lines = [f"NAME          {model_name}", "ROWS", _line("N", obj_name)]
    for r in lp.rows:
        lines.append(_line(_ROW_TYPES[r.sense], row_map[r.name]))
    lines.append("COLUMNS")
    col_rows: dict[str, list[tuple[str, float]]] = {n: [] for n in lp.names}
    for r in lp.rows:
        for v, a in r.coeffs:
            col_rows[v].append((row_map[r.name], a))
    in_marker = False
    markers = 0
    for v in lp.variables:
        is_int = v.name in model.integers
        if is_int and not in_marker:
            lines.append(_line("", f"M{markers:07d}", "'MARKER'", "", "'INTORG'"))
            in_marker = True
        elif not is_int and in_marker:
            lines.append(_line("", f"M{markers:07d}", "'MARKER'", "", "'INTEND'"))
            markers += 1
            in_marker = False
        c = col_map[v.name]
        entries = col_rows[v.name]
        if v.cost != 0 or not entries:
            lines.append(_line("", c, obj_name, _fmt(v.cost)))
        for rn, a in entries:
            lines.append(_line("", c, rn, _fmt(a)))
    if in_marker:
        lines.append(_line("", f"M{markers:07d}", "'MARKER'", "", "'INTEND'"))
    lines.append("RHS")
    if lp.offset != 0:
        lines.append(_line("", "RHS", obj_name, _fmt(-lp.offset)))
    for r in lp.rows:
        if r.rhs != 0:
            lines.append(_line("", "RHS", row_map[r.name], _fmt(r.rhs)))
    lines.append("BOUNDS")
    for v in lp.variables:
        c = col_map[v.name]
        is_int = v.name in model.integers
        lo, hi = v.lower, v.upper
        if lo == hi:
            lines.append(_line("FX", "BND", c, _fmt(lo)))
            continue
        if lo == -math.inf and hi == math.inf:
            lines.append(_line("FR", "BND", c))
            continue
        if lo == -math.inf:
            lines.append(_line("MI", "BND", c))
        elif lo != 0 or hi < 0:
            lines.append(_line("LO", "BND", c, _fmt(lo)))
        if hi != math.inf:
            lines.append(_line("UP", "BND", c, _fmt(hi)))
        elif is_int:
            lines.append(_line("PL", "BND", c))
    lines.append("ENDATA")
    text = "\n".join(lines) + "\n"
    assert all(len(l) <= 80 for l in lines)
    data = text.encode("ascii")
    with open(path, "wb") as fh:
        fh.write(data)
    renamed_rows = {s: n for n, s in row_map.items() if s != n}
    renamed_cols = {s: n for n, s in col_map.items() if s != n}
    side = _sidecar(path)
    if renamed_rows or renamed_cols or model_name != lp.name:
        with open(side, "w") as fh:
            json.dump({"name": lp.name, "rows": renamed_rows, "columns": renamed_cols}, fh,
                      indent=1, sort_keys=True)
    elif os.path.exists(side):
        os.remove(side)
    return len(data)


class MpsFormatError(ValueError):
    pass


def import_lp_file(path) -> MilpModel:
    """Read a fixed-format MPS file written by :func:`export_lp_file`."""
    names = {"name": None, "rows": {}, "columns": {}}
    if os.path.exists(_sidecar(path)):
        with open(_sidecar(path)) as fh:
            names.update(json.load(fh))
    with open(path) as fh:
        raw = fh.read().splitlines()

    section = None
    last = -1
    obj = None
    model_name = "lp"
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    cols: dict[str, dict] = {}
    col_order: list[str] = []
    integers: set[str] = set()
    rhs: dict[str, float] = {}
    offset = 0.0
    in_marker = False

    for lineno, line in enumerate(raw, 1):
        if not line.strip() or line.startswith("*"):
            continue
        if not line[0].isspace():
            head = line.split()[0]
            if head not in _SECTIONS:
                raise MpsFormatError(f"line {lineno}: unknown section {head!r}")
            pos = _SECTIONS.index(head)
            if pos <= last:
                raise MpsFormatError(f"line {lineno}: section {head} out of order")
            if head == "COLUMNS" and "ROWS" != section:
                raise MpsFormatError(f"line {lineno}: COLUMNS must follow ROWS")
            last = pos
            section = head
            if head == "NAME":
                parts = line.split()
                model_name = parts[1] if len(parts) > 1 else "lp"
            if head == "ENDATA":
                break
            continue
        f = line.split()
        if section == "ROWS":
            kind, name = f[0], f[1]
            if kind == "N":
                if obj is None:
                    obj = name
                continue
            if kind not in _ROW_SENSES:
                raise MpsFormatError(f"line {lineno}: unknown row type {kind!r}")
            row_sense[name] = _ROW_SENSES[kind]
            row_order.append(name)
        elif section == "COLUMNS":
            if len(f) >= 3 and f[1] == "'MARKER'":
                in_marker = f[2] == "'INTORG'"
                continue
            col = f[0]
            if col not in cols:
                cols[col] = {"cost": 0.0, "coeffs": {}, "lower": 0.0, "upper": math.inf}
                col_order.append(col)
                if in_marker:
                    integers.add(col)
            for rn, val in zip(f[1::2], f[2::2]):
                if rn == obj:
                    cols[col]["cost"] += float(val)
                elif rn in row_sense:
                    cols[col]["coeffs"][rn] = float(val)
                else:
                    raise MpsFormatError(f"line {lineno}: unknown row {rn!r}")
        elif section == "RHS":
            for rn, val in zip(f[1::2], f[2::2]):
                if rn == obj:
                    offset = -float(val)
                elif rn in row_sense:
                    rhs[rn] = float(val)
                else:
                    raise MpsFormatError(f"line {lineno}: unknown row {rn!r}")
        elif section == "RANGES":
            raise MpsFormatError(f"line {lineno}: ranged rows are not supported")
        elif section == "BOUNDS":
            kind, col = f[0], f[2]
            if col not in cols:
                raise MpsFormatError(f"line {lineno}: unknown column {col!r}")
            c = cols[col]
            val = float(f[3]) if len(f) > 3 else None
            if kind == "UP":
                c["upper"] = val
            elif kind == "LO":
                c["lower"] = val
            elif kind == "FX":
                c["lower"] = c["upper"] = val
            elif kind == "FR":
                c["lower"], c["upper"] = -math.inf, math.inf
            elif kind == "MI":
                c["lower"] = -math.inf
            elif kind == "PL":
                c["upper"] = math.inf
            elif kind == "BV":
                c["lower"], c["upper"] = 0.0, 1.0
                integers.add(col)
            else:
                raise MpsFormatError(f"line {lineno}: unknown bound type {kind!r}")
        else:
            raise MpsFormatError(f"line {lineno}: data outside a section")
    if section != "ENDATA":
        raise MpsFormatError("missing ENDATA")

    rmap = names.get("rows", {})
    cmap = names.get("columns", {})
    lp = LinearProgram(name=names.get("name") or model_name, offset=offset)
    for col in col_order:
        c = cols[col]
        lp.add_variable(cmap.get(col, col), c["lower"], c["upper"], c["cost"])
    by_row: dict[str, list[tuple[str, float]]] = {r: [] for r in row_order}
    for col in col_order:
        for rn, a in cols[col]["coeffs"].items():
            by_row[rn].append((cmap.get(col, col), a))
    for rn in row_order:
        lp.add_row(rmap.get(rn, rn), by_row[rn], row_sense[rn], rhs.get(rn, 0.0))
    return MilpModel(lp, {cmap.get(c, c) for c in integers})


def models_equal(a: MilpModel, b: MilpModel, rel_tol: float = 1e-10) -> bool:
    """Structural equality: names, order, bounds, costs, rows, integrality and offset."""
    def close(x, y):
        if x == y:
            return True
        return math.isclose(x, y, rel_tol=rel_tol, abs_tol=1e-12)

    la, lb = a.lp, b.lp
    if la.names != lb.names or a.integers != b.integers or not close(la.offset, lb.offset):
        return False
    for va, vb in zip(la.variables, lb.variables):
        if not (close(va.lower, vb.lower) and close(va.upper, vb.upper)
                and close(va.cost, vb.cost)):
            return False
    if [r.name for r in la.rows] != [r.name for r in lb.rows]:
        return False
    for ra, rb in zip(la.rows, lb.rows):
        if ra.sense != rb.sense or not close(ra.rhs, rb.rhs):
            return False
        ca, cb = dict(ra.coeffs), dict(rb.coeffs)
        if ca.keys() != cb.keys() or not all(close(ca[k], cb[k]) for k in ca):
            return False
    return True
