import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eanm.lp import (EQ, GE, INFEASIBLE, LE, OPTIMAL, UNBOUNDED, FAILED, CompiledLP,
                     LinearProgram, _basis_inverse, solve_compiled, solve_lp)


def test_bound_active_optimum():
    lp = LinearProgram()
    lp.add_variable("x", 0, 10, 1)
    lp.add_row("r", [("x", 1)], GE, 3)
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(3)
    assert sol.values["x"] == pytest.approx(3)


def test_empty_rows():
    lp = LinearProgram()
    lp.add_variable("x", 0, 1, 0)
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL and sol.objective == 0


def test_facet_optimum():
    lp = LinearProgram()
    lp.add_variable("x", 0, 1, -1)
    lp.add_variable("y", 0, 1, -1)
    lp.add_row("r", [("x", 1), ("y", 1)], LE, 1)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(-1)
    assert sol.values["x"] + sol.values["y"] == pytest.approx(1)
    # the hand-enumerated vertices of the polytope: (0,0), (1,0), (0,1)
    assert min(-x - y for x, y in [(0, 0), (1, 0), (0, 1)]) == -1


def test_infeasible_and_unbounded():
    lp = LinearProgram()
    lp.add_variable("x", 0, 1)
    lp.add_row("r", [("x", 1)], GE, 2)
    assert solve_lp(lp).status == INFEASIBLE
    lp = LinearProgram()
    lp.add_variable("x", 0, math.inf, -1)
    lp.add_row("r", [("x", 1)], GE, 1)
    assert solve_lp(lp).status == UNBOUNDED


def test_free_and_negative_bounds_with_offset():
    lp = LinearProgram(offset=5.0)
    lp.add_variable("x", -math.inf, math.inf, 1)
    lp.add_variable("y", -4, -1, -2)
    lp.add_row("r", [("x", 1), ("y", 1)], EQ, -3)
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL
    # y = -1 (cost -2 each), x = -2
    assert sol.objective == pytest.approx(5 - 2 + 2)
    assert abs(sol.objective - sol.dual_objective) <= 1e-7


def test_iteration_cap_reports_failure():
    lp = LinearProgram()
    for k in range(4):
        lp.add_variable(f"x{k}", 0, 10, -1 - k)
    lp.add_row("r", [(f"x{k}", 1) for k in range(4)], LE, 5)
    lp.add_row("s", [(f"x{k}", k + 1) for k in range(4)], LE, 9)
    assert solve_lp(lp, max_iter=1).status == FAILED


def test_duplicate_names_rejected():
    lp = LinearProgram()
    lp.add_variable("x")
    with pytest.raises(ValueError):
        lp.add_variable("x")
    lp.add_row("r", [("x", 1)], LE, 1)
    with pytest.raises(ValueError):
        lp.add_row("r", [("x", 1)], LE, 1)


def test_warm_start_after_bound_change_matches_cold_solve():
    lp = LinearProgram()
    for k in range(3):
        lp.add_variable(f"x{k}", 0, 4, -(k + 1))
    lp.add_row("cap", [(f"x{k}", 1) for k in range(3)], LE, 6)
    lp.add_row("mix", [("x0", 1), ("x2", -1)], GE, -2)
    comp = CompiledLP(lp)
    root = solve_compiled(comp)
    upper = comp.upper.copy()
    upper[2] = 1.5
    warm = solve_compiled(comp, upper=upper, warm_start=root.basis_state)
    cold = solve_compiled(comp, upper=upper)
    assert warm.status == cold.status == OPTIMAL
    assert warm.objective == pytest.approx(cold.objective)


def _vertex_optimum(costs, supply, demand):
    """Minimum over basic solutions of a transportation LP by brute force."""
    m, n = len(supply), len(demand)
    cells = list(itertools.product(range(m), range(n)))
    best = math.inf
    for basis in itertools.combinations(range(len(cells)), m + n - 1):
        A = np.zeros((m + n, len(basis)))
        for col, k in enumerate(basis):
            i, j = cells[k]
            A[i, col] = 1
            A[m + j, col] = 1
        rhs = np.array(list(supply) + list(demand), float)
        x, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        if np.allclose(A @ x, rhs, atol=1e-9) and np.all(x >= -1e-9):
            best = min(best, sum(costs[cells[k][0]][cells[k][1]] * x[c]
                                 for c, k in enumerate(basis)))
    return best


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 3).flatmap(lambda m: st.tuples(
    st.just(m), st.integers(2, 6 // m),
    st.lists(st.integers(1, 9), min_size=6, max_size=6),
    st.lists(st.integers(1, 9), min_size=3, max_size=3))))
def test_transportation_matches_vertex_enumeration(data):
    m, n, raw_costs, raw_supply = data
    costs = [raw_costs[i * n:(i + 1) * n] for i in range(m)]
    supply = raw_supply[:m]
    total = sum(supply)
    demand = [total // n] * n
    demand[-1] += total - sum(demand)
    lp = LinearProgram()
    for i in range(m):
        for j in range(n):
            lp.add_variable(f"x{i}{j}", 0, math.inf, costs[i][j])
    for i in range(m):
        lp.add_row(f"s{i}", [(f"x{i}{j}", 1) for j in range(n)], EQ, supply[i])
    for j in range(n):
        lp.add_row(f"d{j}", [(f"x{i}{j}", 1) for i in range(m)], EQ, demand[j])
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(_vertex_optimum(costs, supply, demand), abs=1e-6)
    assert abs(sol.objective - sol.dual_objective) <= 1e-6


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=3, max_size=3),
       st.lists(st.integers(1, 6), min_size=3, max_size=3),
       st.integers(0, 2), st.floats(0.5, 3))
def test_perturb_and_restore_is_deterministic(costs, caps, which, delta):
    lp = LinearProgram()
    for k in range(3):
        lp.add_variable(f"x{k}", 0, caps[k], costs[k])
    lp.add_row("a", [("x0", 1), ("x1", 1), ("x2", 1)], LE, 7)
    lp.add_row("b", [("x0", 1), ("x1", -1)], GE, -2)
    first = solve_lp(lp)
    lp.variables[which].cost += delta
    solve_lp(lp)
    lp.variables[which].cost -= delta
    again = solve_lp(lp)
    assert first.status == again.status == OPTIMAL
    assert again.objective == pytest.approx(first.objective, abs=1e-6)
    for r in lp.rows:
        act = lp.row_activity(r, first.values)
        assert act <= r.rhs + 1e-7 if r.sense == LE else act >= r.rhs - 1e-7


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10), st.data())
def test_block_basis_inverse(m, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 10_000)))
    units = data.draw(st.integers(0, m))
    B = np.zeros((m, m))
    rows = rng.permutation(m)
    for c in range(m):
        if c < units:
            B[rows[c], c] = rng.choice([-1.0, 1.0, 2.5])
        else:
            B[:, c] = rng.normal(size=m) * (rng.random(m) < 0.7)
    B = B[:, rng.permutation(m)]
    if abs(np.linalg.det(B)) < 1e-6:
        return
    assert np.allclose(_basis_inverse(B) @ B, np.eye(m), atol=1e-8)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_matches_scipy_linprog(n, m, data):
    linprog = pytest.importorskip("scipy.optimize").linprog
    ints = st.integers(-5, 5)
    c = [data.draw(ints) for _ in range(n)]
    A = [[data.draw(ints) for _ in range(n)] for _ in range(m)]
    rhs = [data.draw(st.integers(-10, 10)) for _ in range(m)]
    senses = [data.draw(st.sampled_from([LE, GE, EQ])) for _ in range(m)]
    upper = [data.draw(st.sampled_from([3.0, 10.0, math.inf])) for _ in range(n)]
    lp = LinearProgram()
    for j in range(n):
        lp.add_variable(f"x{j}", 0.0, upper[j], c[j])
    for i in range(m):
        lp.add_row(f"r{i}", [(f"x{j}", A[i][j]) for j in range(n)], senses[i], rhs[i])
    ours = solve_lp(lp)
    ub = [row if s == LE else [-a for a in row] for row, s in zip(A, senses) if s != EQ]
    b_ub = [r if s == LE else -r for r, s in zip(rhs, senses) if s != EQ]
    eq = [(row, r) for row, r, s in zip(A, rhs, senses) if s == EQ]
    ref = linprog(c, A_ub=ub or None, b_ub=b_ub or None,
                  A_eq=[row for row, _ in eq] or None, b_eq=[r for _, r in eq] or None,
                  bounds=[(0, None if math.isinf(u) else u) for u in upper], method="highs")
    expected = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}[ref.status]
    assert ours.status == expected
    if expected == OPTIMAL:
        assert ours.objective == pytest.approx(ref.fun, abs=1e-6)
