import itertools
import math
import os
import shutil

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eanm.formulations import build_model, build_routing_model
from eanm.lp import GE, LE, LinearProgram
from eanm.milp import (FEASIBLE, LIMIT_REACHED, MilpModel, MpsFormatError, export_lp_file,
                       import_lp_file, models_equal, solve_milp)
from eanm.lp import INFEASIBLE, OPTIMAL
from eanm.oracle import brute_force_optimum
from eanm.variants import SLEEP, Variant
from golden_cases import CASES
from instances import random_instance, triangle, two_node

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def _knapsack(values, weights, cap) -> MilpModel:
    m = MilpModel(LinearProgram(name="knap"))
    for k, (v, w) in enumerate(zip(values, weights)):
        m.add_integer(f"x{k}", 0, 1, -v)
    m.lp.add_row("cap", [(f"x{k}", w) for k, w in enumerate(weights)], LE, cap)
    return m


def test_two_node_sleep_model():
    model, _ = build_model(two_node(), Variant(energy=SLEEP))
    res = solve_milp(model)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(23)


def test_integral_root_needs_one_node():
    model, _ = build_routing_model(triangle(fixed=0, per_unit=1))
    model.integers.update(v for v in model.lp.names if v.startswith("f_dem"))
    for v in list(model.integers):
        model.lp.variable(v).upper = 10
    res = solve_milp(model)
    assert res.status == OPTIMAL and res.nodes == 1
    assert res.root_bound == pytest.approx(res.objective)


def test_random_sleep_instance_matches_oracle():
    inst = random_instance(3)
    variant = Variant(energy=SLEEP)
    model, _ = build_model(inst, variant)
    res = solve_milp(model)
    ref = brute_force_optimum(inst, variant)
    assert res.objective == pytest.approx(ref.power, abs=1e-6)


def test_knapsack_and_bound_history():
    values, weights = [10, 13, 7, 8, 4], [4, 6, 3, 5, 2]
    best = max(sum(v for v, b in zip(values, pick) if b)
               for pick in itertools.product((0, 1), repeat=5)
               if sum(w for w, b in zip(weights, pick) if b) <= 10)
    res = solve_milp(_knapsack(values, weights, 10))
    assert res.objective == pytest.approx(-best)
    hist = res.bound_history
    assert all(b2 >= b1 - 1e-9 for b1, b2 in zip(hist, hist[1:]))
    assert res.objective >= res.bound - 1e-9


def test_infeasible_and_limits():
    m = _knapsack([1, 1], [1, 1], 1)
    m.lp.add_row("both", [("x0", 1), ("x1", 1)], GE, 2)
    assert solve_milp(m).status == INFEASIBLE
    big = _knapsack(list(range(3, 15)), [k + 0.5 for k in range(2, 14)], 20)
    assert solve_milp(big, node_limit=1).status == LIMIT_REACHED
    res = solve_milp(big, node_limit=8)
    assert res.status in (FEASIBLE, LIMIT_REACHED, OPTIMAL)
    if res.status == FEASIBLE:
        assert res.objective >= res.bound - 1e-9
    loose = solve_milp(big, gap=0.5)
    exact = solve_milp(big)
    assert loose.objective - exact.objective <= 0.5 * abs(loose.objective) + 1e-9


def test_integer_needs_finite_bounds():
    m = MilpModel(LinearProgram())
    m.add_integer("n", 0, math.inf)
    with pytest.raises(ValueError):
        solve_milp(m)


def test_mps_rhs_of_single_row(tmp_path):
    m = MilpModel(LinearProgram(name="one"))
    m.lp.add_variable("x", 0, math.inf, 1)
    m.lp.add_row("lo", [("x", 1)], GE, 3)
    path = tmp_path / "one.mps"
    size = export_lp_file(m, path)
    text = path.read_text()
    assert size == len(text.encode())
    rhs = text.split("RHS\n")[1].split("BOUNDS")[0].split("ENDATA")[0].split()
    assert rhs == ["RHS", "lo", "3"]


def test_mps_single_marker_pair(tmp_path):
    m = MilpModel(LinearProgram(name="bin"))
    m.add_integer("b", 0, 1, 1)
    m.lp.add_variable("x", 0, 5, 1)
    m.lp.add_row("r", [("b", 1), ("x", 1)], GE, 1)
    export_lp_file(m, tmp_path / "bin.mps")
    text = (tmp_path / "bin.mps").read_text()
    assert text.count("'INTORG'") == 1 and text.count("'INTEND'") == 1
    assert max(len(line) for line in text.splitlines()) <= 80


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden_round_trip(name, tmp_path):
    make_instance, variant = CASES[name]
    model, _ = build_model(make_instance(), variant)
    out = tmp_path / f"{name}.mps"
    export_lp_file(model, out)
    assert out.read_bytes() == open(os.path.join(GOLDEN, f"{name}.mps"), "rb").read()
    back = import_lp_file(out)
    assert models_equal(model, back)
    assert back.lp.names == model.lp.names


def test_import_without_sidecar_keeps_short_names(tmp_path):
    src = os.path.join(GOLDEN, "two_node_sleep.mps")
    shutil.copy(src, tmp_path / "plain.mps")
    back = import_lp_file(tmp_path / "plain.mps")
    model, _ = build_model(two_node(), Variant(energy=SLEEP))
    assert len(back.lp.variables) == len(model.lp.variables)
    assert solve_milp(back).objective == pytest.approx(23)


@pytest.mark.parametrize("text", [
    "ROWS\n N  COST\nNAME          x\nENDATA\n",
    "NAME          x\nROWS\n Q  R1\nENDATA\n",
])
def test_malformed_files_are_rejected(tmp_path, text):
    path = tmp_path / "bad.mps"
    path.write_text(text)
    with pytest.raises(MpsFormatError):
        import_lp_file(path)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_root_relaxation_bounds_optimum(seed):
    model, _ = build_model(random_instance(seed), Variant(energy=SLEEP))
    res = solve_milp(model)
    if res.status == OPTIMAL:
        assert res.root_bound <= res.objective + 1e-6
        assert all(b2 >= b1 - 1e-9 for b1, b2 in zip(res.bound_history, res.bound_history[1:]))
