import ast
import inspect

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import eanm.oracle as oracle_module
from eanm.formulations import build_model
from eanm.heuristics import SortPolicy, greedy_sleep
from eanm.lp import OPTIMAL
from eanm.milp import solve_milp
from eanm.model import Demand, Instance, LinkSpec, NodeSpec, RateConfig
from eanm.oracle import LimitExceeded, OracleLimits, brute_force_optimum
from eanm.routing import k_shortest_paths
from eanm.validator import validate_solution
from eanm.variants import (PER_PATH, SINGLE_PATH, SLEEP, EnergyOptions, ProtectionMode,
                           RoutingScheme, Variant)
from instances import (make, random_instance, random_mesh, square_ring, triangle, two_node,
                       two_period)

SLEEPY = Variant(energy=SLEEP)


def milp(inst, variant):
    res = solve_milp(build_model(inst, variant)[0])
    return res.objective if res.status == OPTIMAL else None


def test_two_node_and_triangle():
    assert brute_force_optimum(two_node(), SLEEPY).power == pytest.approx(23)
    assert brute_force_optimum(triangle(), SLEEPY).power == pytest.approx(1)


def test_result_validates_and_reports_counts():
    sol = brute_force_optimum(triangle(), SLEEPY)
    assert validate_solution(triangle(), sol).passed
    assert sol.info["required"] == 2 ** 3 * 2 ** 3
    assert 1 <= sol.info["evaluated"] <= sol.info["required"]


def test_limit_exceeded_reports_requirement():
    with pytest.raises(LimitExceeded) as err:
        brute_force_optimum(triangle(), SLEEPY, OracleLimits(max_states=10))
    assert err.value.required == 64
    with pytest.raises(ValueError):
        OracleLimits(max_states=0)


def test_infeasible_instance():
    sol = brute_force_optimum(triangle(rate=25), SLEEPY)
    assert sol.status == "infeasible" and not sol.periods


def test_module_never_builds_milp_models():
    tree = ast.parse(inspect.getsource(oracle_module))
    imported = {n.module for n in ast.walk(tree) if isinstance(n, ast.ImportFrom)}
    assert not imported & {"formulations", "milp", "heuristics", "validator"}


def test_bundled_and_alr_match_milp():
    inst = random_instance(4, max_cards=2)
    variant = Variant(energy=EnergyOptions(bundled=True))
    assert brute_force_optimum(inst, variant).power == pytest.approx(milp(inst, variant))
    links = [LinkSpec(l.source, l.target, 0, rate_configs=(
        RateConfig(0, 0), RateConfig(5, l.fixed_power), RateConfig(12, l.fixed_power + 3)))
        for l in inst.links]
    alr = make(inst.nodes, links, inst.demands)
    variant = Variant(energy=EnergyOptions(alr=True))
    ref = brute_force_optimum(alr, variant)
    assert ref.power == pytest.approx(milp(alr, variant))


def test_path_variants_match_milp():
    inst = random_instance(8)
    single = Variant(RoutingScheme(SINGLE_PATH), SLEEP)
    assert brute_force_optimum(inst, single).power == pytest.approx(milp(inst, single))
    paths = {k: [tuple(p) for p in k_shortest_paths(inst, None, k, 2)]
             for k in range(len(inst.demands))}
    per_path = Variant(RoutingScheme(PER_PATH, paths, binary=True), SLEEP)
    assert brute_force_optimum(inst, per_path).power == pytest.approx(milp(inst, per_path))


@pytest.mark.parametrize("mode", [m for m in ProtectionMode if m != ProtectionMode.NONE])
def test_protection_matches_milp(mode):
    inst = square_ring(demands=(("A", "C", 2.0), ("B", "D", 3.0)))
    variant = Variant(RoutingScheme(SINGLE_PATH), SLEEP, mode)
    ref = brute_force_optimum(inst, variant)
    assert ref.power == pytest.approx(milp(inst, variant))
    assert validate_solution(inst, ref).passed


@pytest.mark.parametrize("delta, fixed", [(0.0, False), (0.5, False), (0.5, True)])
def test_multiperiod_matches_milp(delta, fixed):
    inst = random_instance(2, max_nodes=4, max_arcs=5, max_demands=2, max_cards=1,
                           periods=("p1", "p2"))
    inst = make(inst.nodes, inst.links, inst.demands, periods=inst.periods,
                reactivation_fraction=delta, max_reactivations=1)
    variant = Variant(energy=SLEEP, multiperiod=True, fixed_routing=fixed)
    ref = brute_force_optimum(inst, variant)
    assert ref.power == pytest.approx(milp(inst, variant), abs=1e-6)
    assert brute_force_optimum(two_period(delta=0.5), Variant(
        energy=SLEEP, multiperiod=True)).power == pytest.approx(33)


def test_ecmp_grid_is_an_upper_bound():
    base = random_instance(6, max_demands=2, max_cards=1)
    # weights 1..3 plus "asleep" on each of the 6 arcs keeps the grid at 4**6 points
    inst = make(base.nodes, base.links, base.demands, omega_max=3)
    variant = Variant(energy=SLEEP, shortest_path=True)
    grid = brute_force_optimum(inst, variant)
    exact = milp(inst, variant)
    if exact is None:
        return
    assert exact <= grid.power + 1e-6
    assert validate_solution(inst, grid).passed


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from(["least_flow_first", "random",
                                                 "least_degree_first"]))
def test_oracle_below_every_validated_solution(seed, policy):
    inst = random_instance(seed)
    ref = brute_force_optimum(inst, SLEEPY)
    greedy = greedy_sleep(inst, SortPolicy(policy, seed))
    if ref.status == "infeasible":
        assert greedy.status == "infeasible"
        return
    assert validate_solution(inst, greedy).passed
    assert ref.power <= greedy.power + 1e-6
