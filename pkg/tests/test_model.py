import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eanm.model import (Demand, InconsistentStateError, LinkSpec, NodeSpec, RateConfig,
                        aggregate_per_source, evaluate_power, node_loads, validate_instance)
from instances import alr_link, make, two_node


def test_two_node_instance_is_valid():
    assert validate_instance(two_node()) == []


def test_self_demand_is_reported():
    inst = make([NodeSpec("A"), NodeSpec("B")], [LinkSpec("A", "B", 10)], [Demand("A", "A", 5)])
    assert validate_instance(inst) == ["demand 0: origin equals destination"]


def test_rate_configs_without_sleep_entry():
    link = LinkSpec("A", "B", 100, rate_configs=(RateConfig(100, 5), RateConfig(1000, 9)))
    problems = validate_instance(make([NodeSpec("A"), NodeSpec("B")], [link], []))
    assert len(problems) == 1
    assert "sleep configuration" in problems[0]


@pytest.mark.parametrize("mutate, fragment", [
    (dict(links=[LinkSpec("A", "Z", 10)]), "endpoint"),
    (dict(links=[LinkSpec("A", "B", 10), LinkSpec("A", "B", 5)]), "duplicate arc"),
    (dict(links=[LinkSpec("A", "B", 10, max_utilization=0)]), "max_utilization"),
    (dict(links=[LinkSpec("A", "B", 10, num_cards=0)]), "num_cards"),
    (dict(links=[LinkSpec("A", "B", 10, piecewise=((0, 2), (5, 1)))]), "convex"),
    (dict(reactivation_fraction=1.5), "delta"),
])
def test_invariant_violations_name_the_element(mutate, fragment):
    base = dict(nodes=[NodeSpec("A"), NodeSpec("B")], links=[LinkSpec("A", "B", 10)],
                demands=[Demand("A", "B", 1)])
    base.update(mutate)
    problems = validate_instance(make(base.pop("nodes"), base.pop("links"), base.pop("demands"),
                                      **base))
    assert any(fragment in p for p in problems), problems


def test_periods_need_rates_for_every_period():
    inst = make([NodeSpec("A"), NodeSpec("B")], [LinkSpec("A", "B", 10)],
                [Demand("A", "B", 0, per_period_rates={"p1": 1})], periods=("p1", "p2"))
    assert any("p2" in p for p in validate_instance(inst))


def test_on_off_link_power_ignores_load():
    assert evaluate_power(LinkSpec("A", "B", 10, fixed_power=3), 7, 1) == 3


def test_alr_config_power():
    link = alr_link(base=10)
    assert evaluate_power(link, 500, 2) == 14
    assert evaluate_power(link, 5000, 3) - evaluate_power(link, 500, 2) == 15
    assert evaluate_power(link, 0, 0) == 0


def test_node_idle_is_ninety_percent_of_peak():
    node = NodeSpec("A", 9, 0.1)
    peak, idle = evaluate_power(node, 10, 1), evaluate_power(node, 0, 1)
    assert peak == pytest.approx(10)
    assert idle == 9
    assert idle / peak == pytest.approx(0.9)


def test_bundled_cards_scale_fixed_power():
    link = LinkSpec("A", "B", 10, num_cards=3, fixed_power=2, per_unit_power=0.5)
    assert evaluate_power(link, 12, 2) == 4 + 6


def test_asleep_with_load_is_inconsistent():
    with pytest.raises(InconsistentStateError):
        evaluate_power(LinkSpec("A", "B", 10, fixed_power=3), 1, 0)
    with pytest.raises(InconsistentStateError):
        evaluate_power(alr_link(), 1, 0)
    assert evaluate_power(NodeSpec("A", 5), 0, 0) == 0


def test_aggregate_per_source():
    inst = make([NodeSpec(n) for n in "ABC"], [],
                [Demand("A", "B", 5), Demand("A", "C", 2), Demand("B", "C", 1)])
    assert aggregate_per_source(inst) == {"A": (7, {"B": 5, "C": 2}), "B": (1, {"C": 1})}
    assert aggregate_per_source(make([NodeSpec("A")], [], [])) == {}
    merged = make([NodeSpec("A"), NodeSpec("B")], [], [Demand("A", "B", 3), Demand("A", "B", 4)])
    assert aggregate_per_source(merged) == {"A": (7, {"B": 7})}


def test_node_load_counts_entering_and_originated_flow():
    inst = make([NodeSpec(n) for n in "ABC"], [LinkSpec("A", "B", 10), LinkSpec("B", "C", 10)],
                [Demand("A", "C", 4), Demand("B", "C", 1)])
    assert node_loads(inst, {("A", "B"): 4, ("B", "C"): 5}) == {"A": 4, "B": 5, "C": 5}


profiles = st.lists(st.tuples(st.floats(0.5, 5), st.floats(0, 3)), min_size=1, max_size=4)


def _piecewise(raw):
    points, at, slope = [], 0.0, 0.0
    for width, rise in raw:
        slope += rise
        points.append((at, slope))
        at += width
    return tuple(points)


@settings(max_examples=60, deadline=None)
@given(raw=profiles, fixed=st.floats(0, 20), a=st.floats(0, 30), b=st.floats(0, 30))
def test_power_is_monotone_in_load(raw, fixed, a, b):
    node = NodeSpec("A", fixed, piecewise=_piecewise(raw))
    lo, hi = sorted((a, b))
    assert evaluate_power(node, lo, 1) <= evaluate_power(node, hi, 1) + 1e-9


@settings(max_examples=60, deadline=None)
@given(raw=profiles, load=st.floats(0, 30), h=st.floats(0.01, 2))
def test_piecewise_term_is_convex_and_integrates_slopes(raw, load, h):
    spec = NodeSpec("A", 0.0, piecewise=_piecewise(raw))
    f = lambda x: evaluate_power(spec, x, 1)
    if load >= h:
        assert f(load - h) + f(load + h) >= 2 * f(load) - 1e-7
    pts = list(spec.piecewise) + [(math.inf, 0.0)]
    integral = sum(s * max(0.0, min(load, pts[k + 1][0]) - x) for k, (x, s) in enumerate(pts[:-1]))
    assert f(load) == pytest.approx(integral, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("ABC"), st.sampled_from("ABC"), st.floats(0, 10)),
                max_size=6))
def test_aggregate_totals_match_demand_sum(raw):
    demands = [Demand(o, d, r) for o, d, r in raw if o != d]
    inst = make([NodeSpec(n) for n in "ABC"], [], demands)
    agg = aggregate_per_source(inst)
    assert sum(t for t, _ in agg.values()) == pytest.approx(sum(d.rate for d in demands))
    for total, per_dest in agg.values():
        assert total == pytest.approx(sum(per_dest.values()))
