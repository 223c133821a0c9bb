import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eanm.instance_io import (InstanceParseError, dumps_instance, instance_from_dict,
                              instance_to_dict, load_instance, loads_instance, save_instance)
from eanm.model import LinkSpec, NodeSpec, RateConfig
from instances import alr_link, make, random_instance, two_node, two_period


def test_two_node_file_parses():
    inst = load_instance("tests/data/two_node.json")
    assert inst.node_ids == ["A", "B"]
    assert inst.links[0].arc == ("A", "B") and inst.links[0].fixed_power == 3
    assert inst.flow_unit == "Mbps"


def test_unknown_key_is_rejected_with_its_location():
    doc = instance_to_dict(two_node())
    doc["links"][0]["colour"] = "red"
    with pytest.raises(InstanceParseError, match=r"links\[0\]: unknown key\(s\) 'colour'"):
        instance_from_dict(doc)


def test_lenient_mode_warns_instead():
    doc = instance_to_dict(two_node())
    doc["meta"]["owner"] = "lab"
    with pytest.warns(UserWarning, match="meta: unknown key"):
        inst = instance_from_dict(doc, lenient=True)
    assert inst == two_node()


def test_json_syntax_error_names_the_line():
    with pytest.raises(InstanceParseError, match="line 2, column"):
        loads_instance('{"nodes": [],\n  "links": [,]}')


@pytest.mark.parametrize("mutate, fragment", [
    (lambda d: d["nodes"][0].pop("id"), "nodes[0]: missing key 'id'"),
    (lambda d: d["links"][0].update(card_capacity="big"), "links[0].card_capacity"),
    (lambda d: d["links"][0].update(num_cards=1.5), "expected an integer"),
    (lambda d: d["demands"][0].pop("rate"), "demands[0]: missing key 'rate'"),
    (lambda d: d["demands"][0].update(destination="Z"), "invalid instance"),
    (lambda d: d.update(periods="day"), "periods: expected a list"),
])
def test_malformed_documents(mutate, fragment):
    doc = instance_to_dict(two_node())
    mutate(doc)
    with pytest.raises(InstanceParseError) as err:
        instance_from_dict(doc)
    assert fragment in str(err.value)


def test_file_round_trip(tmp_path):
    inst = two_period(delta=0.5, eta=1)
    save_instance(inst, tmp_path / "i.json")
    assert load_instance(tmp_path / "i.json") == inst


@st.composite
def instances(draw):
    base = random_instance(draw(st.integers(0, 10_000)),
                           periods=draw(st.sampled_from([None, ("day", "night")])))
    links = list(base.links)
    if draw(st.booleans()):
        links[0] = LinkSpec(links[0].source, links[0].target, 0, rate_configs=(
            RateConfig(0, 0), RateConfig(draw(st.integers(1, 20)), draw(st.floats(0, 50)))))
    if draw(st.booleans()):
        links[-1] = LinkSpec(links[-1].source, links[-1].target, 10,
                             max_utilization=draw(st.floats(0.1, 1)),
                             weight=draw(st.integers(1, 10)),
                             piecewise=((0.0, 0.5), (4.0, draw(st.floats(0.5, 3)))))
    nodes = list(base.nodes)
    if draw(st.booleans()):
        nodes[0] = NodeSpec(nodes[0].id, 1.0, piecewise=((0.0, 0.25), (2.0, 1.0)))
    return make(nodes, links, base.demands, periods=base.periods,
                reactivation_fraction=draw(st.sampled_from([0.0, 0.3])),
                max_reactivations=draw(st.sampled_from([None, 1, 2])),
                omega_max=float(draw(st.integers(1, 20))),
                big_m=draw(st.sampled_from([None, 500.0])),
                name=draw(st.text("abcxyz_", min_size=1, max_size=8)))


@settings(max_examples=60, deadline=None)
@given(instances())
def test_parse_serialize_round_trip(inst):
    text = dumps_instance(inst)
    parsed = loads_instance(text)
    assert parsed == inst
    # numbers are written as parsed floats, so the text is stable after one pass
    canonical = dumps_instance(parsed)
    assert dumps_instance(loads_instance(canonical)) == canonical


def test_alr_link_round_trips():
    inst = make([NodeSpec("A"), NodeSpec("B")], [alr_link()], [])
    doc = json.loads(dumps_instance(inst))
    assert doc["links"][0]["rate_configs"][2] == {"capacity": 1000, "power": 14.0}
    assert loads_instance(json.dumps(doc)) == inst
