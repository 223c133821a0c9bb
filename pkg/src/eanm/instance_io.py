"""JSON instance files.

Top-level keys: ``meta`` {name, flow_unit}, ``nodes``, ``links``, ``demands``,
optional ``periods`` and ``options`` {delta, eta_on, omega_max, big_m}. Link
endpoints are written ``from``/``to``; all other field names follow the
model types.
"""

from __future__ import annotations

import json
import math
import warnings
from typing import Any, Optional

from .model import Demand, Instance, LinkSpec, NodeSpec, RateConfig, validate_instance

TOP_KEYS = {"meta", "nodes", "links", "demands", "periods", "options"}
META_KEYS = {"name", "flow_unit"}
NODE_KEYS = {"id", "fixed_power", "per_unit_power", "piecewise"}
LINK_KEYS = {"from", "to", "card_capacity", "num_cards", "max_utilization", "fixed_power",
             "per_unit_power", "piecewise", "rate_configs", "weight"}
DEMAND_KEYS = {"origin", "destination", "rate", "per_period_rates"}
OPTION_KEYS = {"delta", "eta_on", "omega_max", "big_m"}
RATE_KEYS = {"capacity", "power"}


class InstanceParseError(ValueError):
    """Malformed instance document; the message names the line or key."""


class _Reader:
    def __init__(self, lenient: bool):
        self.lenient = lenient

    def keys(self, obj: Any, allowed: set[str], where: str, required=()) -> dict:
        if not isinstance(obj, dict):
            raise InstanceParseError(f"{where}: expected an object")
        unknown = sorted(set(obj) - allowed)
        if unknown:
            msg = f"{where}: unknown key(s) {', '.join(map(repr, unknown))}"
            if not self.lenient:
                raise InstanceParseError(msg)
            warnings.warn(msg, stacklevel=3)
        for k in required:
            if k not in obj:
                raise InstanceParseError(f"{where}: missing key {k!r}")
        return obj

    @staticmethod
    def number(obj: dict, key: str, where: str, default=None, integer: bool = False):
        if key not in obj or obj[key] is None:
            if default is None and key in obj:
                return None
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise InstanceParseError(f"{where}.{key}: expected a number, got {v!r}")
        if integer:
            if v != int(v):
                raise InstanceParseError(f"{where}.{key}: expected an integer, got {v!r}")
            return int(v)
        if not math.isfinite(v):
            raise InstanceParseError(f"{where}.{key}: must be finite")
        return float(v)

    @staticmethod
    def string(obj: dict, key: str, where: str) -> str:
        v = obj.get(key)
        if not isinstance(v, str) or not v:
            raise InstanceParseError(f"{where}.{key}: expected a non-empty string, got {v!r}")
        return v

    def piecewise(self, obj: dict, where: str):
        raw = obj.get("piecewise")
        if raw is None:
            return None
        if not isinstance(raw, list):
            raise InstanceParseError(f"{where}.piecewise: expected a list of [breakpoint, slope]")
        out = []
        for k, pair in enumerate(raw):
            if (not isinstance(pair, list) or len(pair) != 2
                    or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in pair)):
                raise InstanceParseError(f"{where}.piecewise[{k}]: expected [breakpoint, slope]")
            out.append((float(pair[0]), float(pair[1])))
        return tuple(out)


def instance_from_dict(data: Any, lenient: bool = False) -> Instance:
    """Build an instance from a parsed document; raises :class:`InstanceParseError`."""
    r = _Reader(lenient)
    doc = r.keys(data, TOP_KEYS, "instance", required=("nodes", "links"))
    meta = r.keys(doc.get("meta", {}), META_KEYS, "meta")
    options = r.keys(doc.get("options", {}), OPTION_KEYS, "options")

    nodes = []
    if not isinstance(doc["nodes"], list):
        raise InstanceParseError("nodes: expected a list")
    for k, raw in enumerate(doc["nodes"]):
        where = f"nodes[{k}]"
        obj = r.keys(raw, NODE_KEYS, where, required=("id",))
        nodes.append(NodeSpec(r.string(obj, "id", where),
                              r.number(obj, "fixed_power", where, 0.0),
                              r.number(obj, "per_unit_power", where, 0.0),
                              r.piecewise(obj, where)))

    links = []
    if not isinstance(doc["links"], list):
        raise InstanceParseError("links: expected a list")
    for k, raw in enumerate(doc["links"]):
        where = f"links[{k}]"
        obj = r.keys(raw, LINK_KEYS, where, required=("from", "to", "card_capacity"))
        configs = None
        if obj.get("rate_configs") is not None:
            if not isinstance(obj["rate_configs"], list):
                raise InstanceParseError(f"{where}.rate_configs: expected a list")
            configs = []
            for e, rc in enumerate(obj["rate_configs"]):
                w = f"{where}.rate_configs[{e}]"
                rc = r.keys(rc, RATE_KEYS, w, required=("capacity", "power"))
                configs.append(RateConfig(r.number(rc, "capacity", w), r.number(rc, "power", w)))
            configs = tuple(configs)
        links.append(LinkSpec(
            r.string(obj, "from", where), r.string(obj, "to", where),
            r.number(obj, "card_capacity", where),
            r.number(obj, "num_cards", where, 1, integer=True),
            r.number(obj, "max_utilization", where, 1.0),
            r.number(obj, "fixed_power", where, 0.0),
            r.number(obj, "per_unit_power", where, 0.0),
            r.piecewise(obj, where), configs,
            r.number(obj, "weight", where, None)))

    demands = []
    raw_demands = doc.get("demands", [])
    if not isinstance(raw_demands, list):
        raise InstanceParseError("demands: expected a list")
    for k, raw in enumerate(raw_demands):
        where = f"demands[{k}]"
        obj = r.keys(raw, DEMAND_KEYS, where, required=("origin", "destination"))
        ppr = obj.get("per_period_rates")
        if ppr is not None:
            if not isinstance(ppr, dict):
                raise InstanceParseError(f"{where}.per_period_rates: expected an object")
            ppr = {str(p): r.number(ppr, p, f"{where}.per_period_rates") for p in ppr}
        rate = r.number(obj, "rate", where, 0.0 if ppr is not None else None)
        if rate is None:
            raise InstanceParseError(f"{where}: missing key 'rate'")
        demands.append(Demand(r.string(obj, "origin", where), r.string(obj, "destination", where),
                              rate, ppr))

    periods = doc.get("periods")
    if periods is not None:
        if not isinstance(periods, list) or not all(isinstance(p, str) for p in periods):
            raise InstanceParseError("periods: expected a list of strings")
        periods = tuple(periods)

    inst = Instance(
        nodes=tuple(nodes), links=tuple(links), demands=tuple(demands), periods=periods,
        reactivation_fraction=r.number(options, "delta", "options", 0.0),
        max_reactivations=r.number(options, "eta_on", "options", None, integer=True),
        omega_max=r.number(options, "omega_max", "options", 10.0),
        big_m=r.number(options, "big_m", "options", None),
        name=str(meta.get("name", "instance")),
        flow_unit=str(meta.get("flow_unit", "unit")),
    )
    problems = validate_instance(inst)
    if problems:
        raise InstanceParseError("invalid instance: " + "; ".join(problems))
    return inst


def instance_to_dict(instance: Instance) -> dict:
    """Inverse of :func:`instance_from_dict`; defaults are written out explicitly."""
    def node(n: NodeSpec) -> dict:
        out = {"id": n.id, "fixed_power": n.fixed_power, "per_unit_power": n.per_unit_power}
        if n.piecewise is not None:
            out["piecewise"] = [list(p) for p in n.piecewise]
        return out

    def link(l: LinkSpec) -> dict:
        out = {"from": l.source, "to": l.target, "card_capacity": l.card_capacity,
               "num_cards": l.num_cards, "max_utilization": l.max_utilization,
               "fixed_power": l.fixed_power, "per_unit_power": l.per_unit_power}
        if l.piecewise is not None:
            out["piecewise"] = [list(p) for p in l.piecewise]
        if l.rate_configs is not None:
            out["rate_configs"] = [{"capacity": rc.capacity, "power": rc.power}
                                   for rc in l.rate_configs]
        if l.weight is not None:
            out["weight"] = l.weight
        return out

    def demand(d: Demand) -> dict:
        out = {"origin": d.origin, "destination": d.destination, "rate": d.rate}
        if d.per_period_rates is not None:
            out["per_period_rates"] = dict(d.per_period_rates)
        return out

    options = {"delta": instance.reactivation_fraction, "omega_max": instance.omega_max}
    if instance.max_reactivations is not None:
        options["eta_on"] = instance.max_reactivations
    if instance.big_m is not None:
        options["big_m"] = instance.big_m
    doc = {"meta": {"name": instance.name, "flow_unit": instance.flow_unit},
           "nodes": [node(n) for n in instance.nodes],
           "links": [link(l) for l in instance.links],
           "demands": [demand(d) for d in instance.demands]}
    if instance.periods is not None:
        doc["periods"] = list(instance.periods)
    doc["options"] = options
    return doc


def loads_instance(text: str, lenient: bool = False) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return instance_from_dict(data, lenient)


def load_instance(path, lenient: bool = False) -> Instance:
    with open(path) as fh:
        return loads_instance(fh.read(), lenient)


def dumps_instance(instance: Instance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


def save_instance(instance: Instance, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_instance(instance))
