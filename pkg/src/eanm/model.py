"""Network instances: nodes, links, demands and device power profiles.

Arcs are directed and identified by ``(from, to)`` node-id pairs. All flow
quantities are dimensionless flow units; ``Instance.flow_unit`` is metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

Arc = tuple[str, str]

LOAD_TOL = 1e-9


class InconsistentStateError(ValueError):
    """A device is asleep but asked to carry load, or its state is out of range."""


@dataclass(frozen=True)
class RateConfig:
    capacity: float
    power: float


@dataclass(frozen=True)
class NodeSpec:
    id: str
    fixed_power: float = 0.0
    per_unit_power: float = 0.0
    # (breakpoint, slope) pairs; slope applies from its breakpoint up to the next one
    piecewise: Optional[tuple[tuple[float, float], ...]] = None


@dataclass(frozen=True)
class LinkSpec:
    source: str
    target: str
    card_capacity: float
    num_cards: int = 1
    max_utilization: float = 1.0
    fixed_power: float = 0.0
    per_unit_power: float = 0.0
    piecewise: Optional[tuple[tuple[float, float], ...]] = None
    rate_configs: Optional[tuple[RateConfig, ...]] = None
    weight: Optional[float] = None

    @property
    def arc(self) -> Arc:
        return (self.source, self.target)

    @property
    def full_capacity(self) -> float:
        """Usable capacity with every card (or the largest configuration) on."""
        if self.rate_configs:
            return self.max_utilization * max(rc.capacity for rc in self.rate_configs)
        return self.max_utilization * self.card_capacity * self.num_cards

    def usable_capacity(self, state: int) -> float:
        """mu * capacity for ``state`` active cards, or for config index ``state`` under ALR."""
        if self.rate_configs:
            return self.max_utilization * self.rate_configs[state].capacity
        return self.max_utilization * self.card_capacity * state

    @property
    def sleep_config(self) -> int:
        for k, rc in enumerate(self.rate_configs or ()):
            if rc.capacity == 0 and rc.power == 0:
                return k
        raise ValueError(f"link {self.source}->{self.target} has no sleep configuration")


@dataclass(frozen=True)
class Demand:
    origin: str
    destination: str
    rate: float
    per_period_rates: Optional[Mapping[str, float]] = None

    def rate_in(self, period: Optional[str]) -> float:
        if period is None:
            return self.rate
        return self.per_period_rates[period]


@dataclass(frozen=True)
class Instance:
    nodes: tuple[NodeSpec, ...]
    links: tuple[LinkSpec, ...]
    demands: tuple[Demand, ...] = ()
    periods: Optional[tuple[str, ...]] = None
    reactivation_fraction: float = 0.0
    max_reactivations: Optional[int] = None
    omega_max: float = 10.0
    big_m: Optional[float] = None
    name: str = "instance"
    flow_unit: str = "unit"
    _node_index: dict = field(init=False, repr=False, compare=False, hash=False)
    _link_index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "demands", tuple(self.demands))
        if self.periods is not None:
            object.__setattr__(self, "periods", tuple(self.periods))
        object.__setattr__(self, "_node_index", {n.id: n for n in self.nodes})
        object.__setattr__(self, "_link_index", {l.arc: l for l in self.links})

    def node(self, node_id: str) -> NodeSpec:
        return self._node_index[node_id]

    def link(self, arc: Arc) -> LinkSpec:
        return self._link_index[tuple(arc)]

    def has_arc(self, arc: Arc) -> bool:
        return tuple(arc) in self._link_index

    @property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    @property
    def arcs(self) -> list[Arc]:
        return [l.arc for l in self.links]

    def out_arcs(self, node_id: str) -> list[Arc]:
        return [l.arc for l in self.links if l.source == node_id]

    def in_arcs(self, node_id: str) -> list[Arc]:
        return [l.arc for l in self.links if l.target == node_id]

    def degree(self, node_id: str) -> int:
        return len(self.out_arcs(node_id)) + len(self.in_arcs(node_id))

    @property
    def multiperiod(self) -> bool:
        return bool(self.periods)

    @property
    def shortest_path_big_m(self) -> float:
        if self.big_m is not None:
            return self.big_m
        return self.omega_max * len(self.nodes)

    @property
    def reactivation_cap(self) -> int:
        if self.max_reactivations is not None:
            return self.max_reactivations
        return len(self.periods or ()) or 1

    def rates(self, period: Optional[str] = None) -> list[float]:
        return [d.rate_in(period) for d in self.demands]

    def for_period(self, period: str) -> "Instance":
        """Single-period copy of the instance using the rates of ``period``."""
        demands = tuple(Demand(d.origin, d.destination, d.rate_in(period)) for d in self.demands)
        return Instance(self.nodes, self.links, demands, None, self.reactivation_fraction,
                        self.max_reactivations, self.omega_max, self.big_m,
                        f"{self.name}@{period}", self.flow_unit)


def _check_profile(owner: str, spec: Union[NodeSpec, LinkSpec], out: list[str]) -> None:
    if spec.fixed_power < 0:
        out.append(f"{owner}: fixed_power must be >= 0")
    if spec.per_unit_power < 0:
        out.append(f"{owner}: per_unit_power must be >= 0")
    if spec.piecewise is None:
        return
    pts = list(spec.piecewise)
    if not pts:
        out.append(f"{owner}: piecewise profile must not be empty")
        return
    if pts[0][0] != 0:
        out.append(f"{owner}: piecewise profile must start at breakpoint 0")
    for (b0, s0), (b1, s1) in zip(pts, pts[1:]):
        if not b1 > b0:
            out.append(f"{owner}: piecewise breakpoints must be strictly increasing")
            break
        if s1 < s0:
            out.append(f"{owner}: piecewise slopes must be non-decreasing (convex profile)")
            break
    if any(s < 0 for _, s in pts):
        out.append(f"{owner}: piecewise slopes must be >= 0")


def validate_instance(instance: Instance) -> list[str]:
    """Return a description of every violated invariant; empty when the instance is valid."""
    out: list[str] = []
    ids = [n.id for n in instance.nodes]
    if len(set(ids)) != len(ids):
        out.append("nodes: duplicate node ids")
    known = set(ids)
    for n in instance.nodes:
        _check_profile(f"node {n.id}", n, out)

    seen: set[Arc] = set()
    for link in instance.links:
        name = f"link {link.source}->{link.target}"
        if link.source not in known or link.target not in known:
            out.append(f"{name}: endpoint is not a known node")
        if link.source == link.target:
            out.append(f"{name}: self-loop")
        if link.arc in seen:
            out.append(f"{name}: duplicate arc")
        seen.add(link.arc)
        if link.card_capacity < 0:
            out.append(f"{name}: card_capacity must be >= 0")
        if int(link.num_cards) != link.num_cards or link.num_cards < 1:
            out.append(f"{name}: num_cards must be a positive integer")
        if not 0 < link.max_utilization <= 1:
            out.append(f"{name}: max_utilization must lie in (0, 1]")
        if link.weight is not None and not link.weight > 0:
            out.append(f"{name}: weight must be positive")
        _check_profile(name, link, out)
        if link.rate_configs is not None:
            cfgs = list(link.rate_configs)
            if any(rc.capacity < 0 or rc.power < 0 for rc in cfgs):
                out.append(f"{name}: rate_configs capacity and power must be >= 0")
            if sum(1 for rc in cfgs if rc.capacity == 0 and rc.power == 0) != 1:
                out.append(f"{name}: rate_configs must contain exactly one sleep configuration "
                           "(capacity 0, power 0)")
            if any(b.capacity <= a.capacity for a, b in zip(cfgs, cfgs[1:])):
                out.append(f"{name}: rate_configs must be sorted by strictly increasing capacity")

    for k, d in enumerate(instance.demands):
        if d.origin == d.destination:
            out.append(f"demand {k}: origin equals destination")
        if d.origin not in known or d.destination not in known:
            out.append(f"demand {k}: endpoint is not a known node")
        if d.rate < 0:
            out.append(f"demand {k}: rate must be >= 0")
        if instance.periods:
            rates = d.per_period_rates or {}
            missing = [p for p in instance.periods if p not in rates]
            if missing:
                out.append(f"demand {k}: per_period_rates missing periods {missing}")
            if any(v < 0 for v in rates.values()):
                out.append(f"demand {k}: per-period rates must be >= 0")

    if instance.periods is not None and len(set(instance.periods)) != len(instance.periods):
        out.append("periods: duplicate period ids")
    if not 0 <= instance.reactivation_fraction <= 1:
        out.append("options: reactivation_fraction (delta) must lie in [0, 1]")
    eta = instance.max_reactivations
    if eta is not None and (int(eta) != eta or eta < 1):
        out.append("options: max_reactivations (eta_on) must be a positive integer")
    if not instance.omega_max >= 1:
        out.append("options: omega_max must be >= 1")
    if instance.big_m is not None and not instance.big_m > 0:
        out.append("options: big_m must be positive")
    return out


def _load_term(spec: Union[NodeSpec, LinkSpec], load: float) -> float:
    if spec.piecewise is None:
        return spec.per_unit_power * load
    pts = list(spec.piecewise)
    total = 0.0
    for k, (start, slope) in enumerate(pts):
        end = pts[k + 1][0] if k + 1 < len(pts) else math.inf
        if load <= start:
            break
        total += slope * (min(load, end) - start)
    return total


def evaluate_power(spec: Union[NodeSpec, LinkSpec], load: float, state: int) -> float:
    """Power drawn by a device carrying ``load`` in ``state``.

    ``state`` is 0/1 for a node, the number of active cards for a link, or the
    configuration index for a link with ``rate_configs``.
    """
    if load < -LOAD_TOL:
        raise ValueError("load must be non-negative")
    load = max(load, 0.0)
    if isinstance(spec, LinkSpec) and spec.rate_configs:
        if not 0 <= state < len(spec.rate_configs):
            raise InconsistentStateError(f"config index {state} not in E for {spec.arc}")
        if spec.rate_configs[state].capacity == 0 and load > LOAD_TOL:
            raise InconsistentStateError(f"link {spec.arc} is asleep but carries load {load}")
        return spec.rate_configs[state].power
    limit = spec.num_cards if isinstance(spec, LinkSpec) else 1
    if not 0 <= state <= limit:
        raise InconsistentStateError(f"state {state} out of range for {spec}")
    if state == 0:
        if load > LOAD_TOL:
            who = spec.arc if isinstance(spec, LinkSpec) else spec.id
            raise InconsistentStateError(f"device {who} is asleep but carries load {load}")
        return 0.0
    return spec.fixed_power * state + _load_term(spec, load)


def aggregate_per_source(instance: Instance,
                         rates: Optional[Sequence[float]] = None) -> dict[str, tuple[float, dict[str, float]]]:
    """Total emitted rate and per-destination rates for each traffic source."""
    rates = instance.rates() if rates is None else rates
    out: dict[str, tuple[float, dict[str, float]]] = {}
    for d, r in zip(instance.demands, rates):
        total, per_dest = out.get(d.origin, (0.0, {}))
        per_dest[d.destination] = per_dest.get(d.destination, 0.0) + r
        out[d.origin] = (total + r, per_dest)
    return out


def node_loads(instance: Instance, arc_loads: Mapping[Arc, float],
               rates: Optional[Sequence[float]] = None) -> dict[str, float]:
    """Entering flow plus locally originated traffic for every node."""
    rates = instance.rates() if rates is None else rates
    out = {n: 0.0 for n in instance.node_ids}
    for (i, j), f in arc_loads.items():
        out[j] += f
    for d, r in zip(instance.demands, rates):
        out[d.origin] += r
    return out


def epigraph_segments(spec: Union[NodeSpec, LinkSpec]) -> list[tuple[float, float]]:
    """(intercept, slope) lines whose maximum equals the load term of a convex profile."""
    if spec.piecewise is None:
        return [(0.0, spec.per_unit_power)]
    out = []
    acc = 0.0
    pts = list(spec.piecewise)
    for k, (start, slope) in enumerate(pts):
        out.append((acc - slope * start, slope))
        if k + 1 < len(pts):
            acc += slope * (pts[k + 1][0] - start)
    return out
