"""MILP builders for the energy-aware network management model family.

Every builder returns the model together with a :class:`SymbolMap` that ties
each column back to the decision it represents (arc flow, card state, ...).
Column names are ``family[key,...]``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .lp import EQ, GE, LE, LinearProgram
from .milp import MilpModel, MilpSolution
from .model import Arc, Instance, aggregate_per_source, epigraph_segments, validate_instance
from .routing import decompose_source_flows
from .solution import PeriodState, Solution
from .variants import (PER_FLOW, PER_PATH, PER_SOURCE, SINGLE_PATH, SLEEP, EnergyOptions,
                       ProtectionMode, RoutingScheme, Variant)

__all__ = [
    "SymbolMap", "RoutingScheme", "EnergyOptions", "ProtectionMode", "Variant",
    "build_routing_model", "build_energy_model", "build_protection_model",
    "build_multiperiod_model", "build_sp_ecmp_model", "build_model", "extract_solution",
]

# symbol families and what they hold
FAMILIES = {
    "f": "total flow on an arc",
    "f_node": "total flow through a node",
    "f_dem": "flow of one demand on an arc",
    "f_src": "flow generated by one source on an arc",
    "x": "arc used by a demand's path (binary), or fraction of the demand on the arc",
    "x_path": "fraction of a demand on a candidate path",
    "w": "link state: on/off or number of active cards",
    "w_cfg": "link operated in a rate configuration",
    "y": "node on/off",
    "xi": "arc used by a demand's backup path",
    "g": "demand rerouted on an arc when another arc fails",
    "wp": "link carrying primary traffic (smart protection)",
    "yp": "node carrying primary traffic (smart protection)",
    "z_react": "reactivation energy of a node at a period start",
    "u_card": "card reactivated at a period start",
    "u_sp": "arc on a shortest path toward a destination",
    "z_ecmp": "per-interface flow toward a destination",
    "l": "distance to a destination",
    "omega": "link weight",
    "cost": "epigraph of a piecewise-linear power term",
}


class SymbolMap:
    def __init__(self):
        self.families: dict[str, dict[tuple, str]] = {}
        self._owner: dict[str, str] = {}

    def add(self, family: str, key: tuple, column: str) -> None:
        if family not in FAMILIES:
            raise KeyError(f"unknown symbol family {family!r}")
        if column in self._owner:
            raise ValueError(f"column {column} already belongs to {self._owner[column]}")
        self.families.setdefault(family, {})[key] = column
        self._owner[column] = family

    def __getitem__(self, family: str) -> dict[tuple, str]:
        return self.families.get(family, {})

    def __contains__(self, family: str) -> bool:
        return family in self.families

    def get(self, family: str, key: tuple) -> Optional[str]:
        return self.families.get(family, {}).get(key)

    def family_of(self, column: str) -> str:
        return self._owner[column]

    def columns(self) -> set[str]:
        return set(self._owner)


def _key(*parts) -> str:
    out = []
    for p in parts:
        if isinstance(p, tuple):
            out.extend(str(x) for x in p)
        else:
            out.append(str(p))
    return ",".join(out)


class _Builder:
    def __init__(self, instance: Instance, name: str):
        self.inst = instance
        self.model = MilpModel(LinearProgram(name=name))
        self.sym = SymbolMap()

    @property
    def lp(self) -> LinearProgram:
        return self.model.lp

    def var(self, family: str, key: tuple, lower: float = 0.0, upper: float = math.inf,
            cost: float = 0.0, integer: bool = False) -> str:
        name = f"{family}[{_key(*key)}]"
        if integer:
            self.model.add_integer(name, lower, upper, cost)
        else:
            self.lp.add_variable(name, lower, upper, cost)
        self.sym.add(family, key, name)
        return name

    def row(self, name: str, coeffs, sense: str, rhs: float) -> str:
        return self.lp.add_row(name, coeffs, sense, rhs)


def _check(instance: Instance) -> None:
    problems = validate_instance(instance)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(problems))


def _pfx(period: Optional[str]) -> tuple:
    return () if period is None else (period,)


def _check_paths(instance: Instance, scheme: RoutingScheme) -> None:
    for k, d in enumerate(instance.demands):
        paths = scheme.paths.get(k)
        if not paths:
            raise ValueError(f"per_path routing: no candidate paths for demand {k}")
        for p in paths:
            nodes = [p[0][0]] + [a[1] for a in p]
            ok = (p[0][0] == d.origin and p[-1][1] == d.destination
                  and all(p[m][1] == p[m + 1][0] for m in range(len(p) - 1))
                  and all(instance.has_arc(a) for a in p) and len(set(nodes)) == len(nodes))
            if not ok:
                raise ValueError(f"per_path routing: path {list(p)} does not connect "
                                 f"{d.origin} to {d.destination} simply")


def _balance(inst: Instance, i: str, origin: str, dest: str, amount: float) -> float:
    if i == origin:
        return amount
    if i == dest:
        return -amount
    return 0.0


def _add_routing(b: _Builder, scheme: RoutingScheme, rates_by_period: dict,
                 shared: bool) -> dict:
    """Routing variables and dimensioning rows; returns period -> arc -> load column."""
    inst = b.inst
    arcs = inst.arcs
    loads: dict = {}
    if scheme.kind == PER_PATH:
        _check_paths(inst, scheme)

    def unit_routing(pf: tuple) -> dict[int, list[tuple[Arc, str]]]:
        """Variables describing each demand's route as fractions of its rate."""
        terms: dict[int, list[tuple[Arc, str]]] = {}
        for k, d in enumerate(inst.demands):
            if scheme.kind == PER_PATH:
                cols = []
                for p_idx, path in enumerate(scheme.paths[k]):
                    c = b.var("x_path", pf + (k, p_idx), 0.0, 1.0, integer=scheme.binary)
                    cols.append(c)
                    terms.setdefault(k, []).extend((a, c) for a in path)
                b.row(f"pick[{_key(*pf, k)}]", [(c, 1.0) for c in cols], EQ, 1.0)
                continue
            binary = scheme.kind == SINGLE_PATH
            xs = {a: b.var("x", pf + (k,) + a, 0.0, 1.0, integer=binary) for a in arcs}
            for i in inst.node_ids:
                coeffs = [(xs[a], 1.0) for a in inst.out_arcs(i)]
                coeffs += [(xs[a], -1.0) for a in inst.in_arcs(i)]
                b.row(f"bal_x[{_key(*pf, k, i)}]", coeffs, EQ,
                      _balance(inst, i, d.origin, d.destination, 1.0))
            terms[k] = list(xs.items())
        return terms

    if shared:
        if scheme.kind == PER_SOURCE:
            raise ValueError("per_source routing cannot be fixed across periods")
        terms = unit_routing(())
    for period, rates in rates_by_period.items():
        pf = _pfx(period)
        f = {a: b.var("f", pf + a) for a in arcs}
        loads[period] = f
        if shared or scheme.kind in (PER_PATH, SINGLE_PATH):
            t = terms if shared else unit_routing(pf)
            per_arc: dict[Arc, list[tuple[str, float]]] = {a: [] for a in arcs}
            for k, items in t.items():
                for a, c in items:
                    per_arc[a].append((c, rates[k]))
            for a in arcs:
                b.row(f"dim[{_key(*pf, a)}]", per_arc[a] + [(f[a], -1.0)], EQ, 0.0)
        elif scheme.kind == PER_FLOW:
            fd = {(k, a): b.var("f_dem", pf + (k,) + a)
                  for k in range(len(inst.demands)) for a in arcs}
            for k, d in enumerate(inst.demands):
                for i in inst.node_ids:
                    coeffs = [(fd[k, a], 1.0) for a in inst.out_arcs(i)]
                    coeffs += [(fd[k, a], -1.0) for a in inst.in_arcs(i)]
                    b.row(f"bal[{_key(*pf, k, i)}]", coeffs, EQ,
                          _balance(inst, i, d.origin, d.destination, rates[k]))
            for a in arcs:
                coeffs = [(fd[k, a], 1.0) for k in range(len(inst.demands))]
                b.row(f"total[{_key(*pf, a)}]", coeffs + [(f[a], -1.0)], EQ, 0.0)
        else:  # per_source
            sources = aggregate_per_source(inst, rates)
            fs = {(s, a): b.var("f_src", pf + (s,) + a) for s in sources for a in arcs}
            for s, (total, per_dest) in sources.items():
                for i in inst.node_ids:
                    coeffs = [(fs[s, a], 1.0) for a in inst.out_arcs(i)]
                    coeffs += [(fs[s, a], -1.0) for a in inst.in_arcs(i)]
                    rhs = total if i == s else -per_dest.get(i, 0.0)
                    b.row(f"bal_src[{_key(*pf, s, i)}]", coeffs, EQ, rhs)
            for a in arcs:
                coeffs = [(fs[s, a], 1.0) for s in sources]
                b.row(f"total[{_key(*pf, a)}]", coeffs + [(f[a], -1.0)], EQ, 0.0)
    return loads


def _add_node_flows(b: _Builder, period: Optional[str], f: dict[Arc, str],
                    rates: Sequence[float]) -> dict[str, str]:
    inst = b.inst
    pf = _pfx(period)
    originated = {n: 0.0 for n in inst.node_ids}
    for d, r in zip(inst.demands, rates):
        originated[d.origin] += r
    out = {}
    for n in inst.node_ids:
        fn = b.var("f_node", pf + (n,))
        coeffs = [(fn, 1.0)] + [(f[a], -1.0) for a in inst.in_arcs(n)]
        b.row(f"node_flow[{_key(*pf, n)}]", coeffs, EQ, originated[n])
        out[n] = fn
    return out


def _add_power_term(b: _Builder, spec, key: tuple, expr: list[tuple[str, float]],
                    const: float = 0.0) -> None:
    """Add the load-dependent power of ``spec`` evaluated at ``expr + const``."""
    if spec.piecewise is None:
        slope = spec.per_unit_power
        if slope:
            for c, a in expr:
                b.lp.add_cost(c, slope * a)
            b.lp.offset += slope * const
        return
    p = b.var("cost", key, cost=1.0)
    for k, (icpt, slope) in enumerate(epigraph_segments(spec)):
        b.row(f"epi[{_key(*key, k)}]", [(p, 1.0)] + [(c, -slope * a) for c, a in expr],
              GE, icpt + slope * const)


def _add_load_costs(b: _Builder, period, f, fn, links: bool = True) -> None:
    pf = _pfx(period)
    if links:
        for link in b.inst.links:
            if not link.rate_configs:
                _add_power_term(b, link, pf + link.arc, [(f[link.arc], 1.0)])
    for node in b.inst.nodes:
        _add_power_term(b, node, pf + (node.id,), [(fn[node.id], 1.0)])


def _add_devices(b: _Builder, period: Optional[str], f: dict[Arc, str],
                 options: EnergyOptions, cap_rows: bool = True) -> tuple[dict, dict]:
    """Node and link state variables, state-dependent capacity and coherence rows.

    Returns ``(w_expr, y)`` where ``w_expr[arc]`` is the linear expression of the
    link activity used in coherence rows.
    """
    inst = b.inst
    pf = _pfx(period)
    y = {}
    for node in inst.nodes:
        lo = 0.0 if options.sleep_nodes else 1.0
        y[node.id] = b.var("y", pf + (node.id,), lo, 1.0, cost=node.fixed_power, integer=True)
    w_expr: dict[Arc, list[tuple[str, float]]] = {}
    w_max: dict[Arc, float] = {}
    for link in inst.links:
        a = link.arc
        if options.alr:
            if not link.rate_configs:
                raise ValueError(f"alr option needs rate_configs on link {a}")
            cols = []
            for e, rc in enumerate(link.rate_configs):
                hi = 0.0 if (not options.sleep_links and rc.capacity == 0) else 1.0
                cols.append(b.var("w_cfg", pf + a + (e,), 0.0, hi, cost=rc.power, integer=True))
            b.row(f"one_cfg[{_key(*pf, a)}]", [(c, 1.0) for c in cols], EQ, 1.0)
            if cap_rows:
                cap = [(c, -link.max_utilization * rc.capacity)
                       for c, rc in zip(cols, link.rate_configs)]
                b.row(f"cap[{_key(*pf, a)}]", [(f[a], 1.0)] + cap, LE, 0.0)
            w_expr[a] = [(c, 1.0) for c, rc in zip(cols, link.rate_configs) if rc.capacity != 0]
            w_max[a] = 1.0
        elif link.rate_configs:
            raise ValueError(f"link {a} has rate_configs; use the alr option")
        elif options.bundled:
            lo = link.num_cards if not options.sleep_links else 0
            w = b.var("w", pf + a, lo, link.num_cards, cost=link.fixed_power, integer=True)
            if cap_rows:
                b.row(f"cap[{_key(*pf, a)}]",
                      [(f[a], 1.0), (w, -link.max_utilization * link.card_capacity)], LE, 0.0)
            w_expr[a] = [(w, 1.0)]
            w_max[a] = float(link.num_cards)
        else:
            lo = 0.0 if options.sleep_links else 1.0
            w = b.var("w", pf + a, lo, 1.0, cost=link.fixed_power * link.num_cards, integer=True)
            if cap_rows:
                b.row(f"cap[{_key(*pf, a)}]",
                      [(f[a], 1.0), (w, -link.max_utilization * link.card_capacity
                                     * link.num_cards)], LE, 0.0)
            w_expr[a] = [(w, 1.0)]
            w_max[a] = 1.0
    _add_coherence(b, pf, w_expr, w_max, y, options.use_big_m_coherence)
    return w_expr, y


def _add_coherence(b, pf, w_expr, w_max, y, big_m: bool, tag: str = "coh") -> None:
    inst = b.inst
    if big_m:
        for n in inst.node_ids:
            incident = inst.out_arcs(n) + inst.in_arcs(n)
            if not incident:
                continue
            M = sum(w_max[a] for a in incident)
            coeffs = [term for a in incident for term in w_expr[a]]
            b.row(f"{tag}_bigm[{_key(*pf, n)}]", coeffs + [(y[n], -M)], LE, 0.0)
        return
    for a, expr in w_expr.items():
        for side, n in (("src", a[0]), ("dst", a[1])):
            b.row(f"{tag}_{side}[{_key(*pf, a)}]", expr + [(y[n], -w_max[a])], LE, 0.0)


def _top_config(link) -> int:
    caps = [rc.capacity for rc in link.rate_configs]
    return caps.index(max(caps))


def build_routing_model(instance: Instance, scheme: RoutingScheme = RoutingScheme(),
                        linear_costs_only: bool = False) -> tuple[MilpModel, SymbolMap]:
    """Routing with every device on; pure LP unless the scheme is unsplittable.

    With ``linear_costs_only`` the node accounting is dropped and the objective
    is the per-unit link cost alone (a multicommodity flow problem).
    """
    _check(instance)
    b = _Builder(instance, "routing")
    rates = instance.rates()
    f = _add_routing(b, scheme, {None: rates}, shared=False)[None]
    for link in instance.links:
        cap = link.full_capacity
        b.row(f"cap[{_key(link.arc)}]", [(f[link.arc], 1.0)], LE, cap)
    if linear_costs_only:
        for link in instance.links:
            if link.piecewise is not None:
                raise ValueError("linear_costs_only does not accept piecewise link profiles")
            if link.per_unit_power:
                b.lp.add_cost(f[link.arc], link.per_unit_power)
        return b.model, b.sym
    fn = _add_node_flows(b, None, f, rates)
    _add_load_costs(b, None, f, fn)
    b.lp.offset += sum(n.fixed_power for n in instance.nodes)
    for link in instance.links:
        if link.rate_configs:
            b.lp.offset += link.rate_configs[_top_config(link)].power
        else:
            b.lp.offset += link.fixed_power * link.num_cards
    return b.model, b.sym


def build_energy_model(instance: Instance, scheme: RoutingScheme = RoutingScheme(),
                       options: EnergyOptions = SLEEP) -> tuple[MilpModel, SymbolMap]:
    """Routing plus sleepable devices: minimizes the power of the active devices."""
    _check(instance)
    b = _Builder(instance, "energy")
    rates = instance.rates()
    f = _add_routing(b, scheme, {None: rates}, shared=False)[None]
    fn = _add_node_flows(b, None, f, rates)
    _add_devices(b, None, f, options)
    _add_load_costs(b, None, f, fn)
    return b.model, b.sym


def build_protection_model(instance: Instance, mode: ProtectionMode,
                           options: EnergyOptions = SLEEP) -> tuple[MilpModel, SymbolMap]:
    """Single-path routing with a link-disjoint backup path per demand.

    Dedicated protection reserves primary plus backup bandwidth. Shared
    protection reserves, on each arc, the worst load over single-arc failures.
    Smart variants charge only devices that carry primary traffic.
    """
    mode = ProtectionMode(mode)
    if mode == ProtectionMode.NONE:
        raise ValueError("protection mode must not be 'none'")
    if options.bundled or options.alr:
        raise ValueError("protection is defined for on/off links only")
    _check(instance)
    inst = instance
    b = _Builder(instance, "protect")
    arcs = inst.arcs
    D = range(len(inst.demands))
    rates = inst.rates()
    x = {(k, a): b.var("x", (k,) + a, 0.0, 1.0, integer=True) for k in D for a in arcs}
    xi = {(k, a): b.var("xi", (k,) + a, 0.0, 1.0, integer=True) for k in D for a in arcs}
    for k, d in enumerate(inst.demands):
        for i in inst.node_ids:
            for fam, v in (("x", x), ("xi", xi)):
                coeffs = [(v[k, a], 1.0) for a in inst.out_arcs(i)]
                coeffs += [(v[k, a], -1.0) for a in inst.in_arcs(i)]
                b.row(f"bal_{fam}[{_key(k, i)}]", coeffs, EQ,
                      _balance(inst, i, d.origin, d.destination, 1.0))
        for a in arcs:
            b.row(f"disj[{_key(k, a)}]", [(x[k, a], 1.0), (xi[k, a], 1.0)], LE, 1.0)
            rev = (a[1], a[0])
            if inst.has_arc(rev):
                b.row(f"disj_rev[{_key(k, a)}]", [(x[k, a], 1.0), (xi[k, rev], 1.0)], LE, 1.0)
    f = {a: b.var("f", a) for a in arcs}
    if not mode.shared:
        for a in arcs:
            coeffs = [(x[k, a], rates[k]) for k in D] + [(xi[k, a], rates[k]) for k in D]
            b.row(f"dim[{_key(a)}]", coeffs + [(f[a], -1.0)], EQ, 0.0)
    else:
        g = {}
        for k in D:
            for a in arcs:
                for c in arcs:
                    if c == a or c == (a[1], a[0]):
                        continue
                    # primary on a, backup on c
                    g[k, a, c] = b.var("g", (k,) + a + c, 0.0, 1.0)
                    b.row(f"link_g[{_key(k, a, c)}]",
                          [(g[k, a, c], 1.0), (x[k, a], -1.0), (xi[k, c], -1.0)], GE, -1.0)
        for a in arcs:
            for c in arcs:
                coeffs = [(x[k, a], rates[k]) for k in D]
                coeffs += [(g[k, c, a], rates[k]) for k in D if (k, c, a) in g]
                b.row(f"fail[{_key(a, c)}]", coeffs + [(f[a], -1.0)], LE, 0.0)
    fn = _add_node_flows(b, None, f, rates)
    w_expr, y = _add_devices(b, None, f, options)
    # a path through an arc needs the arc on; implied at integer points, tightens the relaxation
    for (k, a), col in list(x.items()) + list(xi.items()):
        b.row(f"use_{col.split('[')[0]}[{_key(k, a)}]", [(col, 1.0), (w_expr[a][0][0], -1.0)],
              LE, 0.0)
    if not mode.smart:
        _add_load_costs(b, None, f, fn)
        return b.model, b.sym

    # smart: physical states keep all rows, the objective moves to primary-only states
    for col in list(y.values()) + list(b.sym["w"].values()):
        b.lp.variable(col).cost = 0.0
    lo = 0.0 if options.sleep_nodes else 1.0
    yp = {n.id: b.var("yp", (n.id,), lo, 1.0, cost=n.fixed_power, integer=True)
          for n in inst.nodes}
    wp_expr, wp_max = {}, {}
    for link in inst.links:
        a = link.arc
        wp = b.var("wp", a, 0.0 if options.sleep_links else 1.0, 1.0,
                   cost=link.fixed_power * link.num_cards, integer=True)
        coeffs = [(x[k, a], rates[k]) for k in D]
        b.row(f"cap_primary[{_key(a)}]",
              coeffs + [(wp, -link.max_utilization * link.card_capacity * link.num_cards)],
              LE, 0.0)
        for k in D:
            b.row(f"use_primary[{_key(k, a)}]", [(x[k, a], 1.0), (wp, -1.0)], LE, 0.0)
        wp_expr[a] = [(wp, 1.0)]
        wp_max[a] = 1.0
    _add_coherence(b, (), wp_expr, wp_max, yp, options.use_big_m_coherence, tag="coh_primary")
    originated = {n: 0.0 for n in inst.node_ids}
    for d, r in zip(inst.demands, rates):
        originated[d.origin] += r
    for link in inst.links:
        _add_power_term(b, link, link.arc, [(x[k, link.arc], rates[k]) for k in D])
    for node in inst.nodes:
        expr = [(x[k, a], rates[k]) for a in inst.in_arcs(node.id) for k in D]
        _add_power_term(b, node, (node.id,), expr, originated[node.id])
    return b.model, b.sym


def build_multiperiod_model(instance: Instance, scheme: RoutingScheme = RoutingScheme(),
                            options: EnergyOptions = SLEEP,
                            fixed_routing: bool = False) -> tuple[MilpModel, SymbolMap]:
    """Per-period copies of the energy model tied by reactivation costs and limits.

    Period transitions are cyclic: the first period follows the last one.
    """
    _check(instance)
    if not instance.periods:
        raise ValueError("multi-period model needs instance.periods")
    inst = instance
    periods = list(inst.periods)
    b = _Builder(inst, "multi")
    rates = {p: inst.rates(p) for p in periods}
    loads = _add_routing(b, scheme, rates, shared=fixed_routing)
    w_expr, y = {}, {}
    for p in periods:
        fn = _add_node_flows(b, p, loads[p], rates[p])
        w_expr[p], y[p] = _add_devices(b, p, loads[p], options)
        _add_load_costs(b, p, loads[p], fn)
    delta = inst.reactivation_fraction
    for s, p in enumerate(periods):
        prev = periods[s - 1]
        for node in inst.nodes:
            z = b.var("z_react", (p, node.id), cost=1.0)
            k = delta * node.fixed_power
            b.row(f"react[{_key(p, node.id)}]", [(z, 1.0), (y[p][node.id], -k),
                                                 (y[prev][node.id], k)], GE, 0.0)
    eta = inst.reactivation_cap
    for link in inst.links:
        a = link.arc
        units = link.num_cards if options.bundled else 1
        u = {(p, k): b.var("u_card", (p,) + a + (k,), 0.0, 1.0, integer=True)
             for p in periods for k in range(1, units + 1)}
        for s, p in enumerate(periods):
            prev = periods[s - 1]
            coeffs = [(u[p, k], 1.0) for k in range(1, units + 1)]
            coeffs += [(c, -v) for c, v in w_expr[p][a]]
            coeffs += [(c, v) for c, v in w_expr[prev][a]]
            b.row(f"wake[{_key(p, a)}]", coeffs, GE, 0.0)
        for k in range(1, units + 1):
            b.row(f"wake_cap[{_key(a, k)}]", [(u[p, k], 1.0) for p in periods], LE, eta)
    return b.model, b.sym


def _longest_simple_path_hops(instance: Instance, cap: int = 12) -> int:
    n = len(instance.nodes)
    if n > cap:
        return n - 1
    adj = {v: [a[1] for a in instance.out_arcs(v)] for v in instance.node_ids}
    best = 0

    def walk(v, seen, hops):
        nonlocal best
        best = max(best, hops)
        for j in adj[v]:
            if j not in seen:
                seen.add(j)
                walk(j, seen, hops + 1)
                seen.discard(j)

    for v in instance.node_ids:
        walk(v, {v}, 0)
    return best


def build_sp_ecmp_model(instance: Instance,
                        options: EnergyOptions = SLEEP) -> tuple[MilpModel, SymbolMap]:
    """Energy model whose routing must be ECMP over optimized link weights."""
    _check(instance)
    if options.bundled or options.alr:
        raise ValueError("shortest-path model uses on/off links")
    inst = instance
    M = inst.shortest_path_big_m
    wmax = inst.omega_max
    need = wmax * _longest_simple_path_hops(inst)
    if M < need:
        warnings.warn(f"big_m={M} is below omega_max * longest simple path = {need}; "
                      "optimal solutions may be cut off", RuntimeWarning, stacklevel=2)
    b = _Builder(inst, "ecmp")
    rates = inst.rates()
    f = _add_routing(b, RoutingScheme(PER_FLOW), {None: rates}, shared=False)[None]
    fn = _add_node_flows(b, None, f, rates)
    w_expr, _ = _add_devices(b, None, f, options)
    _add_load_costs(b, None, f, fn)
    fd = b.sym["f_dem"]
    omega = {}
    for link in inst.links:
        a = link.arc
        omega[a] = b.var("omega", a, 1.0, wmax)
        w = w_expr[a][0][0]
        b.row(f"sleep_weight[{_key(a)}]", [(omega[a], 1.0), (w, wmax)], GE, wmax)
    dests = sorted({d.destination for d in inst.demands})
    for t in dests:
        ks = [k for k, d in enumerate(inst.demands) if d.destination == t]
        R = sum(rates[k] for k in ks)
        lvar = {n: b.var("l", (t, n)) for n in inst.node_ids}
        zvar = {n: b.var("z_ecmp", (t, n)) for n in inst.node_ids}
        for link in inst.links:
            a = link.arc
            i, j = a
            u = b.var("u_sp", (t,) + a, 0.0, 1.0, integer=True)
            F = [(fd[(k,) + a], 1.0) for k in ks]
            negF = [(c, -v) for c, v in F]
            b.row(f"ecmp_lo[{_key(t, a)}]", [(zvar[i], 1.0)] + negF, GE, 0.0)
            b.row(f"ecmp_hi[{_key(t, a)}]", [(zvar[i], 1.0)] + negF + [(u, R)], LE, R)
            b.row(f"sp_only[{_key(t, a)}]", F + [(u, -R)], LE, 0.0)
            dist = [(lvar[j], 1.0), (omega[a], 1.0), (lvar[i], -1.0)]
            b.row(f"dist_lo[{_key(t, a)}]", dist, GE, 0.0)
            b.row(f"dist_hi[{_key(t, a)}]", dist + [(u, M)], LE, M)
            b.row(f"dist_gap[{_key(t, a)}]", dist + [(u, 1.0)], GE, 1.0)
            b.row(f"sp_active[{_key(t, a)}]", [(u, 1.0), (w_expr[a][0][0], -1.0)], LE, 0.0)
    return b.model, b.sym


def build_model(instance: Instance, variant: Variant) -> tuple[MilpModel, SymbolMap]:
    """Dispatch to the builder for ``variant``."""
    energy = variant.energy
    if variant.shortest_path:
        return build_sp_ecmp_model(instance, energy or SLEEP)
    if variant.protection != ProtectionMode.NONE:
        return build_protection_model(instance, variant.protection, energy or SLEEP)
    if variant.multiperiod:
        return build_multiperiod_model(instance, variant.scheme, energy or SLEEP,
                                       variant.fixed_routing)
    if energy is None:
        return build_routing_model(instance, variant.scheme)
    return build_energy_model(instance, variant.scheme, energy)


# ------------------------------------------------------------ solution read-back

def _trace(inst: Instance, origin: str, dest: str, used: Mapping[Arc, float]) -> list[Arc]:
    """Simple origin-destination path over the used arcs, skipping any free-standing cycles.

    Smart protection does not charge backup arcs, so an optimal backup may
    carry extra cycles; depth-first search in sorted arc order steps past them.
    """
    path, seen = [], {origin}
    stack = [iter(sorted(a for a in inst.out_arcs(origin) if used.get(a, 0.0) > 0.5))]
    while stack:
        a = next(stack[-1], None)
        if a is None:
            stack.pop()
            if path:
                seen.discard(path.pop()[1])
            continue
        if a[1] in seen:
            continue
        path.append(a)
        if a[1] == dest:
            return path
        seen.add(a[1])
        stack.append(iter(sorted(b for b in inst.out_arcs(a[1]) if used.get(b, 0.0) > 0.5)))
    raise ValueError(f"no path from {origin} to {dest} in the solution")


def _clean(v: float) -> float:
    return 0.0 if abs(v) < 1e-9 else v


def extract_solution(instance: Instance, variant: Variant, symbols: SymbolMap,
                     result: MilpSolution) -> Solution:
    """Turn solver values back into device states, flows and paths."""
    if not result.has_incumbent:
        return Solution(variant, [], math.nan, status=result.status, bound=result.bound)
    inst = instance
    val = result.values
    periods = list(inst.periods) if variant.multiperiod else [None]
    opts = variant.energy or (SLEEP if (variant.protection != ProtectionMode.NONE
                                        or variant.shortest_path) else None)
    scheme = variant.scheme
    out = []
    for p in periods:
        pf = _pfx(p)
        rates = inst.rates(p)
        if opts is None:
            nodes = {n: 1 for n in inst.node_ids}
            links = {l.arc: (_top_config(l) if l.rate_configs else l.num_cards)
                     for l in inst.links}
        else:
            nodes = {n: int(round(val[symbols.get("y", pf + (n,))])) for n in inst.node_ids}
            links = {}
            for l in inst.links:
                if opts.alr:
                    cfg = [val[symbols.get("w_cfg", pf + l.arc + (e,))]
                           for e in range(len(l.rate_configs))]
                    links[l.arc] = max(range(len(cfg)), key=lambda e: cfg[e])
                elif opts.bundled:
                    links[l.arc] = int(round(val[symbols.get("w", pf + l.arc)]))
                else:
                    on = int(round(val[symbols.get("w", pf + l.arc)]))
                    links[l.arc] = l.num_cards * on
        state = PeriodState(nodes, links)
        shared_pf = () if variant.fixed_routing else pf
        if variant.protection != ProtectionMode.NONE or scheme.kind == SINGLE_PATH:
            state.paths = {}
            for k, d in enumerate(inst.demands):
                used = {a: val[symbols.get("x", shared_pf + (k,) + a)] for a in inst.arcs}
                state.paths[k] = _trace(inst, d.origin, d.destination, used)
            state.flows = {k: {a: rates[k] for a in path} for k, path in state.paths.items()}
            if variant.protection != ProtectionMode.NONE:
                state.backup = {}
                for k, d in enumerate(inst.demands):
                    used = {a: val[symbols.get("xi", (k,) + a)] for a in inst.arcs}
                    state.backup[k] = _trace(inst, d.origin, d.destination, used)
        elif scheme.kind == PER_PATH:
            state.flows = {}
            if scheme.binary:
                state.paths = {}
            for k in range(len(inst.demands)):
                flows: dict[Arc, float] = {}
                for idx, path in enumerate(scheme.paths[k]):
                    share = val[symbols.get("x_path", shared_pf + (k, idx))]
                    if scheme.binary and share > 0.5:
                        state.paths[k] = list(path)
                    for a in path:
                        flows[a] = flows.get(a, 0.0) + rates[k] * share
                state.flows[k] = {a: _clean(v) for a, v in flows.items() if _clean(v)}
        elif scheme.kind == PER_FLOW and variant.fixed_routing:
            state.flows = {k: {a: _clean(rates[k] * val[symbols.get("x", (k,) + a)])
                               for a in inst.arcs
                               if _clean(rates[k] * val[symbols.get("x", (k,) + a)])}
                           for k in range(len(inst.demands))}
        elif scheme.kind == PER_FLOW:
            state.flows = {k: {a: _clean(val[symbols.get("f_dem", pf + (k,) + a)])
                               for a in inst.arcs
                               if _clean(val[symbols.get("f_dem", pf + (k,) + a)])}
                           for k in range(len(inst.demands))}
        else:
            state.flows = {}
            for s in sorted({d.origin for d in inst.demands}):
                per_arc = {a: max(val[symbols.get("f_src", pf + (s,) + a)], 0.0)
                           for a in inst.arcs}
                ks = [k for k, d in enumerate(inst.demands) if d.origin == s]
                state.flows.update(decompose_source_flows(inst, s, per_arc, ks, rates))
        out.append(state)
    weights = None
    if variant.shortest_path:
        weights = {a: val[symbols.get("omega", a)] for a in inst.arcs}
    return Solution(variant, out, result.objective, weights, result.status, result.bound)
