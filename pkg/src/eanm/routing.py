"""Graph routines that do not go through the MILP builders.

Distances, ECMP propagation, K shortest loopless paths, and routability tests
on a given set of active devices.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

from .lp import OPTIMAL, LinearProgram, solve_lp
from .model import Arc, Instance, aggregate_per_source, epigraph_segments

ECMP_TOL = 1e-7
FLOW_EPS = 1e-9

ActiveMask = Union[None, Iterable[Arc], Mapping[Arc, int]]


class RoutingError(ValueError):
    pass


@dataclass
class LoadMap:
    arcs: dict[Arc, float]
    nodes: dict[str, float]
    demand_flows: dict[int, dict[Arc, float]] = field(default_factory=dict)
    per_destination: dict[str, dict[Arc, float]] = field(default_factory=dict)


def default_weights(instance: Instance) -> dict[Arc, float]:
    return {l.arc: (l.weight if l.weight is not None else 1.0) for l in instance.links}


def active_arcs(instance: Instance, active: ActiveMask) -> set[Arc]:
    """Arcs usable for routing. A state mapping counts an arc active when it has capacity."""
    if active is None:
        return set(instance.arcs)
    if isinstance(active, Mapping):
        out = set()
        for arc, state in active.items():
            link = instance.link(arc)
            if link.rate_configs:
                if link.rate_configs[state].capacity > 0:
                    out.add(tuple(arc))
            elif state > 0:
                out.add(tuple(arc))
        return out
    return {tuple(a) for a in active}


def shortest_distances(instance: Instance, weights: Optional[Mapping[Arc, float]],
                       destination: str, active: ActiveMask = None,
                       exact: bool = False) -> dict[str, float]:
    """Distance from every node to ``destination`` over active arcs; ``inf`` if unreachable."""
    weights = default_weights(instance) if weights is None else weights
    arcs = active_arcs(instance, active)
    into: dict[str, list[tuple[str, float]]] = {n: [] for n in instance.node_ids}
    for (i, j) in sorted(arcs):
        w = Fraction(weights[(i, j)]) if exact else float(weights[(i, j)])
        into[j].append((i, w))
    zero = Fraction(0) if exact else 0.0
    dist: dict[str, float] = {n: math.inf for n in instance.node_ids}
    dist[destination] = zero
    heap = [(zero, destination)]
    done = set()
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        for u, w in into[v]:
            nd = d + w
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


def compute_ecmp_loads(instance: Instance, weights: Optional[Mapping[Arc, float]] = None,
                       active: ActiveMask = None, traffic: Optional[Sequence[float]] = None,
                       exact: bool = False, tol: float = ECMP_TOL) -> LoadMap:
    """Loads produced by equal-cost multipath forwarding.

    At every node the traffic bound to a destination is split equally over the
    active outgoing arcs lying on a shortest path to it. Path lengths within a
    relative ``tol`` count as equal. With ``exact=True`` all arithmetic is done
    on fractions and ties must be exact.
    """
    weights = default_weights(instance) if weights is None else weights
    traffic = instance.rates() if traffic is None else list(traffic)
    arcs = active_arcs(instance, active)
    out_arcs: dict[str, list[Arc]] = {n: [] for n in instance.node_ids}
    for a in sorted(arcs):
        out_arcs[a[0]].append(a)
    zero = Fraction(0) if exact else 0.0
    arc_load = {a: zero for a in instance.arcs}
    per_dest: dict[str, dict[Arc, float]] = {}
    demand_flows: dict[int, dict[Arc, float]] = {}
    dists: dict[str, dict[str, float]] = {}

    for k, d in enumerate(instance.demands):
        rate = Fraction(traffic[k]) if exact else float(traffic[k])
        t = d.destination
        if t not in dists:
            dists[t] = shortest_distances(instance, weights, t, arcs, exact=exact)
        dist = dists[t]
        if rate == 0:
            demand_flows[k] = {}
            continue
        if dist[d.origin] == math.inf:
            raise RoutingError(f"demand {k} ({d.origin}->{t}) is not routable over active arcs")
        order = sorted((n for n in instance.node_ids if dist[n] != math.inf),
                       key=lambda n: (-dist[n], n))
        at = {n: zero for n in instance.node_ids}
        at[d.origin] = rate
        flows: dict[Arc, float] = {}
        for i in order:
            amount = at[i]
            if i == t or amount == 0:
                continue
            nxt = []
            for a in out_arcs[i]:
                j = a[1]
                if dist[j] == math.inf:
                    continue
                w = Fraction(weights[a]) if exact else weights[a]
                gap = dist[i] - (w + dist[j])
                if (gap == 0) if exact else abs(gap) <= tol * max(1.0, abs(dist[i])):
                    nxt.append(a)
            share = amount / len(nxt)
            for a in nxt:
                flows[a] = flows.get(a, zero) + share
                at[a[1]] += share
        demand_flows[k] = flows
        bucket = per_dest.setdefault(t, {})
        for a, f in flows.items():
            arc_load[a] += f
            bucket[a] = bucket.get(a, zero) + f

    nodes = {n: zero for n in instance.node_ids}
    for (i, j), f in arc_load.items():
        nodes[j] += f
    for k, d in enumerate(instance.demands):
        nodes[d.origin] += Fraction(traffic[k]) if exact else traffic[k]
    return LoadMap(arc_load, nodes, demand_flows, per_dest)


def _node_path_cost(path: Sequence[str], weights: Mapping[Arc, float]) -> float:
    return sum(weights[(path[k], path[k + 1])] for k in range(len(path) - 1))


def _dijkstra_path(adj, weights, s, t, banned_nodes, banned_arcs):
    heap = [(0.0, (s,))]
    seen = set()
    while heap:
        cost, path = heapq.heappop(heap)
        v = path[-1]
        if v in seen:
            continue
        seen.add(v)
        if v == t:
            return cost, path
        for j in adj[v]:
            if j in banned_nodes or (v, j) in banned_arcs or j in seen:
                continue
            heapq.heappush(heap, (cost + weights[(v, j)], path + (j,)))
    return None


def k_shortest_paths(instance: Instance, weights: Optional[Mapping[Arc, float]],
                     demand, K: int, active: ActiveMask = None) -> list[list[Arc]]:
    """Up to ``K`` loopless paths in non-decreasing weight, ties in lexicographic order.

    ``demand`` is a demand index, a :class:`Demand`, or an ``(origin, destination)`` pair.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    weights = default_weights(instance) if weights is None else weights
    if isinstance(demand, int):
        demand = instance.demands[demand]
    s, t = (demand.origin, demand.destination) if hasattr(demand, "origin") else demand
    arcs = active_arcs(instance, active)
    adj: dict[str, list[str]] = {n: [] for n in instance.node_ids}
    for (i, j) in sorted(arcs):
        adj[i].append(j)

    first = _dijkstra_path(adj, weights, s, t, set(), set())
    if first is None:
        return []
    found = [first]
    seen_paths = {first[1]}
    cand: list = []
    while True:
        cost_k, last = found[-1]
        for i in range(len(last) - 1):
            root = last[:i + 1]
            banned_arcs = {(p[i], p[i + 1]) for _, p in found if p[:i + 1] == root}
            banned_nodes = set(root[:-1])
            spur = _dijkstra_path(adj, weights, root[-1], t, banned_nodes, banned_arcs)
            if spur is None:
                continue
            path = root[:-1] + spur[1]
            if path not in seen_paths:
                seen_paths.add(path)
                heapq.heappush(cand, (_node_path_cost(path, weights), path))
        if not cand:
            break
        if len(found) >= K:
            kth = sorted(c for c, _ in found)[K - 1]
            if cand[0][0] > kth + 1e-12:
                break
        found.append(heapq.heappop(cand))
    found.sort()
    return [[(p[k], p[k + 1]) for k in range(len(p) - 1)] for _, p in found[:K]]


def simple_paths(instance: Instance, origin: str, destination: str, active: ActiveMask = None,
                 max_hops: Optional[int] = None) -> list[list[Arc]]:
    """Every simple ``origin -> destination`` path, in lexicographic node order."""
    arcs = active_arcs(instance, active)
    adj: dict[str, list[str]] = {n: [] for n in instance.node_ids}
    for (i, j) in sorted(arcs):
        adj[i].append(j)
    cap = len(instance.nodes) - 1 if max_hops is None else max_hops
    out: list[list[Arc]] = []

    def walk(path: list[str]):
        v = path[-1]
        if v == destination:
            out.append([(path[k], path[k + 1]) for k in range(len(path) - 1)])
            return
        if len(path) - 1 >= cap:
            return
        for j in adj[v]:
            if j not in path:
                path.append(j)
                walk(path)
                path.pop()

    walk([origin])
    return out


def decompose_source_flows(instance: Instance, source: str, arc_flows: Mapping[Arc, float],
                           demands: Sequence[int], rates: Sequence[float]
                           ) -> dict[int, dict[Arc, float]]:
    """Split the aggregated flow of one source into per-demand flows along paths."""
    residual = {a: f for a, f in arc_flows.items() if f > FLOW_EPS}
    out: dict[int, dict[Arc, float]] = {}
    for k in demands:
        t = instance.demands[k].destination
        remaining = rates[k]
        flows: dict[Arc, float] = {}
        while remaining > FLOW_EPS:
            path = _bfs_path(residual, source, t)
            if path is None:
                if remaining > 1e-6:
                    raise RoutingError(f"flow of source {source} does not reach {t}")
                break
            push = min(remaining, min(residual[a] for a in path))
            for a in path:
                flows[a] = flows.get(a, 0.0) + push
                residual[a] -= push
                if residual[a] <= FLOW_EPS:
                    del residual[a]
            remaining -= push
        out[k] = flows
    return out


def _bfs_path(arcs: Mapping[Arc, float], s: str, t: str) -> Optional[list[Arc]]:
    adj: dict[str, list[str]] = {}
    for (i, j) in sorted(arcs):
        adj.setdefault(i, []).append(j)
    prev = {s: None}
    queue = deque([s])
    while queue:
        v = queue.popleft()
        if v == t:
            break
        for j in adj.get(v, []):
            if j not in prev:
                prev[j] = v
                queue.append(j)
    if t not in prev:
        return None
    path = []
    v = t
    while prev[v] is not None:
        path.append((prev[v], v))
        v = prev[v]
    return path[::-1]


def _capacities(instance: Instance, link_states: Optional[Mapping[Arc, int]]) -> dict[Arc, float]:
    if link_states is None:
        return {l.arc: l.full_capacity for l in instance.links}
    return {l.arc: l.usable_capacity(link_states.get(l.arc, 0)) for l in instance.links}


def _sleeping_endpoints_ok(instance, node_states, traffic) -> bool:
    if node_states is None:
        return True
    for d, r in zip(instance.demands, traffic):
        if r > 0 and (not node_states.get(d.origin, 1) or not node_states.get(d.destination, 1)):
            return False
    return True


def min_cost_routing(instance: Instance, link_states: Optional[Mapping[Arc, int]] = None,
                     node_states: Optional[Mapping[str, int]] = None,
                     traffic: Optional[Sequence[float]] = None,
                     with_costs: bool = True,
                     tie_break: float = 0.0) -> Optional[tuple[float, LoadMap]]:
    """Cheapest splittable routing on the given devices, via the per-source LP.

    Returns ``(load cost, witness)`` or ``None`` when the traffic does not fit.
    The load cost covers only the flow-dependent power terms. A positive
    ``tie_break`` charges that much per unit of arc flow so that, among
    equally cheap routings, short ones win; it is not part of the returned cost.
    """
    traffic = instance.rates() if traffic is None else list(traffic)
    if not _sleeping_endpoints_ok(instance, node_states, traffic):
        return None
    caps = _capacities(instance, link_states)
    usable = [a for a in instance.arcs if caps[a] > 0 and (
        node_states is None or (node_states.get(a[0], 1) and node_states.get(a[1], 1)))]
    sources = aggregate_per_source(instance, traffic)
    lp = LinearProgram(name="routing")
    for s in sources:
        for a in usable:
            lp.add_variable(f"f[{s},{a[0]},{a[1]}]")
    for s, (total, per_dest) in sources.items():
        for i in instance.node_ids:
            coeffs = [(f"f[{s},{a[0]},{a[1]}]", 1.0) for a in usable if a[0] == i]
            coeffs += [(f"f[{s},{a[0]},{a[1]}]", -1.0) for a in usable if a[1] == i]
            rhs = total if i == s else -per_dest.get(i, 0.0)
            if not coeffs:
                if abs(rhs) > FLOW_EPS:
                    return None
                continue
            lp.add_row(f"bal[{s},{i}]", coeffs, "=", rhs)
    for a in usable:
        lp.add_row(f"cap[{a[0]},{a[1]}]", [(f"f[{s},{a[0]},{a[1]}]", 1.0) for s in sources],
                   "<=", caps[a])
    if with_costs:
        _add_load_costs(instance, lp, usable, list(sources), traffic)
    if tie_break:
        for v in list(lp.names):
            if v.startswith("f["):
                lp.add_cost(v, tie_break)
    sol = solve_lp(lp)
    if sol.status != OPTIMAL:
        return None
    arc_load = {a: 0.0 for a in instance.arcs}
    demand_flows: dict[int, dict[Arc, float]] = {}
    for s in sources:
        per_arc = {a: max(sol.values[f"f[{s},{a[0]},{a[1]}]"], 0.0) for a in usable}
        for a, f in per_arc.items():
            arc_load[a] += f
        ks = [k for k, d in enumerate(instance.demands) if d.origin == s]
        demand_flows.update(decompose_source_flows(instance, s, per_arc, ks, traffic))
    for k in range(len(instance.demands)):
        demand_flows.setdefault(k, {})
    nodes = {n: 0.0 for n in instance.node_ids}
    for (i, j), f in arc_load.items():
        nodes[j] += f
    for d, r in zip(instance.demands, traffic):
        nodes[d.origin] += r
    cost = sol.objective - tie_break * sum(arc_load.values())
    return cost, LoadMap(arc_load, nodes, demand_flows)


def _add_load_costs(instance, lp, usable, sources, traffic):
    def epigraph(tag, spec, coeffs, const):
        segs = epigraph_segments(spec)
        if spec.piecewise is None:
            slope = segs[0][1]
            if slope:
                for v, a in coeffs:
                    lp.add_cost(v, slope * a)
                lp.offset += slope * const
            return
        p = lp.add_variable(f"p[{tag}]", cost=1.0)
        for k, (icpt, slope) in enumerate(segs):
            lp.add_row(f"epi[{tag},{k}]", [(p, 1.0)] + [(v, -slope * a) for v, a in coeffs],
                       ">=", icpt + slope * const)

    for a in usable:
        link = instance.link(a)
        if link.rate_configs:
            continue
        coeffs = [(f"f[{s},{a[0]},{a[1]}]", 1.0) for s in sources]
        epigraph(f"{a[0]},{a[1]}", link, coeffs, 0.0)
    originated = {n: 0.0 for n in instance.node_ids}
    for d, r in zip(instance.demands, traffic):
        originated[d.origin] += r
    for node in instance.nodes:
        coeffs = [(f"f[{s},{a[0]},{a[1]}]", 1.0) for a in usable if a[1] == node.id
                  for s in sources]
        epigraph(node.id, node, coeffs, originated[node.id])


def routable(instance: Instance, link_states: Optional[Mapping[Arc, int]] = None,
             traffic: Optional[Sequence[float]] = None, method: str = "lp", k: int = 3,
             weights: Optional[Mapping[Arc, float]] = None,
             node_states: Optional[Mapping[str, int]] = None
             ) -> tuple[bool, Optional[LoadMap]]:
    """Can ``traffic`` be carried by the active devices within mu * capacity?

    ``method="lp"`` solves the per-source routing LP; ``method="ksp"`` packs
    demands first-fit (largest first) onto their ``k`` shortest paths.
    """
    traffic = instance.rates() if traffic is None else list(traffic)
    if method == "lp":
        res = min_cost_routing(instance, link_states, node_states, traffic, with_costs=True,
                               tie_break=1e-6)
        return (res is not None), (res[1] if res is not None else None)
    if method != "ksp":
        raise ValueError(f"unknown routability method {method!r}")
    if not _sleeping_endpoints_ok(instance, node_states, traffic):
        return False, None
    caps = _capacities(instance, link_states)
    usable = {a for a in instance.arcs if caps[a] > 0 and (
        node_states is None or (node_states.get(a[0], 1) and node_states.get(a[1], 1)))}
    residual = dict(caps)
    demand_flows: dict[int, dict[Arc, float]] = {}
    order = sorted(range(len(instance.demands)), key=lambda d: (-traffic[d], d))
    for d in order:
        r = traffic[d]
        if r == 0:
            demand_flows[d] = {}
            continue
        for path in k_shortest_paths(instance, weights, d, k, active=usable):
            if all(residual[a] >= r - FLOW_EPS for a in path):
                for a in path:
                    residual[a] -= r
                demand_flows[d] = {a: r for a in path}
                break
        else:
            return False, None
    arc_load = {a: caps[a] - residual[a] for a in instance.arcs}
    nodes = {n: 0.0 for n in instance.node_ids}
    for (i, j), f in arc_load.items():
        nodes[j] += f
    for dm, r in zip(instance.demands, traffic):
        nodes[dm.origin] += r
    return True, LoadMap(arc_load, nodes, dict(sorted(demand_flows.items())))
