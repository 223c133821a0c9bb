"""Exhaustive optimizer for tiny instances, used as ground truth.

Device states are enumerated in order of fixed power and each state is
priced by a routing LP built here from scratch; unsplittable variants
enumerate simple-path assignments instead. No model builder is used.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .lp import GE, LE, EQ, OPTIMAL, LinearProgram, solve_lp
from .model import LOAD_TOL, Arc, Instance, epigraph_segments, validate_instance
from .routing import RoutingError, compute_ecmp_loads, simple_paths
from .solution import PeriodState, Solution
from .variants import PER_PATH, SINGLE_PATH, SLEEP, EnergyOptions, ProtectionMode, Variant

TIE_TOL = 1e-9


@dataclass(frozen=True)
class OracleLimits:
    max_states: int = 2 ** 20
    time_limit: float = math.inf

    def __post_init__(self):
        if self.max_states <= 0 or self.time_limit <= 0:
            raise ValueError("oracle limits must be positive")


class LimitExceeded(RuntimeError):
    """The enumeration would exceed the limits; ``required`` is its size."""

    def __init__(self, required: int, reason: str = "state count"):
        super().__init__(f"oracle limit exceeded ({reason}): {required} candidates required")
        self.required = required
        self.reason = reason


class _Clock:
    def __init__(self, limits: OracleLimits, required: int):
        if required > limits.max_states:
            raise LimitExceeded(required)
        self.deadline = time.monotonic() + limits.time_limit
        self.required = required
        self.evaluated = 0

    def tick(self) -> None:
        self.evaluated += 1
        if time.monotonic() > self.deadline:
            raise LimitExceeded(self.required, "time")


# ------------------------------------------------------------------ pricing

def _load_cost_rows(lp: LinearProgram, tag: str, spec, terms, const: float) -> None:
    segs = epigraph_segments(spec)
    if spec.piecewise is None:
        slope = segs[0][1]
        if slope:
            for v, a in terms:
                lp.add_cost(v, slope * a)
            lp.offset += slope * const
        return
    p = lp.add_variable(f"p[{tag}]", cost=1.0)
    for k, (icpt, slope) in enumerate(segs):
        lp.add_row(f"epi[{tag},{k}]", [(p, 1.0)] + [(v, -slope * a) for v, a in terms],
                   GE, icpt + slope * const)


def _price_routing(instance: Instance, caps: Mapping[Arc, float], node_on: Mapping[str, int],
                   rates: Sequence[float],
                   paths: Optional[Mapping[int, Sequence[Sequence[Arc]]]] = None
                   ) -> Optional[tuple[float, dict[int, dict[Arc, float]]]]:
    """Cheapest load cost of routing ``rates`` on arcs with capacity ``caps``.

    Per-demand arc flows, or per-demand path shares when ``paths`` is given.
    Returns ``(load cost, per-demand flows)`` or ``None`` if infeasible.
    """
    for d, r in zip(instance.demands, rates):
        if r > 0 and not (node_on[d.origin] and node_on[d.destination]):
            return None
    usable = [a for a in instance.arcs if caps[a] > 0]
    lp = LinearProgram(name="oracle")
    use: dict[int, list[tuple[Arc, str, float]]] = {}
    for k, d in enumerate(instance.demands):
        r = rates[k]
        use[k] = []
        if r == 0:
            continue
        if paths is not None:
            cols = []
            for p_idx, path in enumerate(paths[k]):
                if any(caps[a] <= 0 for a in path):
                    continue
                c = lp.add_variable(f"s[{k},{p_idx}]", 0.0, 1.0)
                cols.append(c)
                use[k] += [(a, c, r) for a in path]
            if not cols:
                return None
            lp.add_row(f"one[{k}]", [(c, 1.0) for c in cols], EQ, 1.0)
            continue
        for a in usable:
            c = lp.add_variable(f"x[{k},{a[0]},{a[1]}]")
            use[k].append((a, c, 1.0))
        for n in instance.node_ids:
            coeffs = [(c, s) for a, c, _ in use[k] for s in
                      ((1.0,) if a[0] == n else ()) + ((-1.0,) if a[1] == n else ())]
            rhs = r if n == d.origin else -r if n == d.destination else 0.0
            if not coeffs:
                if rhs:
                    return None
                continue
            lp.add_row(f"bal[{k},{n}]", coeffs, EQ, rhs)
    per_arc: dict[Arc, list[tuple[str, float]]] = {a: [] for a in instance.arcs}
    for k, items in use.items():
        for a, c, coef in items:
            per_arc[a].append((c, coef))
    for a in instance.arcs:
        if per_arc[a]:
            lp.add_row(f"cap[{a[0]},{a[1]}]", per_arc[a], LE, caps[a])
    for link in instance.links:
        if not link.rate_configs and per_arc[link.arc]:
            _load_cost_rows(lp, f"{link.arc[0]},{link.arc[1]}", link, per_arc[link.arc], 0.0)
    originated = {n: 0.0 for n in instance.node_ids}
    for d, r in zip(instance.demands, rates):
        originated[d.origin] += r
    for node in instance.nodes:
        terms = [t for a in instance.in_arcs(node.id) for t in per_arc[a]]
        if node_on[node.id]:
            _load_cost_rows(lp, node.id, node, terms, originated[node.id])
    if not lp.variables:
        return 0.0 + lp.offset, {k: {} for k in use}
    sol = solve_lp(lp)
    if sol.status != OPTIMAL:
        return None
    flows: dict[int, dict[Arc, float]] = {}
    for k, items in use.items():
        f: dict[Arc, float] = {}
        for a, c, coef in items:
            v = sol.values[c] * coef
            if v > 1e-12:
                f[a] = f.get(a, 0.0) + v
        flows[k] = f
    return sol.objective, flows


def _fixed_link_power(link, state: int, bundled: bool) -> float:
    if link.rate_configs:
        return link.rate_configs[state].power
    return link.fixed_power * state


def _link_choices(link, options: Optional[EnergyOptions]) -> list[int]:
    if link.rate_configs:
        if options is None:
            caps = [rc.capacity for rc in link.rate_configs]
            return [caps.index(max(caps))]
        return [e for e, rc in enumerate(link.rate_configs)
                if options.sleep_links or rc.capacity > 0]
    if options is None or not options.sleep_links:
        return [link.num_cards]
    if options.bundled:
        return list(range(link.num_cards + 1))
    return [0, link.num_cards]


def _on(link, state: int) -> bool:
    if link.rate_configs:
        return link.rate_configs[state].capacity > 0
    return state > 0


def _state_space(instance: Instance, options: Optional[EnergyOptions]):
    """Raw state-space size and the per-device choices (links by arc, then nodes)."""
    links = sorted(instance.links, key=lambda l: l.arc)
    nodes = sorted(instance.nodes, key=lambda n: n.id)
    choices = [_link_choices(l, options) for l in links]
    node_choices = [[0, 1] if (options is not None and options.sleep_nodes) else [1]
                    for _ in nodes]
    required = math.prod(len(c) for c in choices) * math.prod(len(c) for c in node_choices)
    return required, choices, node_choices, links, nodes


def _enumerate(instance, options, limits) -> tuple[_Clock, list]:
    """Coherent state vectors as (fixed power, key, link states, node states), cheapest first."""
    required, choices, node_choices, links, nodes = _state_space(instance, options)
    clock = _Clock(limits, required)
    bundled = options is not None and options.bundled
    out = []
    for ys in itertools.product(*node_choices):
        y = {n.id: v for n, v in zip(nodes, ys)}
        node_power = sum(n.fixed_power * v for n, v in zip(nodes, ys))
        allowed = [[s for s in ch if not _on(l, s) or (y[l.source] and y[l.target])]
                   for l, ch in zip(links, choices)]
        for ws in itertools.product(*allowed):
            w = {l.arc: s for l, s in zip(links, ws)}
            fixed = node_power + sum(_fixed_link_power(l, s, bundled) for l, s in zip(links, ws))
            out.append((fixed, ws + ys, w, y))
    out.sort(key=lambda t: (t[0], t[1]))
    return clock, out


class _Best:
    def __init__(self):
        self.power = math.inf
        self.key = None
        self.payload = None

    def offer(self, power: float, key: tuple, payload) -> None:
        if power < self.power - TIE_TOL or (abs(power - self.power) <= TIE_TOL
                                            and (self.key is None or key < self.key)):
            self.power, self.key, self.payload = power, key, payload


# ------------------------------------------------------------ entry points

def brute_force_optimum(instance: Instance, variant: Variant,
                        limits: OracleLimits = OracleLimits()) -> Solution:
    """Globally optimal solution of ``variant`` by exhaustive enumeration.

    Returns a solution with status ``infeasible`` when no state works and
    raises :class:`LimitExceeded` when the enumeration is too large. For the
    shortest-path variant the weights range over the integers
    ``1..floor(omega_max)``, so the result is an upper bound on the optimum
    over real weights.
    """
    problems = validate_instance(instance)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(problems))
    if variant.energy is not None and variant.energy.alr != any(
            l.rate_configs for l in instance.links):
        raise ValueError("the alr option must match the links' rate configurations")
    if variant.shortest_path:
        return _ecmp_optimum(instance, variant, limits)
    if variant.protection != ProtectionMode.NONE:
        return _protection_optimum(instance, variant, limits)
    if variant.multiperiod:
        return _multiperiod_optimum(instance, variant, limits)
    if variant.scheme.unsplittable:
        return _path_optimum(instance, variant, limits)
    return _state_optimum(instance, variant, limits)


def _candidate_paths(instance: Instance, variant: Variant, k: int) -> list[list[Arc]]:
    if variant.scheme.kind == PER_PATH:
        return [list(p) for p in variant.scheme.paths[k]]
    d = instance.demands[k]
    return [list(p) for p in simple_paths(instance, d.origin, d.destination, None,
                                          len(instance.nodes) - 1)]


def _caps(instance: Instance, w: Mapping[Arc, int]) -> dict[Arc, float]:
    return {l.arc: l.usable_capacity(w[l.arc]) for l in instance.links}


def _state_optimum(instance: Instance, variant: Variant, limits: OracleLimits) -> Solution:
    options = variant.energy
    clock, states = _enumerate(instance, options, limits)
    rates = instance.rates()
    paths = None
    if variant.scheme.kind == PER_PATH:
        paths = {k: _candidate_paths(instance, variant, k) for k in range(len(rates))}
    best = _Best()
    for fixed, key, w, y in states:
        if fixed > best.power + TIE_TOL:
            break
        clock.tick()
        priced = _price_routing(instance, _caps(instance, w), y, rates, paths)
        if priced is None:
            continue
        cost, flows = priced
        best.offer(fixed + cost, key, (w, y, flows))
    return _finish(variant, best, clock)


def _finish(variant, best: _Best, clock: _Clock, periods=None, weights=None) -> Solution:
    info = {"required": clock.required, "evaluated": clock.evaluated}
    if best.payload is None:
        return Solution(variant, [], math.nan, status="infeasible", info=info)
    if periods is None:
        w, y, flows = best.payload[:3]
        state = PeriodState(dict(y), dict(w), flows)
        if len(best.payload) > 3:
            state.paths, state.backup = best.payload[3], best.payload[4]
        periods = [state]
    return Solution(variant, periods, best.power, weights=weights, status="optimal",
                    bound=best.power, info=info)


def _minimal_states(instance: Instance, options: Optional[EnergyOptions],
                    loads: Mapping[Arc, float], rates: Sequence[float]
                    ) -> Optional[tuple[dict, dict]]:
    """Cheapest device states able to carry fixed arc loads."""
    w = {}
    for link in instance.links:
        load = loads.get(link.arc, 0.0)
        feasible = [s for s in _link_choices(link, options)
                    if link.usable_capacity(s) >= load - 1e-9 * max(1.0, load)
                    and (load <= LOAD_TOL or _on(link, s))]
        if not feasible:
            return None
        w[link.arc] = min(feasible, key=lambda s: (_fixed_link_power(link, s, True), s))
    y = {}
    ends = {n for d, r in zip(instance.demands, rates) if r > 0 for n in (d.origin, d.destination)}
    for n in instance.node_ids:
        needed = n in ends or any(_on(instance.link(a), w[a]) for a in
                                  instance.out_arcs(n) + instance.in_arcs(n))
        y[n] = 1 if (needed or options is None or not options.sleep_nodes) else 0
    return w, y


def _power(instance: Instance, w, y, loads: Mapping[Arc, float], rates) -> float:
    from .model import evaluate_power

    total = 0.0
    node_load = {n: 0.0 for n in instance.node_ids}
    for (i, j), f in loads.items():
        node_load[j] += f
    for d, r in zip(instance.demands, rates):
        node_load[d.origin] += r
    for link in instance.links:
        total += evaluate_power(link, loads.get(link.arc, 0.0), w[link.arc])
    for node in instance.nodes:
        total += evaluate_power(node, node_load[node.id], y[node.id])
    return total


def _path_optimum(instance: Instance, variant: Variant, limits: OracleLimits) -> Solution:
    rates = instance.rates()
    cands = [_candidate_paths(instance, variant, k) for k in range(len(rates))]
    required = math.prod(len(c) for c in cands)
    clock = _Clock(limits, required)
    best = _Best()
    for combo in itertools.product(*(range(len(c)) for c in cands)):
        clock.tick()
        loads: dict[Arc, float] = {}
        for k, idx in enumerate(combo):
            for a in cands[k][idx]:
                loads[a] = loads.get(a, 0.0) + rates[k]
        st = _minimal_states(instance, variant.energy, loads, rates)
        if st is None:
            continue
        w, y = st
        paths = {k: cands[k][idx] for k, idx in enumerate(combo)}
        flows = {k: {a: rates[k] for a in p} for k, p in paths.items()}
        best.offer(_power(instance, w, y, loads, rates), combo, (w, y, flows, paths, None))
    return _finish(variant, best, clock)


def _protection_optimum(instance: Instance, variant: Variant, limits: OracleLimits) -> Solution:
    mode = variant.protection
    options = variant.energy or SLEEP
    rates = instance.rates()
    pairs = []
    for k in range(len(rates)):
        paths = _candidate_paths(instance, variant, k)
        opts = []
        for p in paths:
            banned = set(p) | {(a[1], a[0]) for a in p}
            opts += [(p, q) for q in paths if not banned & set(q)]
        pairs.append(opts)
    required = math.prod(len(p) for p in pairs)
    clock = _Clock(limits, required)
    best = _Best()
    arcs = instance.arcs
    for combo in itertools.product(*(range(len(p)) for p in pairs)):
        clock.tick()
        chosen = [pairs[k][i] for k, i in enumerate(combo)]
        primary = {a: 0.0 for a in arcs}
        for k, (p, _) in enumerate(chosen):
            for a in p:
                primary[a] += rates[k]
        if mode.shared:
            held = dict(primary)
            for c in arcs:
                extra = {a: 0.0 for a in arcs}
                for k, (p, q) in enumerate(chosen):
                    if c in p:
                        for a in q:
                            extra[a] += rates[k]
                for a in arcs:
                    if a != c:
                        held[a] = max(held[a], primary[a] + extra[a])
        else:
            held = dict(primary)
            for k, (_, q) in enumerate(chosen):
                for a in q:
                    held[a] += rates[k]
        st = _minimal_states(instance, options, held, rates)
        if st is None:
            continue
        w, y = st
        if mode.smart:
            wp, yp = _minimal_states(instance, options, primary, rates)
            power = _power(instance, wp, yp, primary, rates)
        else:
            power = _power(instance, w, y, held, rates)
        flows = {k: {a: rates[k] for a in p} for k, (p, _) in enumerate(chosen)}
        paths = {k: p for k, (p, _) in enumerate(chosen)}
        backup = {k: q for k, (_, q) in enumerate(chosen)}
        best.offer(power, combo, (w, y, flows, paths, backup))
    return _finish(variant, best, clock)


def _multiperiod_optimum(instance: Instance, variant: Variant, limits: OracleLimits) -> Solution:
    options = variant.energy or SLEEP
    periods = list(instance.periods)
    raw, choices, node_choices, links, nodes = _state_space(instance, options)
    required = raw ** len(periods)
    clock = _Clock(limits, required)
    _, states = _enumerate(instance, options, OracleLimits(max(raw, 1)))
    rates = {p: instance.rates(p) for p in periods}
    eta = instance.reactivation_cap
    delta = instance.reactivation_fraction

    # per-period pricing of every coherent state (free routing only)
    priced: dict[str, list] = {}
    if not variant.fixed_routing:
        for p in periods:
            rows = []
            for fixed, key, w, y in states:
                clock.tick()
                res = _price_routing(instance, _caps(instance, w), y, rates[p])
                if res is not None:
                    rows.append((fixed + res[0], key, w, y, res[1]))
            rows.sort(key=lambda r: (r[0], r[1]))
            priced[p] = rows
        if any(not priced[p] for p in periods):
            return _finish(variant, _Best(), clock)
        floor = {p: priced[p][0][0] for p in periods}
    else:
        priced = {p: [(f, k, w, y, None) for f, k, w, y in states] for p in periods}
        floor = {p: states[0][0] if states else math.inf for p in periods}

    def schedule_ok(seq) -> bool:
        for link in instance.links:
            units = link.num_cards if options.bundled else 1
            ups = 0
            for s in range(len(seq)):
                before, after = seq[s - 1][2][link.arc], seq[s][2][link.arc]
                if link.rate_configs or not options.bundled:
                    ups += int(_on(link, after) and not _on(link, before))
                else:
                    ups += max(0, after - before)
            if ups > units * eta:
                return False
        return True

    def react(seq) -> float:
        total = 0.0
        for node in instance.nodes:
            for s in range(len(seq)):
                total += delta * node.fixed_power * max(0, seq[s][3][node.id]
                                                        - seq[s - 1][3][node.id])
        return total

    best = _Best()
    remaining = [sum(floor[q] for q in periods[i:]) for i in range(len(periods) + 1)]

    def dfs(i: int, seq: list, partial: float) -> None:
        if partial + remaining[i] > best.power + TIE_TOL:
            return
        if i == len(periods):
            if not schedule_ok(seq):
                return
            total = partial + react(seq)
            if total > best.power + TIE_TOL:
                return
            key = tuple(k for row in seq for k in row[1])
            if variant.fixed_routing:
                res = _price_fixed_routing(instance, periods, rates, seq)
                clock.tick()
                if res is None:
                    return
                total += res[0]
                payload = [(row[2], row[3], res[1][q]) for q, row in zip(periods, seq)]
            else:
                payload = [(row[2], row[3], row[4]) for row in seq]
            best.offer(total, key, payload)
            return
        for row in priced[periods[i]]:
            if partial + row[0] + remaining[i + 1] > best.power + TIE_TOL:
                break
            clock.tick()
            seq.append(row)
            dfs(i + 1, seq, partial + row[0])
            seq.pop()

    dfs(0, [], 0.0)
    if best.payload is None:
        return _finish(variant, best, clock)
    out = [PeriodState(dict(y), dict(w), flows) for w, y, flows in best.payload]
    return _finish(variant, best, clock, periods=out)


def _price_fixed_routing(instance: Instance, periods, rates, seq):
    """Load cost when every demand keeps the same arc fractions in all periods."""
    for q, row in zip(periods, seq):
        y = row[3]
        for d, r in zip(instance.demands, rates[q]):
            if r > 0 and not (y[d.origin] and y[d.destination]):
                return None
    lp = LinearProgram(name="oracle_fixed")
    x = {}
    for k, d in enumerate(instance.demands):
        for a in instance.arcs:
            x[k, a] = lp.add_variable(f"x[{k},{a[0]},{a[1]}]", 0.0, 1.0)
        for n in instance.node_ids:
            coeffs = [(x[k, a], 1.0) for a in instance.out_arcs(n)]
            coeffs += [(x[k, a], -1.0) for a in instance.in_arcs(n)]
            rhs = 1.0 if n == d.origin else -1.0 if n == d.destination else 0.0
            lp.add_row(f"bal[{k},{n}]", coeffs, EQ, rhs)
    for q, row in zip(periods, seq):
        caps = _caps(instance, row[2])
        r = rates[q]
        originated = {n: 0.0 for n in instance.node_ids}
        for d, rr in zip(instance.demands, r):
            originated[d.origin] += rr
        per_arc = {a: [(x[k, a], r[k]) for k in range(len(r)) if r[k]] for a in instance.arcs}
        for a in instance.arcs:
            if per_arc[a]:
                lp.add_row(f"cap[{q},{a[0]},{a[1]}]", per_arc[a], LE, caps[a])
        for link in instance.links:
            if not link.rate_configs and per_arc[link.arc]:
                _load_cost_rows(lp, f"{q},{link.arc[0]},{link.arc[1]}", link,
                                per_arc[link.arc], 0.0)
        for node in instance.nodes:
            if row[3][node.id]:
                terms = [t for a in instance.in_arcs(node.id) for t in per_arc[a]]
                _load_cost_rows(lp, f"{q},{node.id}", node, terms, originated[node.id])
    sol = solve_lp(lp)
    if sol.status != OPTIMAL:
        return None
    flows = {}
    for q in periods:
        r = rates[q]
        flows[q] = {k: {a: sol.values[x[k, a]] * r[k] for a in instance.arcs
                        if sol.values[x[k, a]] * r[k] > 1e-12} for k in range(len(r))}
    return sol.objective, flows


def _ecmp_optimum(instance: Instance, variant: Variant, limits: OracleLimits) -> Solution:
    options = variant.energy or SLEEP
    wmax = instance.omega_max
    grid = list(range(1, int(math.floor(wmax)) + 1))
    links = sorted(instance.links, key=lambda l: l.arc)
    choices = [_link_choices(l, options) for l in links]
    required = 0
    for ws in itertools.product(*choices):
        required += math.prod(len(grid) if _on(l, s) else 1 for l, s in zip(links, ws))
        if required > limits.max_states:
            break
    clock = _Clock(limits, required)
    rates = instance.rates()
    ordered = sorted(itertools.product(*choices), key=lambda ws: (
        sum(_fixed_link_power(l, s, True) for l, s in zip(links, ws)), ws))
    best = _Best()
    for ws in ordered:
        w = {l.arc: s for l, s in zip(links, ws)}
        link_power = sum(_fixed_link_power(l, s, True) for l, s in zip(links, ws))
        if link_power > best.power + TIE_TOL:
            break
        on = [l for l, s in zip(links, ws) if _on(l, s)]
        for combo in itertools.product(*([grid] * len(on))):
            clock.tick()
            weights = {l.arc: float(wmax) for l in links}
            for l, v in zip(on, combo):
                weights[l.arc] = float(v)
            try:
                loads = compute_ecmp_loads(instance, weights)
            except RoutingError:
                continue
            if any(loads.arcs[l.arc] > l.usable_capacity(w[l.arc]) + 1e-9 * max(
                    1.0, l.usable_capacity(w[l.arc])) for l in links):
                continue
            st = _minimal_states(instance, options, loads.arcs, rates)
            if st is None:
                continue
            _, y = st
            through_asleep = any(
                not y[n] and (loads.nodes[n] > LOAD_TOL) for n in instance.node_ids)
            if through_asleep:
                continue
            power = _power(instance, w, y, loads.arcs, rates)
            key = ws + tuple(combo)
            best.offer(power, key, (w, y, loads.demand_flows, weights))
    if best.payload is None:
        return _finish(variant, best, clock)
    w, y, flows, weights = best.payload
    state = PeriodState(dict(y), dict(w), {k: dict(v) for k, v in flows.items()})
    return _finish(variant, best, clock, periods=[state], weights=weights)
