"""Greedy device switch-off and a sequential multi-period heuristic."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .milp import solve_milp
from .model import LOAD_TOL, Arc, Demand, Instance, node_loads, validate_instance
from .routing import LoadMap, RoutingError, compute_ecmp_loads, default_weights, routable
from .solution import PeriodState, Solution
from .validator import recompute_power
from .variants import PER_FLOW, SINGLE_PATH, SLEEP, EnergyOptions, RoutingScheme, Variant

RANDOM = "random"
LEAST_FLOW_FIRST = "least_flow_first"
LEAST_POWER_SAVING_LAST = "least_power_saving_last"
LEAST_DEGREE_FIRST = "least_degree_first"
POLICIES = (RANDOM, LEAST_FLOW_FIRST, LEAST_POWER_SAVING_LAST, LEAST_DEGREE_FIRST)
_ALIASES = {"highest_power_first": LEAST_POWER_SAVING_LAST}


@dataclass(frozen=True)
class SortPolicy:
    """Order in which devices are offered for switch-off.

    ``least_power_saving_last`` tries the devices with the highest fixed power
    first. ``random`` shuffles with ``seed``.
    """

    kind: str = LEAST_FLOW_FIRST
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", _ALIASES.get(self.kind, self.kind))
        if self.kind not in POLICIES:
            raise ValueError(f"unknown sort policy {self.kind!r}")


@dataclass(frozen=True)
class Feasibility:
    """Routability test used to accept a switch-off.

    ``lp``: splittable routing LP; ``ksp``: first-fit of whole demands on
    their ``k`` shortest paths; ``ecmp``: equal-cost multipath loads under
    ``weights`` (sleeping links pushed to the maximum weight).
    """

    kind: str = "lp"
    k: int = 3
    weights: Optional[Mapping[Arc, float]] = None

    def __post_init__(self):
        if self.kind not in ("lp", "ksp", "ecmp"):
            raise ValueError(f"unknown feasibility test {self.kind!r}")
        if self.k < 1:
            raise ValueError("ksp needs k >= 1")

    @classmethod
    def parse(cls, text: str) -> "Feasibility":
        """``lp``, ``ksp`` or ``ksp:K``, ``ecmp``."""
        kind, _, arg = text.partition(":")
        if kind == "ksp" and arg:
            return cls("ksp", int(arg))
        if arg:
            raise ValueError(f"feasibility {kind!r} takes no argument")
        return cls(kind)

    def label(self) -> str:
        return f"ksp:{self.k}" if self.kind == "ksp" else self.kind


def assign_sleeping_weights(weights: Mapping[Arc, float], states: Mapping[Arc, int],
                            omega_max: float, instance: Optional[Instance] = None
                            ) -> dict[Arc, float]:
    """Push sleeping links to ``omega_max``; active links keep their weight.

    With ``instance`` a link in a rate configuration of zero capacity counts
    as asleep; otherwise a state of zero does.
    """
    out = {}
    for a, w in weights.items():
        if not 1.0 <= w <= omega_max:
            raise ValueError(f"weight {w} of {a} outside [1, {omega_max}]")
        s = states.get(a, 1)
        if instance is not None and instance.link(a).rate_configs:
            on = instance.link(a).rate_configs[s].capacity > 0
        else:
            on = s > 0
        out[a] = w if on else float(omega_max)
    return out


def _with_rates(instance: Instance, traffic: Sequence[float]) -> Instance:
    demands = tuple(Demand(d.origin, d.destination, float(r)) for d, r in zip(instance.demands, traffic))
    return Instance(instance.nodes, instance.links, demands, None, instance.reactivation_fraction,
                    instance.max_reactivations, instance.omega_max, instance.big_m,
                    instance.name, instance.flow_unit)


def _is_on(link, state: int) -> bool:
    if link.rate_configs:
        return link.rate_configs[state].capacity > 0
    return state > 0


def _ecmp_weights(instance: Instance, feas: Feasibility) -> dict[Arc, float]:
    base = dict(feas.weights) if feas.weights is not None else default_weights(instance)
    return {a: min(max(base[a], 1.0), instance.omega_max) for a in instance.arcs}


def _test(instance: Instance, feas: Feasibility, links: dict[Arc, int],
          nodes: dict[str, int]) -> Optional[tuple[LoadMap, Optional[dict[Arc, float]]]]:
    """Routing witness (and ECMP weights) for the given states, or ``None``."""
    if feas.kind in ("lp", "ksp"):
        ok, witness = routable(instance, links, method=feas.kind, k=feas.k,
                               weights=feas.weights, node_states=nodes)
        return (witness, None) if ok else None
    weights = assign_sleeping_weights(_ecmp_weights(instance, feas), links,
                                      instance.omega_max, instance)
    try:
        loads = compute_ecmp_loads(instance, weights)
    except RoutingError:
        return None
    for link in instance.links:
        cap = link.usable_capacity(links[link.arc])
        if loads.arcs[link.arc] > cap + 1e-9 * max(1.0, cap):
            return None
    for n, load in loads.nodes.items():
        through = load + sum(f for a, f in loads.arcs.items() if a[0] == n)
        if not nodes[n] and through > LOAD_TOL:
            return None
    return loads, weights


def _variant(options: EnergyOptions, feas: Feasibility) -> Variant:
    if feas.kind == "ecmp":
        return Variant(energy=options, shortest_path=True)
    if feas.kind == "ksp":
        return Variant(RoutingScheme(SINGLE_PATH), energy=options)
    return Variant(energy=options)


def _solution(instance, options, feas, links, nodes, witness, weights, info) -> Solution:
    flows = {k: {a: f for a, f in witness.demand_flows.get(k, {}).items() if f > 0}
             for k in range(len(instance.demands))}
    state = PeriodState(dict(nodes), dict(links), flows)
    if feas.kind == "ksp":
        state.paths = {}
        for k, d in enumerate(instance.demands):
            state.paths[k] = _order_path(flows[k], d.origin, d.destination)
    sol = Solution(_variant(options, feas), [state], weights=weights, status="feasible",
                   info=info)
    sol.power = recompute_power(instance, sol)
    return sol


def _order_path(arcs: Mapping[Arc, float], origin: str, dest: str) -> list[Arc]:
    nxt = {a[0]: a for a in arcs}
    path, v = [], origin
    while v != dest and v in nxt:
        path.append(nxt[v])
        v = nxt[v][1]
    return path


def greedy_sleep(instance: Instance, policy: SortPolicy = SortPolicy(),
                 feasibility: Feasibility | str = "lp",
                 traffic: Optional[Sequence[float]] = None,
                 options: EnergyOptions = SLEEP, static_order: bool = False,
                 pinned: Optional[Mapping[Arc, int]] = None) -> Solution:
    """Switch devices off one at a time while the traffic stays routable.

    Links (or single cards of bundled links, or lower rate configurations)
    are offered first, in policy order; a node is offered once all its links
    sleep and it terminates no traffic. A switch-off is kept only if the
    traffic stays routable and the total power does not rise; a rejected
    candidate is dropped for good. ``least_flow_first`` re-sorts after every
    accepted switch-off unless ``static_order`` is set. ``pinned`` gives
    per-arc minimum card counts (for rate configurations: any nonzero value
    keeps the link on).

    Returns a solution with status ``infeasible`` when even the all-on
    network cannot carry the traffic.
    """
    problems = validate_instance(instance)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(problems))
    if traffic is not None:
        instance = _with_rates(instance, traffic)
    elif instance.multiperiod:
        raise ValueError("multi-period instance: give traffic or use multiperiod_sequential")
    feas = Feasibility.parse(feasibility) if isinstance(feasibility, str) else feasibility
    if any(l.rate_configs for l in instance.links) != options.alr or (
            options.alr and not all(l.rate_configs for l in instance.links)):
        raise ValueError("the alr option must match the links' rate configurations")
    if feas.kind == "ecmp" and (options.bundled or options.alr):
        raise ValueError("ecmp feasibility uses on/off links")
    pinned = dict(pinned or {})
    rng = random.Random(policy.seed)

    links = {}
    for l in instance.links:
        if l.rate_configs:
            caps = [rc.capacity for rc in l.rate_configs]
            links[l.arc] = caps.index(max(caps))
        else:
            links[l.arc] = l.num_cards
    nodes = {n: 1 for n in instance.node_ids}
    first = _test(instance, feas, links, nodes)
    if first is None:
        return Solution(_variant(options, feas), [], math.nan, status="infeasible",
                        info={"policy": policy.kind, "feasibility": feas.label()})
    witness, weights = first
    info = {"policy": policy.kind, "seed": policy.seed, "feasibility": feas.label(),
            "static_order": static_order, "accepted": [], "trajectory": []}
    power = _solution(instance, options, feas, links, nodes, witness, weights, {}).power
    info["trajectory"].append(power)

    def attempt(trial_links, trial_nodes):
        """Witness, weights and power of a trial state; None if unroutable or costlier."""
        res = _test(instance, feas, trial_links, trial_nodes)
        if res is None:
            return None
        p = _solution(instance, options, feas, trial_links, trial_nodes, *res, {}).power
        # load-dependent costs can make a switch-off cost more than it saves
        if p > power + 1e-9 * max(1.0, abs(power)):
            return None
        return res + (p,)

    degree = {n: instance.degree(n) for n in instance.node_ids}

    def link_power(l) -> float:
        if l.rate_configs:
            return l.rate_configs[links[l.arc]].power
        return l.fixed_power * (1 if options.bundled else l.num_cards)

    def order(cands: list, load_of, power_of, degree_of, fresh: bool) -> list:
        cands = sorted(cands)
        if policy.kind == RANDOM:
            if fresh:
                rng.shuffle(cands)
            return cands
        if policy.kind == LEAST_FLOW_FIRST:
            return sorted(cands, key=lambda c: (load_of(c), c))
        if policy.kind == LEAST_POWER_SAVING_LAST:
            return sorted(cands, key=lambda c: (-power_of(c), c))
        return sorted(cands, key=lambda c: (degree_of(c), c))

    # link phase: one candidate per card (bundled) or per link
    if options.sleep_links:
        cands = []
        for l in instance.links:
            count = l.num_cards if (options.bundled and not l.rate_configs) else 1
            cands += [(l.arc[0], l.arc[1], c) for c in range(count)]
        lk = {c: instance.link((c[0], c[1])) for c in cands}
        remaining = order(cands, lambda c: witness.arcs[(c[0], c[1])],
                          lambda c: link_power(lk[c]),
                          lambda c: degree[c[0]] + degree[c[1]], True)
        while remaining:
            c = remaining.pop(0)
            a = (c[0], c[1])
            link = lk[c]
            floor = pinned.get(a, 0)
            if link.rate_configs:
                current = link.rate_configs[links[a]]
                lower = [e for e, rc in enumerate(link.rate_configs)
                         if rc.capacity < current.capacity and not (floor and rc.capacity == 0)]
                tries = sorted(lower, key=lambda e: (link.rate_configs[e].power, e))
            else:
                tries = [links[a] - 1] if links[a] - 1 >= floor and links[a] > 0 else []
                if not options.bundled and tries:
                    tries = [0] if floor == 0 else []
            for state in tries:
                trial = dict(links)
                trial[a] = state
                res = attempt(trial, nodes)
                if res is not None:
                    links = trial
                    witness, weights, power = res
                    info["accepted"].append([a[0], a[1], state])
                    info["trajectory"].append(power)
                    break
            if policy.kind == LEAST_FLOW_FIRST and not static_order:
                remaining = sorted(remaining, key=lambda c: (witness.arcs[(c[0], c[1])], c))

    if options.sleep_nodes:
        ends = {n for d in instance.demands if d.rate > 0 for n in (d.origin, d.destination)}
        cands = [n for n in instance.node_ids if n not in ends and not any(
            _is_on(instance.link(a), links[a])
            for a in instance.out_arcs(n) + instance.in_arcs(n))]
        loads = node_loads(instance, witness.arcs)
        for n in order(cands, lambda n: loads[n], lambda n: instance.node(n).fixed_power,
                       lambda n: degree[n], True):
            trial = dict(nodes)
            trial[n] = 0
            res = attempt(links, trial)
            if res is not None:
                nodes = trial
                witness, weights, power = res
                info["accepted"].append([n])
                info["trajectory"].append(power)
    return _solution(instance, options, feas, links, nodes, witness, weights, info)


# ------------------------------------------------------------- multi-period

CHRONOLOGICAL = "chronological"
ASCENDING_LOAD = "ascending_load"


def _solve_period_milp(instance: Instance, options: EnergyOptions,
                       pins: Mapping[Arc, int], node_limit: int) -> Optional[Solution]:
    from .formulations import build_energy_model, extract_solution

    model, sym = build_energy_model(instance, RoutingScheme(PER_FLOW), options)
    for a, floor in pins.items():
        link = instance.link(a)
        if options.alr:
            for e, rc in enumerate(link.rate_configs):
                if rc.capacity == 0 and floor > 0:
                    model.lp.variable(sym.get("w_cfg", a + (e,))).upper = 0.0
        elif options.bundled:
            v = model.lp.variable(sym.get("w", a))
            v.lower = max(v.lower, float(floor))
        elif floor > 0:
            model.lp.variable(sym.get("w", a)).lower = 1.0
    res = solve_milp(model, node_limit=node_limit)
    if not res.has_incumbent:
        return None
    return extract_solution(instance, Variant(energy=options), sym, res)


def multiperiod_sequential(instance: Instance, method: str = "greedy",
                           link_period_order: str = CHRONOLOGICAL,
                           options: EnergyOptions = SLEEP,
                           policy: SortPolicy = SortPolicy(),
                           feasibility: Feasibility | str = "lp",
                           node_limit: int = 200_000) -> Solution:
    """Solve every period on its own, then repair reactivation-cap violations.

    Periods are solved with ``method`` (``milp`` or ``greedy``). When a card
    would be reactivated more often than the cap allows, the link is pinned
    on in the period before one of its reactivations and that period is
    solved again. ``link_period_order`` picks that period: the earliest one
    (``chronological``) or the one with the least traffic (``ascending_load``).
    Reactivation charges are added to the reported power.
    """
    if method not in ("milp", "greedy"):
        raise ValueError(f"unknown per-period method {method!r}")
    if link_period_order not in (CHRONOLOGICAL, ASCENDING_LOAD):
        raise ValueError(f"unknown link_period_order {link_period_order!r}")
    if not instance.periods:
        raise ValueError("multi-period heuristic needs instance.periods")
    problems = validate_instance(instance)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(problems))
    feas = Feasibility.parse(feasibility) if isinstance(feasibility, str) else feasibility
    if feas.kind != "lp":
        feas = Feasibility("lp")  # multi-period solutions use splittable routing
    periods = list(instance.periods)
    pins: dict[str, dict[Arc, int]] = {p: {} for p in periods}
    states: dict[str, PeriodState] = {}
    traffic = {p: sum(instance.rates(p)) for p in periods}
    eta = instance.reactivation_cap

    def solve(p: str) -> PeriodState:
        sub = instance.for_period(p)
        if method == "milp":
            sol = _solve_period_milp(sub, options, pins[p], node_limit)
        else:
            sol = greedy_sleep(sub, policy, feas, options=options, pinned=pins[p])
            if sol.status == "infeasible":
                sol = None
        if sol is None:
            raise RoutingError(f"period {p} cannot be routed even with every device on")
        return sol.state

    variant = Variant(energy=options, multiperiod=True)
    try:
        for p in periods:
            states[p] = solve(p)
        repairs = 0
        while True:
            worst = None
            for link in instance.links:
                units = link.num_cards if options.bundled else 1
                if _count_ups(link, states, periods, options) > units * eta:
                    ups = [(periods[s - 1], states[p].links[link.arc])
                           for s, p in enumerate(periods)
                           if _ups(link, states[periods[s - 1]].links[link.arc],
                                   states[p].links[link.arc], options)]
                    worst = (link.arc, ups)
                    break
            if worst is None:
                break
            a, ups = worst
            if link_period_order == CHRONOLOGICAL:
                prev, level = ups[0]
            else:
                prev, level = min(ups, key=lambda u: (traffic[u[0]], periods.index(u[0])))
            link = instance.link(a)
            pins[prev][a] = max(pins[prev].get(a, 0), 1 if link.rate_configs else level)
            states[prev] = solve(prev)
            repairs += 1
    except RoutingError as exc:
        return Solution(variant, [], math.nan, status="infeasible", info={"error": str(exc)})
    sol = Solution(variant, [states[p] for p in periods], status="feasible",
                   info={"method": method, "link_period_order": link_period_order,
                         "repairs": repairs,
                         "pinned": {p: [[a[0], a[1], v] for a, v in sorted(pins[p].items())]
                                    for p in periods}})
    sol.power = recompute_power(instance, sol)
    return sol


def _ups(link, before: int, after: int, options: EnergyOptions) -> int:
    """Units (cards, or the whole link) woken between two consecutive states."""
    if link.rate_configs or not options.bundled:
        return int(_is_on(link, after) and not _is_on(link, before))
    return max(0, after - before)


def _count_ups(link, states, periods, options) -> int:
    return sum(_ups(link, states[periods[s - 1]].links[link.arc], states[p].links[link.arc],
                    options) for s, p in enumerate(periods))
