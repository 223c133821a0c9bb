"""Independent feasibility and power checks for solutions of any variant.

Nothing here reuses the model builders: every constraint family is
re-derived from the instance data and the raw solution states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from .model import LOAD_TOL, Arc, Instance, InconsistentStateError, evaluate_power, node_loads
from .routing import RoutingError, compute_ecmp_loads
from .solution import PeriodState, Solution
from .variants import PER_PATH, SINGLE_PATH, ProtectionMode

FAMILIES = ("domain", "conservation", "capacity", "coherence", "node_load", "fixed_routing",
            "disjointness", "shared_capacity", "survivability", "switching", "weights",
            "ecmp", "power")


@dataclass
class Check:
    family: str
    passed: bool
    violation: float = 0.0
    element: Any = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)
    power: float = math.nan
    reported_power: float = math.nan

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def family(self, name: str) -> Check:
        for c in self.checks:
            if c.family == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        def elem(e):
            if isinstance(e, tuple):
                return [elem(x) for x in e]
            return e

        return {
            "passed": self.passed,
            "power": self.power if math.isfinite(self.power) else None,
            "reported_power": self.reported_power if math.isfinite(self.reported_power) else None,
            "checks": [{"family": c.family, "passed": c.passed, "violation": c.violation,
                        "element": elem(c.element), "detail": c.detail} for c in self.checks],
        }


class _Family:
    """Accumulates the worst violation of one constraint family."""

    def __init__(self, name: str, tol: float):
        self.name = name
        self.tol = tol
        self.worst = 0.0
        self.element = None
        self.detail = ""

    def record(self, amount: float, element, detail: str = "", scale: float = 1.0) -> None:
        if amount > self.tol * max(1.0, abs(scale)) and amount > self.worst:
            self.worst = float(amount)
            self.element = element
            self.detail = detail

    def check(self) -> Check:
        return Check(self.name, self.worst == 0.0, self.worst, self.element, self.detail)


def _mismatch(instance: Instance, solution: Solution) -> Optional[str]:
    v = solution.variant
    if v.multiperiod:
        if not instance.periods:
            return "multi-period solution for an instance without periods"
        if len(solution.periods) != len(instance.periods):
            return f"solution has {len(solution.periods)} periods, instance {len(instance.periods)}"
    elif len(solution.periods) != 1:
        return "single-period variant needs exactly one period state"
    if v.energy is not None and v.energy.alr and any(not l.rate_configs for l in instance.links):
        return "alr solution for links without rate configurations"
    if v.energy is not None and not v.energy.alr and any(l.rate_configs for l in instance.links):
        return "links with rate configurations need the alr option"
    if v.protection != ProtectionMode.NONE and any(p.backup is None for p in solution.periods):
        return "protected variant without backup paths"
    if v.shortest_path and solution.weights is None:
        return "shortest-path variant without link weights"
    for p in solution.periods:
        if set(p.nodes) != set(instance.node_ids) or set(p.links) != set(instance.arcs):
            return "device states do not cover the instance"
    return None


def _period_ids(instance: Instance, solution: Solution) -> list[Optional[str]]:
    return list(instance.periods) if solution.variant.multiperiod else [None]


def _link_on(link, state: int) -> bool:
    if link.rate_configs:
        return link.rate_configs[state].capacity > 0
    return state > 0


def _path_ok(instance: Instance, path: Sequence[Arc], origin: str, dest: str) -> bool:
    if not path:
        return origin == dest
    nodes = [path[0][0]] + [a[1] for a in path]
    return (nodes[0] == origin and nodes[-1] == dest and len(set(nodes)) == len(nodes)
            and all(instance.has_arc(tuple(a)) for a in path)
            and all(path[k][1] == path[k + 1][0] for k in range(len(path) - 1)))


def _reservation(instance: Instance, state: PeriodState, rates, mode: ProtectionMode,
                 failed: Optional[Arc] = None) -> dict[Arc, float]:
    """Bandwidth held on each arc: primaries plus backups as the mode dictates.

    With ``failed`` set (shared mode) only demands whose primary uses that arc
    add their backup.
    """
    out = {a: 0.0 for a in instance.arcs}
    for k, path in (state.paths or {}).items():
        for a in path:
            out[tuple(a)] += rates[k]
    for k, backup in (state.backup or {}).items():
        if mode.shared and (failed is None or failed not in {tuple(a) for a in state.paths[k]}):
            continue
        for a in backup:
            out[tuple(a)] += rates[k]
    return out


def _shared_reservation(instance, state, rates, mode) -> dict[Arc, float]:
    worst = _reservation(instance, state, rates, mode)
    for c in instance.arcs:
        scen = _reservation(instance, state, rates, mode, failed=c)
        for a, v in scen.items():
            if a != c:
                worst[a] = max(worst[a], v)
    return worst


def _power_loads(instance, solution, state, rates) -> dict[Arc, float]:
    """Arc loads that drive load-dependent power."""
    mode = solution.variant.protection
    if mode == ProtectionMode.NONE or mode.smart:
        return state.arc_loads()
    if mode.shared:
        return _shared_reservation(instance, state, rates, mode)
    return _reservation(instance, state, rates, mode)


def recompute_power(instance: Instance, solution: Solution) -> float:
    """Total power from device states and flows, including reactivation charges.

    Under smart protection a sleepable device counts as active only if it
    carries primary traffic. Raises :class:`InconsistentStateError` when a
    sleeping device carries load.
    """
    v = solution.variant
    smart = v.protection.smart
    energy = v.energy
    total = 0.0
    for pid, state in zip(_period_ids(instance, solution), solution.periods):
        rates = instance.rates(pid)
        loads = _power_loads(instance, solution, state, rates)
        nloads = node_loads(instance, loads, rates)
        for link in instance.links:
            s = state.links[link.arc]
            load = loads.get(link.arc, 0.0)
            if smart and (energy is None or energy.sleep_links):
                if load <= LOAD_TOL:
                    continue
                s = link.num_cards
            total += evaluate_power(link, load, s)
        for node in instance.nodes:
            s = state.nodes[node.id]
            load = nloads[node.id]
            if smart and (energy is None or energy.sleep_nodes):
                if load <= LOAD_TOL:
                    continue
                s = 1
            total += evaluate_power(node, load, s)
    if v.multiperiod and len(solution.periods) > 1:
        delta = instance.reactivation_fraction
        for node in instance.nodes:
            for s, state in enumerate(solution.periods):
                prev = solution.periods[s - 1]
                total += delta * node.fixed_power * max(0, state.nodes[node.id]
                                                        - prev.nodes[node.id])
    return total


def validate_solution(instance: Instance, solution: Solution,
                      tolerance: float = 1e-6) -> ValidationReport:
    """Check every constraint family that applies to the solution's variant."""
    problem = _mismatch(instance, solution)
    if problem:
        raise ValueError(f"variant mismatch: {problem}")
    v = solution.variant
    energy = v.energy
    mode = v.protection
    protected = mode != ProtectionMode.NONE
    fam = {name: _Family(name, tolerance) for name in FAMILIES}
    pids = _period_ids(instance, solution)

    for pid, state in zip(pids, solution.periods):
        where = () if pid is None else (pid,)
        rates = instance.rates(pid)

        # device state domains
        for node in instance.nodes:
            s = state.nodes[node.id]
            if s not in (0, 1):
                fam["domain"].record(abs(s - 0.5) + 0.5, where + (node.id,), "node state not 0/1")
            elif s == 0 and (energy is None or not energy.sleep_nodes):
                fam["domain"].record(1.0, where + (node.id,), "node may not sleep")
        for link in instance.links:
            s = state.links[link.arc]
            el = where + link.arc
            if link.rate_configs and energy is not None and energy.alr:
                if not 0 <= s < len(link.rate_configs) or s != int(s):
                    fam["domain"].record(1.0, el, "config index out of range")
                elif not energy.sleep_links and not _link_on(link, s):
                    fam["domain"].record(1.0, el, "link may not sleep")
                continue
            if link.rate_configs and energy is None:
                if not 0 <= s < len(link.rate_configs):
                    fam["domain"].record(1.0, el, "config index out of range")
                continue
            if s != int(s) or not 0 <= s <= link.num_cards:
                fam["domain"].record(max(s - link.num_cards, -s, 1.0), el, "card count out of range")
            elif energy is None or not energy.sleep_links:
                if s != link.num_cards:
                    fam["domain"].record(link.num_cards - s, el, "link may not sleep")
            elif not energy.bundled and s not in (0, link.num_cards):
                fam["domain"].record(min(s, link.num_cards - s), el, "cards of an unbundled link switch together")
        for k, per_arc in state.flows.items():
            for a, f in per_arc.items():
                if not instance.has_arc(tuple(a)):
                    fam["domain"].record(abs(f) + 1.0, where + (k,) + tuple(a), "flow on a missing arc")
                elif f < 0:
                    fam["domain"].record(-f, where + (k,) + tuple(a), "negative flow")

        # conservation and routing scheme
        for k, d in enumerate(instance.demands):
            flows = state.flows.get(k, {})
            for n in instance.node_ids:
                out = sum(f for a, f in flows.items() if a[0] == n)
                inn = sum(f for a, f in flows.items() if a[1] == n)
                want = rates[k] if n == d.origin else -rates[k] if n == d.destination else 0.0
                fam["conservation"].record(abs(out - inn - want), where + (k, n),
                                           "flow balance", rates[k])
            unsplittable = protected or v.scheme.unsplittable
            if unsplittable:
                path = (state.paths or {}).get(k)
                if path is None or not _path_ok(instance, path, d.origin, d.destination):
                    fam["conservation"].record(max(rates[k], 1.0), where + (k,),
                                               "missing or broken path")
                    continue
                on = {tuple(a) for a in path}
                for a in instance.arcs:
                    want = rates[k] if a in on else 0.0
                    fam["conservation"].record(abs(flows.get(a, 0.0) - want), where + (k,) + a,
                                               "flow off the single path", rates[k])
                if v.scheme.kind == PER_PATH and tuple(map(tuple, path)) not in v.scheme.paths[k]:
                    fam["conservation"].record(max(rates[k], 1.0), where + (k,),
                                               "path not among the candidates")
            elif v.scheme.kind == PER_PATH:
                allowed = {a for p in v.scheme.paths[k] for a in p}
                for a, f in flows.items():
                    if tuple(a) not in allowed:
                        fam["conservation"].record(abs(f), where + (k,) + tuple(a),
                                                   "flow outside the candidate paths", rates[k])

        # capacity against the active cards / configuration
        if protected:
            # shared mode: primaries only here, backups are checked per failure
            held = _reservation(instance, state, rates, mode)
        else:
            held = state.arc_loads()
        for link in instance.links:
            s = state.links[link.arc]
            try:
                cap = link.usable_capacity(int(s))
            except (IndexError, TypeError):
                continue
            load = held.get(link.arc, 0.0)
            fam["capacity"].record(load - cap, where + link.arc, "load above usable capacity", cap)

        # coherence and traffic on sleeping nodes
        for link in instance.links:
            s = state.links[link.arc]
            try:
                on = _link_on(link, int(s))
            except IndexError:
                continue
            if on:
                for n in link.arc:
                    if state.nodes[n] == 0:
                        fam["coherence"].record(1.0, where + link.arc,
                                                f"active link at sleeping node {n}")
        nl = node_loads(instance, held, rates)
        for n in instance.node_ids:
            through = nl[n] + sum(f for a, f in held.items() if a[0] == n)
            if state.nodes[n] == 0:
                fam["node_load"].record(through, where + (n,), "traffic at a sleeping node")

        if protected:
            _check_protection(instance, state, rates, mode, fam, where)

    if v.multiperiod:
        _check_periods(instance, solution, pids, fam)
    if v.shortest_path:
        _check_ecmp(instance, solution, fam)

    report = ValidationReport(reported_power=solution.power)
    try:
        report.power = recompute_power(instance, solution)
        gap = abs(report.power - solution.power) if math.isfinite(solution.power) else math.inf
        fam["power"].record(gap, None, "reported power differs from recomputed power",
                            report.power)
    except InconsistentStateError as exc:
        fam["power"].record(math.inf, None, str(exc))
    except (IndexError, ValueError) as exc:
        fam["power"].record(math.inf, None, f"power not computable: {exc}")

    applicable = ["domain", "conservation", "capacity", "coherence", "node_load", "power"]
    if protected:
        applicable += ["disjointness", "survivability"]
        if mode.shared:
            applicable.append("shared_capacity")
    if v.multiperiod:
        applicable.append("switching")
        if v.fixed_routing:
            applicable.append("fixed_routing")
    if v.shortest_path:
        applicable += ["weights", "ecmp"]
    report.checks = [fam[name].check() for name in FAMILIES if name in applicable]
    return report


def _check_protection(instance, state, rates, mode, fam, where) -> None:
    for k, d in enumerate(instance.demands):
        backup = (state.backup or {}).get(k)
        primary = (state.paths or {}).get(k)
        if backup is None or not _path_ok(instance, backup, d.origin, d.destination):
            fam["disjointness"].record(1.0, where + (k,), "missing or broken backup path")
            continue
        if primary is None:
            continue
        used = {tuple(a) for a in primary}
        for a in map(tuple, backup):
            if a in used or (a[1], a[0]) in used:
                fam["disjointness"].record(1.0, where + (k,) + a, "backup shares a link with primary")

    if mode.shared:
        for c in instance.arcs:
            scen = _reservation(instance, state, rates, mode, failed=c)
            for link in instance.links:
                if link.arc == c:
                    continue
                cap = link.usable_capacity(int(state.links[link.arc]))
                fam["shared_capacity"].record(scen[link.arc] - cap, where + link.arc + c,
                                              "backup load above capacity under a failure", cap)

    # reroute the affected demands onto their backups, one failed arc at a time
    for c in instance.arcs:
        load = {a: 0.0 for a in instance.arcs}
        for k in range(len(instance.demands)):
            primary = {tuple(a) for a in (state.paths or {}).get(k, [])}
            route = (state.backup or {}).get(k) if c in primary else (state.paths or {}).get(k)
            for a in map(tuple, route or []):
                if a == c:
                    fam["survivability"].record(max(rates[k], 1.0), where + c + (k,),
                                                "backup crosses the failed link")
                load[a] = load.get(a, 0.0) + rates[k]
        for link in instance.links:
            if link.arc == c:
                continue
            s = int(state.links[link.arc])
            if load[link.arc] > LOAD_TOL and not _link_on(link, s):
                fam["survivability"].record(load[link.arc], where + c + link.arc,
                                            "rerouted traffic on a sleeping link")
            cap = link.usable_capacity(s)
            fam["survivability"].record(load[link.arc] - cap, where + c + link.arc,
                                        "rerouted load above capacity", cap)
            for n in link.arc:
                if load[link.arc] > LOAD_TOL and state.nodes[n] == 0:
                    fam["survivability"].record(load[link.arc], where + c + (n,),
                                                "rerouted traffic at a sleeping node")


def _units_up(link, before: int, after: int, bundled: bool) -> int:
    """Cards woken between two states; an unbundled link wakes as one unit."""
    if link.rate_configs or not bundled:
        return int(_link_on(link, after) and not _link_on(link, before))
    return max(0, after - before)


def _check_periods(instance, solution, pids, fam) -> None:
    energy = solution.variant.energy
    eta = instance.reactivation_cap
    for link in instance.links:
        bundled = energy is not None and energy.bundled
        states = [p.links[link.arc] for p in solution.periods]
        ups = sum(_units_up(link, states[s - 1], states[s], bundled) for s in range(len(states)))
        units = link.num_cards if bundled and not link.rate_configs else 1
        fam["switching"].record(ups - units * eta, link.arc,
                                f"{ups} reactivations for {units} unit(s) capped at {eta} each")
    if solution.variant.fixed_routing:
        for k in range(len(instance.demands)):
            ref = None
            for pid, state in zip(pids, solution.periods):
                r = instance.rates(pid)[k]
                if r <= LOAD_TOL:
                    continue
                share = {a: state.flows.get(k, {}).get(a, 0.0) / r for a in instance.arcs}
                if ref is None:
                    ref = share
                    continue
                for a in instance.arcs:
                    fam["fixed_routing"].record(abs(share[a] - ref[a]), (pid, k) + a,
                                                "routing fraction differs between periods")


def _check_ecmp(instance, solution, fam) -> None:
    weights = solution.weights
    wmax = instance.omega_max
    state = solution.state
    for link in instance.links:
        w = weights.get(link.arc)
        if w is None:
            fam["weights"].record(math.inf, link.arc, "missing weight")
            continue
        fam["weights"].record(max(1.0 - w, w - wmax), link.arc, "weight outside [1, omega_max]")
        if not _link_on(link, int(state.links[link.arc])):
            fam["weights"].record(wmax - w, link.arc, "sleeping link below the maximum weight",
                                  wmax)
    if any(a not in weights for a in instance.arcs):
        return
    try:
        loads = compute_ecmp_loads(instance, weights)
    except RoutingError as exc:
        fam["ecmp"].record(math.inf, None, str(exc))
        return
    # compare destination aggregates: ECMP only fixes those
    mine: dict[str, dict[Arc, float]] = {}
    for k, per_arc in state.flows.items():
        t = instance.demands[k].destination
        bucket = mine.setdefault(t, {})
        for a, f in per_arc.items():
            bucket[tuple(a)] = bucket.get(tuple(a), 0.0) + f
    for t in {d.destination for d in instance.demands}:
        got = mine.get(t, {})
        want = loads.per_destination.get(t, {})
        for a in instance.arcs:
            fam["ecmp"].record(abs(got.get(a, 0.0) - want.get(a, 0.0)), (t,) + a,
                               "flow differs from equal-cost multipath split",
                               want.get(a, 0.0))
