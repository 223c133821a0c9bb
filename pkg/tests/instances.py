"""Small hand-built and seeded random instances shared by the tests."""

from __future__ import annotations

import random

from eanm.model import Demand, Instance, LinkSpec, NodeSpec, RateConfig


def make(nodes, links, demands, **kw) -> Instance:
    return Instance(nodes=tuple(nodes), links=tuple(links), demands=tuple(demands), **kw)


def two_node(**kw) -> Instance:
    return make([NodeSpec("A", 10), NodeSpec("B", 10)],
                [LinkSpec("A", "B", 10, fixed_power=3)],
                [Demand("A", "B", 5)], name="two_node", **kw)


def triangle(fixed: float = 1.0, per_unit: float = 0.0, rate: float = 4.0) -> Instance:
    links = [LinkSpec(a, b, 10, fixed_power=fixed, per_unit_power=per_unit)
             for a, b in ["AB", "AC", "CB"]]
    return make([NodeSpec(n) for n in "ABC"], links, [Demand("A", "B", rate)], name="triangle")


def chain(rate: float = 4.0) -> Instance:
    return make([NodeSpec(n, 1) for n in "ABC"],
                [LinkSpec(a, b, 10, fixed_power=1) for a, b in ["AB", "BC"]],
                [Demand("A", "C", rate)], name="chain")


def diamond(rate: float = 8.0, extra=(), weights=None, **kw) -> Instance:
    weights = weights or {}
    links = [LinkSpec(a, b, 10, fixed_power=1, weight=weights.get(a + b))
             for a, b in ["sa", "at", "sb", "bt"]]
    demands = [Demand("s", "t", rate)] + [Demand(o, d, r) for o, d, r in extra]
    return make([NodeSpec(n) for n in "sabt"], links, demands, name="diamond", **kw)


def square_ring(demands=(("A", "C", 2.0),), node_power: float = 1.0,
                link_power: float = 1.0) -> Instance:
    links = []
    for a, b in ["AB", "BC", "CD", "DA"]:
        links += [LinkSpec(a, b, 10, fixed_power=link_power),
                  LinkSpec(b, a, 10, fixed_power=link_power)]
    return make([NodeSpec(n, node_power) for n in "ABCD"], links,
                [Demand(o, d, r) for o, d, r in demands], name="ring")


def two_period(delta: float = 0.0, eta=2) -> Instance:
    return make([NodeSpec("A", 10), NodeSpec("B", 10)],
                [LinkSpec("A", "B", 10, fixed_power=3)],
                [Demand("A", "B", 5, per_period_rates={"p1": 5.0, "p2": 0.0})],
                periods=("p1", "p2"), reactivation_fraction=delta, max_reactivations=eta,
                name="two_period")


def alr_link(base: float = 10.0) -> LinkSpec:
    """100 Mbps / 1 Gbps / 10 Gbps line rates with the +4 W and +15 W steps."""
    return LinkSpec("A", "B", 10000, rate_configs=(
        RateConfig(0, 0), RateConfig(100, base), RateConfig(1000, base + 4),
        RateConfig(10000, base + 19)))


def greedy_trap() -> Instance:
    """Greedy sleeps the idle hub and is left with two pricey direct links.

    Demands s->t1 and s->t2 go either through hub h (6 + 1 + 1 W) or
    directly (5 + 5 W). With everything on, the shortest routing uses the
    direct links, so the hub links carry nothing and least_flow_first puts
    them to sleep first: greedy ends at 10 W against an optimum of 8 W.
    """
    links = [LinkSpec("s", "h", 10, fixed_power=6), LinkSpec("h", "t1", 10, fixed_power=1),
             LinkSpec("h", "t2", 10, fixed_power=1), LinkSpec("s", "t1", 10, fixed_power=5),
             LinkSpec("s", "t2", 10, fixed_power=5)]
    return make([NodeSpec(n) for n in ["s", "h", "t1", "t2"]], links,
                [Demand("s", "t1", 3), Demand("s", "t2", 3)], name="greedy_trap")


def random_instance(seed: int, max_nodes: int = 5, max_arcs: int = 8, max_demands: int = 4,
                    max_cards: int = 2, periods=None) -> Instance:
    """Connected random instance with integer data, usually feasible when all devices are on.

    A directed cycle through every node guarantees strong connectivity; the
    remaining arcs are drawn at random.
    """
    rng = random.Random(seed)
    n = rng.randint(3, max_nodes)
    ids = [chr(ord("A") + k) for k in range(n)]
    order = ids[:]
    rng.shuffle(order)
    arcs = [(order[k], order[(k + 1) % n]) for k in range(n)]
    others = [(a, b) for a in ids for b in ids if a != b and (a, b) not in arcs]
    rng.shuffle(others)
    arcs += others[:max(0, rng.randint(n, max_arcs) - n)]
    links = []
    for a, b in sorted(arcs):
        cards = rng.randint(1, max_cards)
        links.append(LinkSpec(a, b, float(rng.choice([6, 8, 10, 12])), num_cards=cards,
                              fixed_power=float(rng.randint(1, 6)),
                              per_unit_power=rng.choice([0.0, 0.0, 0.25, 0.5])))
    nodes = [NodeSpec(i, float(rng.randint(0, 8)), rng.choice([0.0, 0.0, 0.5])) for i in ids]
    demands = []
    for _ in range(rng.randint(1, max_demands)):
        o, d = rng.sample(ids, 2)
        if periods:
            per = {p: float(rng.randint(0, 6)) for p in periods}
            demands.append(Demand(o, d, 0.0, per_period_rates=per))
        else:
            demands.append(Demand(o, d, float(rng.randint(1, 5))))
    return make(nodes, links, demands, periods=tuple(periods) if periods else None,
                name=f"random{seed}")


def random_mesh(seed: int) -> Instance:
    """Bidirectional ring plus up to two chords, for protection tests."""
    rng = random.Random(seed)
    n = rng.randint(4, 5)
    ids = [chr(ord("A") + k) for k in range(n)]
    pairs = [(ids[k], ids[(k + 1) % n]) for k in range(n)]
    chords = [(ids[a], ids[b]) for a in range(n) for b in range(a + 2, n)
              if (a, b) != (0, n - 1)]
    rng.shuffle(chords)
    pairs += chords[:rng.randint(0, min(2, len(chords)))]
    links = []
    for a, b in pairs:
        for u, v in ((a, b), (b, a)):
            links.append(LinkSpec(u, v, 10, fixed_power=float(rng.randint(1, 4))))
    nodes = [NodeSpec(i, float(rng.randint(0, 3))) for i in ids]
    demands = []
    for _ in range(rng.randint(1, 2)):
        o, d = rng.sample(ids, 2)
        demands.append(Demand(o, d, float(rng.randint(1, 4))))
    return make(nodes, links, demands, name=f"mesh{seed}")
