"""How much power does sleeping save on a small ring, and how close does greedy get?

Run: python3 demos/sleep_savings.py
"""

from eanm import (Demand, Instance, LinkSpec, NodeSpec, SortPolicy, Variant, build_model,
                  extract_solution, greedy_sleep, solve_milp, validate_solution)
from eanm.variants import SLEEP


def ring(n: int = 6) -> Instance:
    ids = [f"r{k}" for k in range(n)]
    links = []
    for k in range(n):
        a, b = ids[k], ids[(k + 1) % n]
        links += [LinkSpec(a, b, 10, fixed_power=4, per_unit_power=0.1),
                  LinkSpec(b, a, 10, fixed_power=4, per_unit_power=0.1)]
    nodes = [NodeSpec(i, 9, 0.1) for i in ids]
    demands = [Demand("r0", "r3", 4), Demand("r1", "r4", 3), Demand("r5", "r2", 2)]
    return Instance(tuple(nodes), tuple(links), tuple(demands), name="ring6")


def main() -> None:
    inst = ring()
    all_on = solve_milp(build_model(inst, Variant())[0])
    print(f"every device on, cheapest routing: {all_on.objective:7.2f} W")

    variant = Variant(energy=SLEEP)
    model, sym = build_model(inst, variant)
    res = solve_milp(model)
    best = extract_solution(inst, variant, sym, res)
    asleep = [a for a, s in best.state.links.items() if s == 0]
    print(f"optimal sleep schedule:            {res.objective:7.2f} W "
          f"({len(asleep)} of {len(inst.links)} arcs asleep, {res.nodes} B&B nodes)")

    for policy in ("least_flow_first", "least_power_saving_last", "least_degree_first"):
        sol = greedy_sleep(inst, SortPolicy(policy))
        ok = validate_solution(inst, sol).passed
        print(f"greedy {policy:24s}   {sol.power:7.2f} W  "
              f"gap {sol.power - res.objective:5.2f} W  valid={ok}")


if __name__ == "__main__":
    main()
