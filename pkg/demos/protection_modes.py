"""Cost of surviving any single link failure under the four protection modes.

Run: python3 demos/protection_modes.py
"""

from eanm import (Demand, Instance, LinkSpec, NodeSpec, ProtectionMode, RoutingScheme,
                  Variant, build_model, extract_solution, solve_milp, validate_solution)
from eanm.variants import SINGLE_PATH, SLEEP


def mesh() -> Instance:
    pairs = [("A", "B"), ("B", "C"), ("C", "D"), ("D", "A"), ("A", "C")]
    links = []
    for a, b in pairs:
        links += [LinkSpec(a, b, 10, fixed_power=3), LinkSpec(b, a, 10, fixed_power=3)]
    nodes = [NodeSpec(n, 2) for n in "ABCD"]
    return Instance(tuple(nodes), tuple(links), (Demand("A", "C", 4), Demand("B", "D", 3)),
                    name="mesh4")


def main() -> None:
    inst = mesh()
    unprotected = solve_milp(build_model(inst, Variant(RoutingScheme(SINGLE_PATH), SLEEP))[0])
    print(f"{'none':16s} {unprotected.objective:6.1f} W")
    for mode in list(ProtectionMode)[1:]:
        variant = Variant(RoutingScheme(SINGLE_PATH), SLEEP, mode)
        model, sym = build_model(inst, variant)
        res = solve_milp(model)
        sol = extract_solution(inst, variant, sym, res)
        report = validate_solution(inst, sol)
        print(f"{mode.value:16s} {res.objective:6.1f} W  survives every single-arc failure: "
              f"{report.passed}")
        for k, d in enumerate(inst.demands):
            route = " ".join(a[0] for a in sol.state.paths[k]) + f" {d.destination}"
            backup = " ".join(a[0] for a in sol.state.backup[k]) + f" {d.destination}"
            print(f"    {d.origin}->{d.destination}: primary {route:8s} backup {backup}")


if __name__ == "__main__":
    main()
