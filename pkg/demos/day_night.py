"""Day/night planning: waking devices costs energy, so the night plan depends on the day.

Compares the coupled multi-period optimum with solving each period on its own
as the reactivation fraction grows.

Run: python3 demos/day_night.py
"""

from eanm import (Demand, Instance, LinkSpec, NodeSpec, Variant, build_model,
                  multiperiod_sequential, solve_milp, validate_solution)
from eanm.variants import SLEEP


def network(delta: float) -> Instance:
    links = [LinkSpec("A", "C", 5, fixed_power=1), LinkSpec("C", "B", 5, fixed_power=1),
             LinkSpec("A", "D", 10, fixed_power=2), LinkSpec("D", "B", 10, fixed_power=2)]
    nodes = [NodeSpec("A", 1), NodeSpec("B", 1), NodeSpec("C", 10), NodeSpec("D", 10)]
    demand = Demand("A", "B", 0, per_period_rates={"night": 4.0, "day": 8.0})
    return Instance(tuple(nodes), tuple(links), (demand,), periods=("night", "day"),
                    reactivation_fraction=delta, name="relays")


def main() -> None:
    print(" delta  coupled  sequential")
    for delta in (0.0, 0.25, 0.5, 1.0):
        inst = network(delta)
        coupled = solve_milp(build_model(inst, Variant(energy=SLEEP, multiperiod=True))[0])
        seq = multiperiod_sequential(inst, "milp")
        assert validate_solution(inst, seq).passed
        print(f"{delta:6.2f} {coupled.objective:8.2f} {seq.power:11.2f}")


if __name__ == "__main__":
    main()
