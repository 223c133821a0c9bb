"""Energy-aware network management: models, exact solvers, heuristics and checks."""

from .formulations import (build_energy_model, build_model, build_multiperiod_model,
                           build_protection_model, build_routing_model, build_sp_ecmp_model,
                           extract_solution)
from .heuristics import Feasibility, SortPolicy, greedy_sleep, multiperiod_sequential
from .instance_io import InstanceParseError, load_instance, loads_instance, save_instance
from .lp import LinearProgram, LpSolution, solve_lp
from .milp import MilpModel, MilpSolution, export_lp_file, import_lp_file, solve_milp
from .model import Demand, Instance, LinkSpec, NodeSpec, RateConfig, evaluate_power
from .oracle import LimitExceeded, OracleLimits, brute_force_optimum
from .routing import compute_ecmp_loads, k_shortest_paths, min_cost_routing, routable
from .solution import PeriodState, Solution
from .validator import ValidationReport, validate_solution
from .variants import EnergyOptions, ProtectionMode, RoutingScheme, Variant

__version__ = "0.1.0"

__all__ = [
    "Demand", "EnergyOptions", "Feasibility", "Instance", "InstanceParseError", "LimitExceeded",
    "LinearProgram", "LinkSpec", "LpSolution", "MilpModel", "MilpSolution", "NodeSpec",
    "OracleLimits", "PeriodState", "ProtectionMode", "RateConfig", "RoutingScheme", "Solution",
    "SortPolicy", "ValidationReport", "Variant", "brute_force_optimum", "build_energy_model",
    "build_model", "build_multiperiod_model", "build_protection_model", "build_routing_model",
    "build_sp_ecmp_model", "compute_ecmp_loads", "evaluate_power", "export_lp_file",
    "extract_solution", "greedy_sleep", "import_lp_file", "k_shortest_paths", "load_instance",
    "loads_instance", "min_cost_routing", "multiperiod_sequential", "routable", "save_instance",
    "solve_lp", "solve_milp", "validate_solution",
]
