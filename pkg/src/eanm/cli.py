"""Command-line entry point: solve, heuristic, oracle, export, validate.

Exit codes: 0 success (optimal or feasible; for ``validate``, all checks
pass), 1 usage or parse error, 2 infeasible (or failed validation),
3 limit reached.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
import time
import warnings
from typing import Optional, Sequence

from .formulations import build_model, extract_solution
from .heuristics import POLICIES, Feasibility, SortPolicy, greedy_sleep, multiperiod_sequential
from .instance_io import InstanceParseError, load_instance
from .lp import OPTIMAL, INFEASIBLE, solve_lp
from .milp import FEASIBLE, LIMIT_REACHED, MilpSolution, export_lp_file, solve_milp
from .model import Instance
from .oracle import LimitExceeded, OracleLimits, brute_force_optimum
from .routing import k_shortest_paths
from .solution import Solution
from .validator import ValidationReport, validate_solution
from .variants import (PER_FLOW, PER_PATH, PER_SOURCE, SINGLE_PATH, EnergyOptions,
                       ProtectionMode, RoutingScheme, Variant)

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 1, 2, 3

SCHEMES = {"per-flow": PER_FLOW, "per-source": PER_SOURCE, "per-path": PER_PATH,
           "single-path": SINGLE_PATH}


class UsageError(Exception):
    pass


# ----------------------------------------------------------------- variants

def _add_variant_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model variant")
    g.add_argument("--scheme", choices=sorted(SCHEMES), default=None,
                   help="default per-flow, or single-path with --protect")
    g.add_argument("--k-paths", type=int, default=3,
                   help="candidate paths per demand for --scheme per-path")
    g.add_argument("--binary-paths", action="store_true",
                   help="per-path routing picks exactly one candidate path")
    g.add_argument("--sleep", action="store_true", help="allow devices to sleep")
    g.add_argument("--bundled", action="store_true", help="links are bundles of sleepable cards")
    g.add_argument("--alr", action="store_true", help="links pick one rate configuration")
    g.add_argument("--big-m-coherence", action="store_true",
                   help="aggregate node-activation rows instead of pairwise ones")
    g.add_argument("--no-sleep-nodes", action="store_true")
    g.add_argument("--no-sleep-links", action="store_true")
    g.add_argument("--protect", choices=[m.value for m in ProtectionMode], default="none")
    g.add_argument("--multiperiod", action="store_true")
    g.add_argument("--fixed-routing", action="store_true",
                   help="multi-period: same routing fractions in every period")
    g.add_argument("--ecmp", action="store_true", help="shortest-path routing with link weights")


def _energy_from_args(args) -> EnergyOptions:
    return EnergyOptions(sleep_nodes=not args.no_sleep_nodes,
                         sleep_links=not args.no_sleep_links,
                         bundled=args.bundled, alr=args.alr,
                         use_big_m_coherence=args.big_m_coherence)


def variant_from_args(args, instance: Instance) -> Variant:
    if args.scheme is None:
        args.scheme = "single-path" if args.protect != "none" else "per-flow"
    kind = SCHEMES[args.scheme]
    paths = None
    if kind == PER_PATH:
        paths = {}
        for k in range(len(instance.demands)):
            found = k_shortest_paths(instance, None, k, args.k_paths)
            if not found:
                raise UsageError(f"demand {k} has no path")
            paths[k] = [tuple(p) for p in found]
    needs_energy = (args.sleep or args.bundled or args.alr or args.big_m_coherence
                    or args.protect != "none" or args.multiperiod or args.ecmp
                    or args.no_sleep_nodes or args.no_sleep_links)
    multiperiod = args.multiperiod or bool(instance.periods)
    try:
        return Variant(
            scheme=RoutingScheme(kind, paths, args.binary_paths),
            energy=_energy_from_args(args) if needs_energy else None,
            protection=ProtectionMode(args.protect),
            multiperiod=multiperiod,
            fixed_routing=args.fixed_routing,
            shortest_path=args.ecmp,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ------------------------------------------------------------------ reports

def _num(v) -> Optional[float]:
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _device_tables(instance: Instance, solution: Solution) -> tuple[list, list]:
    periods = list(instance.periods) if solution.variant.multiperiod else [None]
    nodes, links = [], []
    for pid, state in zip(periods, solution.periods):
        loads = state.arc_loads()
        for n in instance.node_ids:
            nodes.append({"period": pid, "node": n, "state": state.nodes[n]})
        for link in instance.links:
            s = state.links[link.arc]
            cap = link.usable_capacity(int(s))
            load = loads.get(link.arc, 0.0)
            links.append({"period": pid, "from": link.source, "to": link.target, "state": s,
                          "load": load, "capacity": cap,
                          "utilization": (load / cap) if cap > 0 else (0.0 if load == 0 else None)})
    return nodes, links


def _finite(obj):
    """Replace non-finite floats, which JSON cannot carry, by their string form."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def build_report(command: str, instance: Instance, run: dict, status: str,
                 solution: Optional[Solution], objective=None, bound=None,
                 validation: Optional[ValidationReport] = None, started: float = 0.0,
                 stamp: Optional[str] = None, extra: Optional[dict] = None) -> dict:
    gap = None
    if objective is not None and bound is not None and _num(objective) is not None \
            and _num(bound) is not None:
        gap = abs(objective - bound) / max(1.0, abs(objective))
    report = {
        "command": command,
        "instance": instance.name,
        "run": run,
        "status": status,
        "objective": _num(objective),
        "bound": _num(bound),
        "gap": gap,
    }
    if extra:
        report.update(extra)
    if solution is not None and solution.periods:
        nodes, links = _device_tables(instance, solution)
        report["devices"] = {"nodes": nodes, "links": links}
        report["solution"] = solution.to_dict()
    if validation is not None:
        report["validation"] = _finite(validation.to_dict())
    # the only field that differs between identical runs
    report["timing"] = {"timestamp": stamp or _dt.datetime.now(_dt.timezone.utc).isoformat(),
                        "wall_time_s": time.monotonic() - started}
    return report


def report_rows(report: dict) -> list[list]:
    """Flat ``section, period, element, key, value`` rows carrying the report's numbers."""
    rows = [["section", "period", "element", "key", "value"]]
    for key in ("command", "instance", "status", "objective", "bound", "gap"):
        rows.append(["summary", "", "", key, report.get(key)])
    for key, value in sorted(_flatten(report.get("run", {})).items()):
        rows.append(["run", "", "", key, value])
    for key in ("bound_from", "bound_gap"):
        if key in report:
            rows.append(["summary", "", "", key, report[key]])
    devices = report.get("devices", {})
    for row in devices.get("nodes", []):
        rows.append(["node", row["period"] or "", row["node"], "state", row["state"]])
    for row in devices.get("links", []):
        el = f"{row['from']}->{row['to']}"
        for key in ("state", "load", "capacity", "utilization"):
            rows.append(["link", row["period"] or "", el, key, row[key]])
    val = report.get("validation")
    if val is not None:
        rows.append(["validation", "", "", "passed", val["passed"]])
        rows.append(["validation", "", "", "power", val["power"]])
        for c in val["checks"]:
            rows.append(["validation", "", c["family"], "violation", c["violation"]])
    for key, value in report["timing"].items():
        rows.append(["timing", "", "", key, value])
    return rows


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        name = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, name + "."))
        elif isinstance(v, list):
            out[name] = json.dumps(v)
        else:
            out[name] = v
    return out


def write_report(report: dict, out: Optional[str], csv_path: Optional[str]) -> None:
    text = json.dumps(report, indent=2, allow_nan=False) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)
    if csv_path:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in report_rows(report):
            writer.writerow(["" if v is None else v for v in row])
        with open(csv_path, "w") as fh:
            fh.write(buf.getvalue())


# ----------------------------------------------------------------- commands

def _status_exit(status: str) -> int:
    return {OPTIMAL: EXIT_OK, FEASIBLE: EXIT_OK, INFEASIBLE: EXIT_INFEASIBLE,
            LIMIT_REACHED: EXIT_LIMIT}.get(status, EXIT_INFEASIBLE)


def _variant_run(args, variant: Variant) -> dict:
    return {"variant": variant.label, "scheme": args.scheme, "variant_spec": variant.to_dict(),
            "seed": getattr(args, "seed", None)}


def cmd_solve(args) -> int:
    started = time.monotonic()
    instance = load_instance(args.instance, args.lenient)
    variant = variant_from_args(args, instance)
    try:
        model, symbols = build_model(instance, variant)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    limits = {"node_limit": args.node_limit, "time_limit": args.time_limit, "gap": args.gap}
    if not model.integers:
        lp_sol = solve_lp(model.lp)
        result = MilpSolution(lp_sol.status if lp_sol.status in (OPTIMAL, INFEASIBLE)
                              else INFEASIBLE)
        if lp_sol.status == OPTIMAL:
            result.values, result.objective = lp_sol.values, lp_sol.objective
            result.bound = lp_sol.dual_objective
    else:
        result = solve_milp(model, node_limit=args.node_limit,
                            time_limit=args.time_limit if args.time_limit else math.inf,
                            gap=args.gap)
    solution = extract_solution(instance, variant, symbols, result)
    validation = validate_solution(instance, solution) if solution.periods else None
    run = _variant_run(args, variant)
    run["limits"] = limits
    run["solver"] = "lp" if not model.integers else "branch_and_bound"
    extra = {"nodes_explored": result.nodes}
    report = build_report("solve", instance, run, result.status, solution,
                          result.objective if result.has_incumbent else None,
                          result.bound, validation, started, args.timestamp, extra)
    write_report(report, args.out, args.csv)
    if args.solution_out and solution.periods:
        with open(args.solution_out, "w") as fh:
            json.dump(solution.to_dict(), fh, indent=2)
            fh.write("\n")
    return _status_exit(result.status)


def _bound_from(path: Optional[str]) -> Optional[float]:
    if not path:
        return None
    with open(path) as fh:
        data = json.load(fh)
    value = data.get("objective")
    if value is None:
        raise UsageError(f"{path} holds no objective to compare against")
    return float(value)


def cmd_heuristic(args) -> int:
    started = time.monotonic()
    instance = load_instance(args.instance, args.lenient)
    options = _energy_from_args(args)
    policy = SortPolicy(args.policy, args.seed)
    try:
        feas = Feasibility.parse(args.feasibility)
        if instance.periods:
            solution = multiperiod_sequential(instance, args.method, args.period_order,
                                              options, policy, feas)
        else:
            solution = greedy_sleep(instance, policy, feas, options=options,
                                    static_order=args.static_order)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    bound = _bound_from(args.bound_from)
    status = solution.status
    validation = validate_solution(instance, solution) if solution.periods else None
    run = {"variant": solution.variant.label, "variant_spec": solution.variant.to_dict(),
           "policy": policy.kind, "seed": args.seed, "feasibility": feas.label(),
           "static_order": args.static_order}
    if instance.periods:
        run.update(method=args.method, period_order=args.period_order)
    extra = {}
    if bound is not None:
        extra["bound_from"] = bound
        extra["bound_gap"] = (solution.power - bound) if solution.periods else None
    report = build_report("heuristic", instance, run, status, solution,
                          solution.power if solution.periods else None, bound, validation,
                          started, args.timestamp, extra)
    write_report(report, args.out, args.csv)
    if args.solution_out and solution.periods:
        with open(args.solution_out, "w") as fh:
            json.dump(solution.to_dict(), fh, indent=2)
            fh.write("\n")
    return EXIT_OK if solution.periods else EXIT_INFEASIBLE


def cmd_oracle(args) -> int:
    started = time.monotonic()
    instance = load_instance(args.instance, args.lenient)
    variant = variant_from_args(args, instance)
    limits = OracleLimits(args.max_states, args.time_limit or math.inf)
    run = _variant_run(args, variant)
    run["limits"] = {"max_states": args.max_states, "time_limit": args.time_limit}
    try:
        solution = brute_force_optimum(instance, variant, limits)
    except LimitExceeded as exc:
        report = build_report("oracle", instance, run, LIMIT_REACHED, None, started=started,
                              stamp=args.timestamp,
                              extra={"required": exc.required, "reason": exc.reason})
        write_report(report, args.out, args.csv)
        return EXIT_LIMIT
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    validation = validate_solution(instance, solution) if solution.periods else None
    report = build_report("oracle", instance, run, solution.status, solution,
                          solution.power if solution.periods else None,
                          solution.bound if solution.periods else None, validation, started,
                          args.timestamp, {"states": solution.info})
    write_report(report, args.out, args.csv)
    return _status_exit(solution.status)


def cmd_export(args) -> int:
    instance = load_instance(args.instance, args.lenient)
    variant = variant_from_args(args, instance)
    try:
        model, _ = build_model(instance, variant)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    export_lp_file(model, args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    started = time.monotonic()
    instance = load_instance(args.instance, args.lenient)
    with open(args.solution) as fh:
        data = json.load(fh)
    if "solution" in data and "periods" not in data:
        data = data["solution"]
    try:
        solution = Solution.from_dict(data)
        validation = validate_solution(instance, solution, args.tolerance)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"cannot validate {args.solution}: {exc}") from exc
    run = {"variant": solution.variant.label, "variant_spec": solution.variant.to_dict(),
           "tolerance": args.tolerance, "seed": args.seed}
    status = "valid" if validation.passed else "invalid"
    report = build_report("validate", instance, run, status, solution, solution.power,
                          None, validation, started, args.timestamp)
    write_report(report, args.out, args.csv)
    return EXIT_OK if validation.passed else EXIT_INFEASIBLE


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eanm", description="Energy-aware network management")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, report=True):
        p.add_argument("instance", help="instance JSON file")
        p.add_argument("--lenient", action="store_true", help="warn on unknown keys")
        p.add_argument("--seed", type=int, default=0,
                       help="recorded in the report; drives the random policy")
        if report:
            p.add_argument("--out", help="JSON report path (default: stdout)")
            p.add_argument("--csv", help="also write the report as CSV rows")
            p.add_argument("--timestamp", help=argparse.SUPPRESS)

    p = sub.add_parser("solve", help="build and solve a model exactly")
    common(p)
    _add_variant_flags(p)
    p.add_argument("--node-limit", type=int, default=200_000)
    p.add_argument("--time-limit", type=float, default=0.0, help="seconds, 0 = none")
    p.add_argument("--gap", type=float, default=0.0, help="relative gap to stop at")
    p.add_argument("--solution-out", help="write the solution JSON here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("heuristic", help="greedy switch-off (sequential when multi-period)")
    common(p)
    p.add_argument("--policy", choices=POLICIES + ("highest_power_first",),
                   default="least_flow_first")
    p.add_argument("--feasibility", default="lp", help="lp, ksp, ksp:K or ecmp")
    p.add_argument("--static-order", action="store_true")
    p.add_argument("--method", choices=["greedy", "milp"], default="greedy")
    p.add_argument("--period-order", choices=["chronological", "ascending_load"],
                   default="chronological")
    p.add_argument("--bundled", action="store_true")
    p.add_argument("--alr", action="store_true")
    p.add_argument("--big-m-coherence", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("--no-sleep-nodes", action="store_true")
    p.add_argument("--no-sleep-links", action="store_true")
    p.add_argument("--bound-from", help="report whose objective bounds this run")
    p.add_argument("--solution-out", help="write the solution JSON here")
    p.set_defaults(func=cmd_heuristic)

    p = sub.add_parser("oracle", help="exhaustive optimum of a tiny instance")
    common(p)
    _add_variant_flags(p)
    p.add_argument("--max-states", type=int, default=2 ** 20)
    p.add_argument("--time-limit", type=float, default=0.0, help="seconds, 0 = none")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("export", help="write the model as a fixed-format MPS file")
    common(p, report=False)
    _add_variant_flags(p)
    p.add_argument("--out", required=True, help="MPS file path")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("validate", help="check a solution against an instance")
    common(p)
    p.add_argument("solution", help="solution JSON (or a solve report)")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda msg, *rest, **kw: print(
                f"eanm {args.command}: warning: {msg}", file=sys.stderr)
            return args.func(args)
    except (UsageError, InstanceParseError, OSError, json.JSONDecodeError) as exc:
        print(f"eanm {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
