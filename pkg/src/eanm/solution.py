"""Device states, routing and reported power produced by any solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .model import Arc
from .variants import Variant


@dataclass
class PeriodState:
    """Decisions for one time period.

    ``links`` holds the number of active cards, or the configuration index for
    links operated with rate configurations. ``flows`` maps demand index to the
    per-arc flow of that demand.
    """

    nodes: dict[str, int]
    links: dict[Arc, int]
    flows: dict[int, dict[Arc, float]] = field(default_factory=dict)
    paths: Optional[dict[int, list[Arc]]] = None
    backup: Optional[dict[int, list[Arc]]] = None

    def arc_loads(self) -> dict[Arc, float]:
        out = {a: 0.0 for a in self.links}
        for per_arc in self.flows.values():
            for a, f in per_arc.items():
                out[a] = out.get(a, 0.0) + f
        return out


@dataclass
class Solution:
    variant: Variant
    periods: list[PeriodState]
    power: float = math.nan
    weights: Optional[dict[Arc, float]] = None
    status: str = "optimal"
    bound: float = math.nan
    # run metadata such as a heuristic's power trajectory; must be JSON-friendly
    info: dict = field(default_factory=dict)

    @property
    def state(self) -> PeriodState:
        return self.periods[0]

    def to_dict(self) -> dict:
        def arcs(d):
            return [[a[0], a[1], v] for a, v in d.items()]

        periods = []
        for p in self.periods:
            entry = {
                "nodes": dict(p.nodes),
                "links": arcs(p.links),
                "flows": {str(k): [[a[0], a[1], f] for a, f in v.items() if f != 0.0]
                          for k, v in p.flows.items()},
            }
            if p.paths is not None:
                entry["paths"] = {str(k): [list(a) for a in v] for k, v in p.paths.items()}
            if p.backup is not None:
                entry["backup"] = {str(k): [list(a) for a in v] for k, v in p.backup.items()}
            periods.append(entry)
        return {
            "variant": self.variant.to_dict(),
            "status": self.status,
            "power": self.power,
            "bound": self.bound if math.isfinite(self.bound) else None,
            "weights": arcs(self.weights) if self.weights is not None else None,
            "periods": periods,
            "info": self.info,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Solution":
        def arcs(rows, cast=float):
            return {(r[0], r[1]): cast(r[2]) for r in rows}

        periods = []
        for p in data["periods"]:
            periods.append(PeriodState(
                nodes={k: int(v) for k, v in p["nodes"].items()},
                links=arcs(p["links"], int),
                flows={int(k): arcs(v) for k, v in p.get("flows", {}).items()},
                paths=({int(k): [tuple(a) for a in v] for k, v in p["paths"].items()}
                       if p.get("paths") is not None else None),
                backup=({int(k): [tuple(a) for a in v] for k, v in p["backup"].items()}
                        if p.get("backup") is not None else None),
            ))
        weights = data.get("weights")
        bound = data.get("bound")
        return cls(
            variant=Variant.from_dict(data["variant"]),
            periods=periods,
            power=float(data.get("power", math.nan)),
            weights=arcs(weights) if weights is not None else None,
            status=data.get("status", "optimal"),
            bound=float(bound) if bound is not None else math.nan,
            info=dict(data.get("info", {})),
        )


def path_flows(paths: dict[int, list[Arc]], rates) -> dict[int, dict[Arc, float]]:
    return {d: {a: float(rates[d]) for a in p} for d, p in paths.items()}
