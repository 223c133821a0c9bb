"""Descriptors selecting one member of the model family."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Mapping, Optional

from .model import Arc

PER_FLOW = "per_flow"
PER_SOURCE = "per_source"
PER_PATH = "per_path"
SINGLE_PATH = "single_path"
SCHEMES = (PER_FLOW, PER_SOURCE, PER_PATH, SINGLE_PATH)


@dataclass(frozen=True)
class RoutingScheme:
    kind: str = PER_FLOW
    # candidate paths per demand index, used by per_path
    paths: Optional[Mapping[int, tuple[tuple[Arc, ...], ...]]] = None
    binary: bool = False

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown routing scheme {self.kind!r}")
        if self.kind == PER_PATH and not self.paths:
            raise ValueError("per_path routing needs candidate paths")
        if self.paths is not None:
            frozen = {int(d): tuple(tuple(tuple(a) for a in p) for p in ps)
                      for d, ps in self.paths.items()}
            object.__setattr__(self, "paths", frozen)

    @property
    def unsplittable(self) -> bool:
        return self.kind == SINGLE_PATH or (self.kind == PER_PATH and self.binary)

    def __hash__(self):
        paths = tuple(sorted(self.paths.items())) if self.paths else None
        return hash((self.kind, paths, self.binary))


@dataclass(frozen=True)
class EnergyOptions:
    sleep_nodes: bool = True
    sleep_links: bool = True
    bundled: bool = False
    alr: bool = False
    use_big_m_coherence: bool = False

    def __post_init__(self):
        if self.bundled and self.alr:
            raise ValueError("bundled and alr options are mutually exclusive")


class ProtectionMode(str, Enum):
    NONE = "none"
    DEDICATED = "dedicated"
    SHARED = "shared"
    SMART_DEDICATED = "smart_dedicated"
    SMART_SHARED = "smart_shared"

    @property
    def smart(self) -> bool:
        return self in (ProtectionMode.SMART_DEDICATED, ProtectionMode.SMART_SHARED)

    @property
    def shared(self) -> bool:
        return self in (ProtectionMode.SHARED, ProtectionMode.SMART_SHARED)

    @property
    def classic(self) -> "ProtectionMode":
        return {ProtectionMode.SMART_DEDICATED: ProtectionMode.DEDICATED,
                ProtectionMode.SMART_SHARED: ProtectionMode.SHARED}.get(self, self)


@dataclass(frozen=True)
class Variant:
    """Which model to build: routing scheme, device options and extra blocks.

    ``energy=None`` is the plain routing model with every device on.
    """

    scheme: RoutingScheme = field(default_factory=RoutingScheme)
    energy: Optional[EnergyOptions] = None
    protection: ProtectionMode = ProtectionMode.NONE
    multiperiod: bool = False
    fixed_routing: bool = False
    shortest_path: bool = False

    def __post_init__(self):
        object.__setattr__(self, "protection", ProtectionMode(self.protection))
        if self.protection != ProtectionMode.NONE and self.scheme.kind != SINGLE_PATH:
            raise ValueError("protection requires single_path routing")
        if self.protection != ProtectionMode.NONE and self.energy is not None and (
                self.energy.bundled or self.energy.alr):
            raise ValueError("protection is defined for on/off links only")
        if self.fixed_routing and not self.multiperiod:
            raise ValueError("fixed_routing only applies to multi-period models")
        if self.shortest_path and (self.scheme.kind != PER_FLOW or self.multiperiod
                                   or self.protection != ProtectionMode.NONE):
            raise ValueError("shortest-path routing uses single-period per_flow variables")

    @property
    def label(self) -> str:
        parts = [self.scheme.kind]
        if self.energy is not None:
            e = self.energy
            parts.append("alr" if e.alr else "bundled" if e.bundled else "sleep")
            if e.use_big_m_coherence:
                parts.append("bigm")
        if self.protection != ProtectionMode.NONE:
            parts.append(self.protection.value)
        if self.multiperiod:
            parts.append("multiperiod-fixed" if self.fixed_routing else "multiperiod")
        if self.shortest_path:
            parts.append("ecmp")
        return "/".join(parts)

    def to_dict(self) -> dict:
        scheme = {"kind": self.scheme.kind, "binary": self.scheme.binary}
        if self.scheme.paths:
            scheme["paths"] = {str(d): [[list(a) for a in p] for p in ps]
                               for d, ps in self.scheme.paths.items()}
        return {
            "scheme": scheme,
            "energy": asdict(self.energy) if self.energy is not None else None,
            "protection": self.protection.value,
            "multiperiod": self.multiperiod,
            "fixed_routing": self.fixed_routing,
            "shortest_path": self.shortest_path,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Variant":
        s = data.get("scheme", {})
        paths = s.get("paths")
        if paths is not None:
            paths = {int(d): tuple(tuple(tuple(a) for a in p) for p in ps)
                     for d, ps in paths.items()}
        energy = data.get("energy")
        return cls(
            scheme=RoutingScheme(s.get("kind", PER_FLOW), paths, bool(s.get("binary", False))),
            energy=EnergyOptions(**energy) if energy is not None else None,
            protection=ProtectionMode(data.get("protection", "none")),
            multiperiod=bool(data.get("multiperiod", False)),
            fixed_routing=bool(data.get("fixed_routing", False)),
            shortest_path=bool(data.get("shortest_path", False)),
        )


SLEEP = EnergyOptions()
