"""Fault scenarios and their seeded random generation."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graph import Network


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class FaultScenario:
    """Faulted-open/closed branches and load switches.

    JSON keys follow the usual set names: ``L_o, L_c, N_o, N_c``.
    """

    open_branches: tuple[int, ...] = ()
    closed_branches: tuple[int, ...] = ()
    open_loads: tuple[int, ...] = ()
    closed_loads: tuple[int, ...] = ()
    seed: int | None = None
    label: str = ""

    def __post_init__(self):
        for f in ("open_branches", "closed_branches", "open_loads", "closed_loads"):
            object.__setattr__(self, f, tuple(sorted(int(i) for i in getattr(self, f))))
        if set(self.open_branches) & set(self.closed_branches):
            raise ScenarioError("a branch cannot be faulted both open and closed")
        if set(self.open_loads) & set(self.closed_loads):
            raise ScenarioError("a load switch cannot be faulted both open and closed")

    @property
    def n_faults(self) -> int:
        return (
            len(self.open_branches) + len(self.closed_branches) + len(self.open_loads) + len(self.closed_loads)
        )

    def validate(self, net: Network) -> None:
        for bid in self.open_branches + self.closed_branches:
            if bid not in net.branch_pos:
                raise ScenarioError(f"scenario references unknown branch {bid}")
        for nid in self.open_loads + self.closed_loads:
            if nid not in net.node_pos:
                raise ScenarioError(f"scenario references unknown node {nid}")
            if net.node(nid).is_source:
                raise ScenarioError(f"node {nid} is a source; load-switch faults apply to loads only")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "L_o": list(self.open_branches),
            "L_c": list(self.closed_branches),
            "N_o": list(self.open_loads),
            "N_c": list(self.closed_loads),
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FaultScenario":
        return cls(doc["L_o"], doc["L_c"], doc["N_o"], doc["N_c"], doc.get("seed"), doc.get("label", ""))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def load_switch_population(net: Network) -> list[int]:
    return sorted(n.id for n in net.nodes if not n.is_source and (n.p_demand > 0 or n.q_demand > 0))


def generate_scenario(
    net: Network,
    seed: int,
    branch_faults: int = 0,
    load_switch_faults: int = 0,
    open_prob: float = 0.5,
    label: str = "",
) -> FaultScenario:
    """Sample faults without replacement; each fault is open w.p. ``open_prob``.

    Uses numpy's PCG64 so draws replicate across platforms.
    """
    branches = sorted(b.id for b in net.branches)
    loads = load_switch_population(net)
    if not 0 <= branch_faults <= len(branches):
        raise ScenarioError(f"branch_faults={branch_faults} outside [0, {len(branches)}]")
    if not 0 <= load_switch_faults <= len(loads):
        raise ScenarioError(f"load_switch_faults={load_switch_faults} outside [0, {len(loads)}]")
    if not 0.0 <= open_prob <= 1.0:
        raise ScenarioError("open_prob must lie in [0, 1]")
    rng = np.random.Generator(np.random.PCG64(seed))
    hit_b = rng.choice(branches, size=branch_faults, replace=False) if branch_faults else []
    open_b = rng.random(len(hit_b)) < open_prob
    hit_n = rng.choice(loads, size=load_switch_faults, replace=False) if load_switch_faults else []
    open_n = rng.random(len(hit_n)) < open_prob
    return FaultScenario(
        open_branches=[int(b) for b, o in zip(hit_b, open_b) if o],
        closed_branches=[int(b) for b, o in zip(hit_b, open_b) if not o],
        open_loads=[int(n) for n, o in zip(hit_n, open_n) if o],
        closed_loads=[int(n) for n, o in zip(hit_n, open_n) if not o],
        seed=int(seed),
        label=label,
    )
