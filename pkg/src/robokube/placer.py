"""Pod placement under pinning, hardware affinity and capacity.

The placer is a most-constrained-first greedy:

1. rank pods by (number of statically eligible nodes, -cpu, name);
2. put each pod on the eligible node (against *remaining* capacity) that
   keeps the most cpu free afterwards, ties by node name;
3. decrement cpu, memory and extended-resource counts.

Extended resources are whole device-plugin units; they are never shared.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .model import AppSpec, ClusterNode, ClusterSpec, PodPlan


class Migratability(str, Enum):
    PINNED = "PINNED"
    HARDWARE_BOUND = "HARDWARE_BOUND"
    MIGRATABLE = "MIGRATABLE"


@dataclass(frozen=True)
class Placement:
    assignments: dict[str, str] = field(default_factory=dict)
    unplaced: tuple[tuple[str, str], ...] = ()
    migratability: dict[str, Migratability] = field(default_factory=dict)

    @property
    def unplaced_pods(self) -> list[str]:
        return [pod for pod, _ in self.unplaced]

    def to_dict(self) -> dict:
        return {
            "assignments": dict(sorted(self.assignments.items())),
            "unplaced": [{"pod": p, "reason": r} for p, r in self.unplaced],
            "migratability": {k: v.value for k, v in sorted(self.migratability.items())},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Placement":
        if not isinstance(d, dict) or set(d) - {"assignments", "unplaced", "migratability"}:
            raise ValueError("placement document must be an object with assignments/unplaced/migratability")
        assignments = d.get("assignments", {})
        if not isinstance(assignments, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in assignments.items()
        ):
            raise ValueError("placement assignments must map pod name -> node name")
        unplaced = tuple((u["pod"], u["reason"]) for u in d.get("unplaced", []))
        overlap = set(assignments) & {p for p, _ in unplaced}
        if overlap:
            raise ValueError(f"pods both assigned and unplaced: {sorted(overlap)}")
        migratability = {k: Migratability(v) for k, v in d.get("migratability", {}).items()}
        return cls(dict(assignments), unplaced, migratability)

    @classmethod
    def loads(cls, text: str) -> "Placement":
        return cls.from_dict(json.loads(text))


def _pins(pod: PodPlan, app: AppSpec) -> set[str]:
    return {n.pinned_node for n in app.ros_nodes if n.name in pod.ros_nodes and n.pinned_node is not None}


@dataclass
class _Capacity:
    cpu: int
    memory: int
    resources: dict[str, int]

    @classmethod
    def of(cls, node: ClusterNode) -> "_Capacity":
        return cls(node.cpu_capacity, node.memory_capacity, dict(node.extended_resources))


def _fits_on(pod: PodPlan, pins: set[str], name: str, cap: _Capacity) -> bool:
    if pins and pins != {name}:
        return False
    if any(cap.resources.get(r, 0) < q for r, q in pod.aggregate_hardware.items()):
        return False
    return cap.cpu >= pod.aggregate_cpu and cap.memory >= pod.aggregate_memory


def _fits(pod: PodPlan, pins: set[str], capacities: dict[str, _Capacity]) -> list[str]:
    return [n for n in sorted(capacities) if _fits_on(pod, pins, n, capacities[n])]


def eligible_nodes(pod: PodPlan, app: AppSpec, cluster: ClusterSpec) -> list[str]:
    capacities = {n.name: _Capacity.of(n) for n in cluster.nodes}
    return _fits(pod, _pins(pod, app), capacities)


def classify(pod: PodPlan, app: AppSpec, cluster: ClusterSpec) -> Migratability:
    if _pins(pod, app):
        return Migratability.PINNED
    if pod.aggregate_hardware:
        hosts = [
            n for n in cluster.nodes
            if all(n.extended_resources.get(r, 0) >= q for r, q in pod.aggregate_hardware.items())
        ]
        if len(hosts) <= 1:
            return Migratability.HARDWARE_BOUND
    # capacity-limited eligibility is transient; only affinity pins a pod down
    return Migratability.MIGRATABLE


def _unplaced_reason(pod: PodPlan, pins: set[str], capacities: dict[str, _Capacity]) -> str:
    # filter nodes constraint by constraint; the first one that empties the pool is reported
    survivors = sorted(capacities)
    if pins:
        survivors = [n for n in survivors if pins == {n}]
        if not survivors:
            return f"pinned to {', '.join(sorted(pins))}, which cannot host it"
    for resource, qty in sorted(pod.aggregate_hardware.items()):
        survivors = [n for n in survivors if capacities[n].resources.get(resource, 0) >= qty]
        if not survivors:
            return f"insufficient extended resource {resource}: needs {qty}"
    survivors = [n for n in survivors if capacities[n].cpu >= pod.aggregate_cpu]
    if not survivors:
        return f"insufficient cpu: needs {pod.aggregate_cpu}m"
    return f"insufficient memory: needs {pod.aggregate_memory} bytes"


def plan_placement(pods: list[PodPlan], app: AppSpec, cluster: ClusterSpec) -> Placement:
    static = {p.name: eligible_nodes(p, app, cluster) for p in pods}
    order = sorted(pods, key=lambda p: (len(static[p.name]), -p.aggregate_cpu, p.name))
    capacities = {n.name: _Capacity.of(n) for n in cluster.nodes}

    assignments: dict[str, str] = {}
    unplaced: list[tuple[str, str]] = []
    for pod in order:
        pins = _pins(pod, app)
        candidates = _fits(pod, pins, capacities)
        if not candidates:
            unplaced.append((pod.name, _unplaced_reason(pod, pins, capacities)))
            continue
        best = min(candidates, key=lambda n: (-(capacities[n].cpu - pod.aggregate_cpu), n))
        cap = capacities[best]
        cap.cpu -= pod.aggregate_cpu
        cap.memory -= pod.aggregate_memory
        for resource, qty in pod.aggregate_hardware.items():
            cap.resources[resource] -= qty
        assignments[pod.name] = best

    return Placement(
        assignments=dict(sorted(assignments.items())),
        unplaced=tuple(sorted(unplaced)),
        migratability={p.name: classify(p, app, cluster) for p in sorted(pods, key=lambda p: p.name)},
    )
