"""Deployment rule catalog for ROS 2 workloads on a multicast overlay.

=====  ========  ==========================================================
rule   severity  fires when
=====  ========  ==========================================================
R1     ERROR     a pod hosts two or more ROS containers (they would all
                 bind the fixed discovery port on the shared network stack)
R2     ERROR     an RTPS port is declared for exposure (Services and
                 ingress translate ports/addresses and break RTPS)
R3     ERROR     ROS containers exist but the backend has no multicast
R4     WARNING   multicast works but IGMP snooping is off
R5     ERROR     overlay MTU > physical MTU - encapsulation overhead
R6     ERROR     a NodePort is forced for a port outside the NodePort range
R7     ERROR     no single node offers enough of an extended resource
=====  ========  ==========================================================
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .model import AppSpec, ClusterSpec, PodPlan, PortSpec, TrafficClass

RULE_IDS = ("R1", "R2", "R3", "R4", "R5", "R6", "R7")


class Severity(str, Enum):
    ERROR = "ERROR"
    WARNING = "WARNING"


RULE_SEVERITY = {r: Severity.ERROR for r in RULE_IDS}
RULE_SEVERITY["R4"] = Severity.WARNING


class Strategy(str, Enum):
    NODE_PORT = "NODE_PORT"
    INGRESS_TCP_ROUTE = "INGRESS_TCP_ROUTE"
    FORBIDDEN = "FORBIDDEN"


@dataclass(frozen=True)
class Violation:
    rule_id: str
    severity: Severity
    subject: str
    message: str

    def to_dict(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "severity": self.severity.value,
            "subject": self.subject,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Violation":
        return cls(d["rule_id"], Severity(d["severity"]), d["subject"], d["message"])


@dataclass(frozen=True)
class ExposureDecision:
    port: PortSpec
    strategy: Strategy
    assigned_nodeport: int | None
    reason: str


def _finding(rule_id: str, subject: str, message: str) -> Violation:
    return Violation(rule_id, RULE_SEVERITY[rule_id], subject, message)


def port_subject(container: str, port: PortSpec) -> str:
    return f"container/{container}/port/{port.port}/{port.protocol.value}"


def validate(app: AppSpec, pods: list[PodPlan], cluster: ClusterSpec) -> list[Violation]:
    """Run the whole catalog; findings come back sorted by (rule_id, subject)."""
    found: list[Violation] = []
    backend = cluster.backend
    ros_containers = {c.name for c in app.containers if c.is_ros}

    for pod in pods:
        ros_here = sorted(c for c in pod.containers if c in ros_containers)
        if len(ros_here) >= 2:
            found.append(_finding(
                "R1", f"pod/{pod.name}",
                f"pod {pod.name} runs {len(ros_here)} ROS containers ({', '.join(ros_here)}); "
                f"they share one network stack and collide on the RTPS ports",
            ))

    lo, hi = cluster.nodeport_range
    for c in app.containers:
        for p in c.exposed_ports:
            if p.traffic_class is TrafficClass.RTPS:
                found.append(_finding(
                    "R2", port_subject(c.name, p),
                    f"RTPS port {p.port} must not be exposed through a port-translating Service or route",
                ))
            elif p.force_node_port and not lo <= p.port <= hi:
                found.append(_finding(
                    "R6", port_subject(c.name, p),
                    f"NodePort forced for port {p.port}, outside the NodePort range [{lo}, {hi}]; "
                    f"drop the override to route it through ingress",
                ))

    if ros_containers and not backend.supports_multicast:
        found.append(_finding(
            "R3", f"backend/{backend.name}",
            f"backend {backend.name} does not support multicast; RTPS discovery cannot work",
        ))
    if backend.supports_multicast and not backend.igmp_snooping:
        found.append(_finding(
            "R4", f"backend/{backend.name}",
            "IGMP snooping is disabled; discovery multicast will reach every node",
        ))

    for node in cluster.nodes:
        limit = node.phys_mtu - backend.encapsulation_overhead
        if backend.overlay_mtu > limit:
            found.append(_finding(
                "R5", f"node/{node.name}",
                f"overlay MTU {backend.overlay_mtu} exceeds {limit} "
                f"(physical {node.phys_mtu} - overhead {backend.encapsulation_overhead})",
            ))

    for pod in pods:
        for resource, qty in pod.aggregate_hardware.items():
            if not any(n.extended_resources.get(resource, 0) >= qty for n in cluster.nodes):
                found.append(_finding(
                    "R7", f"pod/{pod.name}/resource/{resource}",
                    f"pod {pod.name} needs {qty} x {resource} but no node offers that many",
                ))

    return sorted(found, key=lambda v: (v.rule_id, v.subject, v.message))


def has_errors(violations: list[Violation]) -> bool:
    return any(v.severity is Severity.ERROR for v in violations)


def decide_exposure(port: PortSpec, cluster: ClusterSpec, taken_nodeports: set[int] | frozenset[int] = frozenset()) -> ExposureDecision:
    if port.traffic_class is TrafficClass.RTPS:
        return ExposureDecision(
            port, Strategy.FORBIDDEN, None,
            "R2: RTPS traffic cannot pass a port-translating Service or route",
        )
    lo, hi = cluster.nodeport_range
    if lo <= port.port <= hi and port.port not in taken_nodeports:
        return ExposureDecision(port, Strategy.NODE_PORT, port.port, f"port {port.port} is inside [{lo}, {hi}]")
    if lo <= port.port <= hi:
        reason = f"NodePort {port.port} already taken"
    else:
        reason = f"port {port.port} is outside the NodePort range [{lo}, {hi}]"
    return ExposureDecision(port, Strategy.INGRESS_TCP_ROUTE, None, reason)


def violations_json(violations: list[Violation]) -> str:
    return json.dumps([v.to_dict() for v in violations], indent=2) + "\n"


def violations_table(violations: list[Violation]) -> str:
    if not violations:
        return "no findings\n"
    rows = [("RULE", "SEVERITY", "SUBJECT", "MESSAGE")]
    rows += [(v.rule_id, v.severity.value, v.subject, v.message) for v in violations]
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = [
        "  ".join(cell.ljust(w) for cell, w in zip(r[:3], widths)) + "  " + r[3]
        for r in rows
    ]
    return "\n".join(lines) + "\n"
