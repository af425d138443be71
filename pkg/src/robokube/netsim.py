"""Discrete-event model of RTPS participant discovery and topic traffic.

Discovery is modelled at participant granularity (one participant per ROS
container). Each participant multicasts an announcement to the discovery
group every ``announce_period`` ms, starting at a seeded phase offset, for
``duration // announce_period`` rounds. The backend decides who hears it:

* no multicast support: the announcement is dropped (``NO_MULTICAST``);
* snooping off: every cluster node receives a copy;
* snooping on: only nodes hosting at least one participant receive a copy.

A participant hearing an announcement records the sender and answers with
a unicast reply, from which the sender learns about it in turn. Endpoint
discovery is collapsed into topic-name matching between mutually
discovered participants.

The data plane is binary: an inter-node edge whose path MTU
(min physical MTU - encapsulation overhead) is smaller than the overlay MTU
loses every message; otherwise everything arrives, fragmented to the
smaller of the two MTUs. Containers in one pod talk over loopback.
"""
from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .model import AppSpec, ClusterSpec, derive_pods
from .placer import Placement

NO_MULTICAST = "NO_MULTICAST"
MTU_EXCEEDED = "MTU_EXCEEDED"


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimParams:
    duration: int
    announce_period: int = 1000
    seed: int = 0
    intra_subnet_latency: float = 1.0
    inter_subnet_latency: float = 10.0
    # explicit (subnet, subnet) overrides, looked up in either order
    per_link_latency: dict[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.announce_period <= 0:
            raise ValueError(f"announce_period must be positive, got {self.announce_period}")
        if self.duration < self.announce_period:
            raise ValueError(
                f"duration {self.duration} ms is shorter than announce_period {self.announce_period} ms"
            )
        lat = [self.intra_subnet_latency, self.inter_subnet_latency, *self.per_link_latency.values()]
        if any(x < 0 for x in lat):
            raise ValueError("latencies must be >= 0")

    def latency(self, a: str, b: str) -> float:
        if (a, b) in self.per_link_latency:
            return self.per_link_latency[(a, b)]
        if (b, a) in self.per_link_latency:
            return self.per_link_latency[(b, a)]
        return self.intra_subnet_latency if a == b else self.inter_subnet_latency


@dataclass(frozen=True)
class Participant:
    pod: str
    container: str
    host_node: str
    virtual_ip: str
    publishes: frozenset[str]
    subscribes: frozenset[str]

    @property
    def id(self) -> str:
        return f"{self.pod}/{self.container}"


@dataclass(frozen=True)
class Drop:
    kind: str
    source: str
    target: str
    reason: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "from": self.source, "to": self.target, "reason": self.reason}


@dataclass(frozen=True)
class ReachabilityReport:
    participants: tuple[str, ...]
    discovered: frozenset[tuple[str, str]]  # (a, b): a has discovered b
    matched_topics: tuple[tuple[str, str, str], ...]
    mcast_packets_per_node: dict[str, int]
    drops: tuple[Drop, ...]

    def matrix(self) -> list[list[bool]]:
        return [[(a, b) in self.discovered for b in self.participants] for a in self.participants]

    @property
    def complete(self) -> bool:
        return all(
            (a, b) in self.discovered for a in self.participants for b in self.participants if a != b
        )

    def to_dict(self) -> dict:
        return {
            "participants": list(self.participants),
            "discovered": [list(p) for p in sorted(self.discovered)],
            "matched_topics": [
                {"publisher": p, "subscriber": s, "topic": t} for p, s, t in self.matched_topics
            ],
            "mcast_packets_per_node": dict(sorted(self.mcast_packets_per_node.items())),
            "drops": [d.to_dict() for d in self.drops],
        }


@dataclass(frozen=True)
class EdgeTraffic:
    publisher: str
    subscriber: str
    topic: str
    messages_delivered: int
    messages_dropped: int
    fragments_per_message: int
    drop_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "publisher": self.publisher,
            "subscriber": self.subscriber,
            "topic": self.topic,
            "messages_delivered": self.messages_delivered,
            "messages_dropped": self.messages_dropped,
            "fragments_per_message": self.fragments_per_message,
            "drop_reason": self.drop_reason,
        }


@dataclass(frozen=True)
class TrafficReport:
    per_edge: tuple[EdgeTraffic, ...]
    broken_paths: tuple[tuple[str, str], ...]  # (topic, subscriber id)

    def to_dict(self) -> dict:
        return {
            "per_edge": [e.to_dict() for e in self.per_edge],
            "broken_paths": [{"topic": t, "subscriber": s} for t, s in self.broken_paths],
        }


def participants(placement: Placement, app: AppSpec, cluster: ClusterSpec) -> list[Participant]:
    """One participant per ROS container, ordered by (pod, container)."""
    node_index = {name: i for i, name in enumerate(sorted(n.name for n in cluster.nodes))}
    out = []
    per_node: dict[str, int] = {}
    for pod in derive_pods(app):
        for cname in pod.containers:
            if not app.container(cname).is_ros:
                continue
            host = placement.assignments.get(pod.name)
            if host is None:
                raise SimulationError(f"ROS pod {pod.name} is not placed; simulation undefined")
            if host not in node_index:
                raise SimulationError(f"pod {pod.name} placed on unknown node {host}")
            k = per_node.get(host, 0)
            per_node[host] = k + 1
            nodes = app.nodes_in(cname)
            out.append(Participant(
                pod=pod.name,
                container=cname,
                host_node=host,
                virtual_ip=f"10.42.{node_index[host]}.{k + 2}",
                publishes=frozenset(t for n in nodes for t in n.publishes),
                subscribes=frozenset(t for n in nodes for t in n.subscribes),
            ))
    return out


_ANNOUNCE, _MCAST_ARRIVE, _REPLY_ARRIVE = 0, 1, 2


def simulate_discovery(placement: Placement, app: AppSpec, cluster: ClusterSpec, params: SimParams) -> ReachabilityReport:
    parts = participants(placement, app, cluster)
    backend = cluster.backend
    subnet = {n.name: n.subnet for n in cluster.nodes}
    node_names = sorted(subnet)
    hosting = sorted({p.host_node for p in parts})
    by_node: dict[str, list[int]] = {}
    for i, p in enumerate(parts):
        by_node.setdefault(p.host_node, []).append(i)
    group = f"{cluster.rtps_multicast_group}:{cluster.rtps_discovery_port}"
    rounds = params.duration // params.announce_period

    rng = random.Random(params.seed)
    queue: list[tuple] = []
    seq = 0

    def push(t, kind, *payload):
        nonlocal seq
        heapq.heappush(queue, (t, seq, kind, payload))
        seq += 1

    for i in range(len(parts)):
        push(rng.randrange(params.announce_period), _ANNOUNCE, i, 0)

    discovered: set[tuple[str, str]] = set()
    packets = {n: 0 for n in node_names}
    drops: list[Drop] = []

    while queue:
        t, _, kind, payload = heapq.heappop(queue)
        if kind == _ANNOUNCE:
            i, k = payload
            sender = parts[i]
            if k + 1 < rounds:
                push(t + params.announce_period, _ANNOUNCE, i, k + 1)
            if not backend.supports_multicast:
                drops.append(Drop("SPDP_ANNOUNCE", sender.id, group, NO_MULTICAST))
                continue
            for node in (hosting if backend.igmp_snooping else node_names):
                push(t + params.latency(subnet[sender.host_node], subnet[node]), _MCAST_ARRIVE, i, node)
        elif kind == _MCAST_ARRIVE:
            i, node = payload
            packets[node] += 1
            sender = parts[i]
            for j in by_node.get(node, []):
                if j == i:
                    continue
                discovered.add((parts[j].id, sender.id))
                push(t + params.latency(subnet[node], subnet[sender.host_node]), _REPLY_ARRIVE, i, j)
        else:
            i, j = payload
            discovered.add((parts[i].id, parts[j].id))

    matched = []
    for a in parts:
        for b in parts:
            if a is b or (a.id, b.id) not in discovered or (b.id, a.id) not in discovered:
                continue
            for topic in sorted(a.publishes & b.subscribes):
                matched.append((a.id, b.id, topic))

    return ReachabilityReport(
        participants=tuple(p.id for p in parts),
        discovered=frozenset(discovered),
        matched_topics=tuple(sorted(matched)),
        mcast_packets_per_node=packets,
        drops=tuple(drops),
    )


def oracle_reachability(placement: Placement, app: AppSpec, cluster: ClusterSpec) -> list[list[bool]]:
    """Closed-form discovery matrix: everyone sees everyone iff multicast works."""
    ids = [p.id for p in participants(placement, app, cluster)]
    on = cluster.backend.supports_multicast
    return [[on and a != b for b in ids] for a in ids]


def messages_in(rate: float, duration_ms: int) -> int:
    return math.floor(Fraction(repr(rate)) * duration_ms / 1000)


def simulate_dataplane(
    placement: Placement,
    app: AppSpec,
    cluster: ClusterSpec,
    params: SimParams,
    discovery: ReachabilityReport | None = None,
) -> TrafficReport:
    if discovery is None:
        discovery = simulate_discovery(placement, app, cluster, params)
    parts = {p.id: p for p in participants(placement, app, cluster)}
    backend = cluster.backend
    phys = {n.name: n.phys_mtu for n in cluster.nodes}

    edges = []
    for pub_id, sub_id, topic_name in discovery.matched_topics:
        pub, sub = parts[pub_id], parts[sub_id]
        topic = app.topic(topic_name)
        n = messages_in(topic.rate, params.duration)
        if pub.pod == sub.pod:
            edges.append(EdgeTraffic(pub_id, sub_id, topic_name, n, 0, 1))
            continue
        if pub.host_node == sub.host_node:
            mtu = backend.overlay_mtu
            ok = True
        else:
            path = min(phys[pub.host_node], phys[sub.host_node]) - backend.encapsulation_overhead
            mtu = min(backend.overlay_mtu, path)
            ok = backend.overlay_mtu <= path
        frags = math.ceil(topic.message_size / mtu)
        if ok:
            edges.append(EdgeTraffic(pub_id, sub_id, topic_name, n, 0, frags))
        else:
            edges.append(EdgeTraffic(pub_id, sub_id, topic_name, 0, n, frags, MTU_EXCEEDED))

    fed = {(s, t) for _, s, t in discovery.matched_topics}
    broken = sorted(
        (topic, p.id)
        for p in parts.values()
        for topic in p.subscribes
        if topic not in p.publishes and (p.id, topic) not in fed
    )
    return TrafficReport(per_edge=tuple(edges), broken_paths=tuple(broken))


def reports_json(reach: ReachabilityReport, traffic: TrafficReport) -> str:
    return json.dumps({"discovery": reach.to_dict(), "dataplane": traffic.to_dict()}, indent=2) + "\n"
