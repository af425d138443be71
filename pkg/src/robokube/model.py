"""Domain types for ROS 2 applications and the clusters they run on.

Everything here is a frozen dataclass. Input documents are JSON and are
validated strictly: unknown keys, dangling references and broken invariants
raise a :class:`SpecError` subclass carrying a dotted path to the offending
field (``containers[1].exposed_ports[0].port``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

DEFAULT_NODEPORT_RANGE = (30000, 32767)
DEFAULT_RTPS_DISCOVERY_PORT = 7400
DEFAULT_RTPS_MULTICAST_GROUP = "239.255.0.1"
DEFAULT_ENCAPSULATION_OVERHEAD = 100
MIN_MTU = 576


class SpecError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class ParseError(SpecError):
    pass


class SpecReferenceError(SpecError):
    pass


class InvariantError(SpecError):
    pass


class Protocol(str, Enum):
    TCP = "TCP"
    UDP = "UDP"


class TrafficClass(str, Enum):
    RTPS = "RTPS"
    EXTERNAL_DEVICE = "EXTERNAL_DEVICE"
    GENERIC = "GENERIC"


@dataclass(frozen=True)
class PortSpec:
    port: int
    protocol: Protocol = Protocol.TCP
    traffic_class: TrafficClass = TrafficClass.GENERIC
    # user insists on a NodePort even when the port falls outside the range
    force_node_port: bool = False

    def to_dict(self) -> dict:
        d = {
            "port": self.port,
            "protocol": self.protocol.value,
            "traffic_class": self.traffic_class.value,
        }
        if self.force_node_port:
            d["force_node_port"] = True
        return d


@dataclass(frozen=True)
class TopicSpec:
    name: str
    message_size: int
    rate: float = 0

    def to_dict(self) -> dict:
        return {"name": self.name, "message_size": self.message_size, "rate": self.rate}


@dataclass(frozen=True)
class RosNodeSpec:
    name: str
    container: str
    publishes: tuple[str, ...] = ()
    subscribes: tuple[str, ...] = ()
    hardware: dict[str, int] = field(default_factory=dict)
    pinned_node: str | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "name": self.name,
            "container": self.container,
            "publishes": list(self.publishes),
            "subscribes": list(self.subscribes),
            "hardware": dict(self.hardware),
        }
        if self.pinned_node is not None:
            d["pinned_node"] = self.pinned_node
        return d


@dataclass(frozen=True)
class ContainerSpec:
    name: str
    image: str
    cpu_request: int = 0
    memory_request: int = 0
    exposed_ports: tuple[PortSpec, ...] = ()
    is_ros: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "image": self.image,
            "cpu_request": self.cpu_request,
            "memory_request": self.memory_request,
            "exposed_ports": [p.to_dict() for p in self.exposed_ports],
            "is_ros": self.is_ros,
        }


@dataclass(frozen=True)
class PodPlan:
    name: str
    containers: tuple[str, ...]
    ros_nodes: tuple[str, ...]
    aggregate_hardware: dict[str, int]
    aggregate_cpu: int
    aggregate_memory: int


@dataclass(frozen=True)
class AppSpec:
    name: str
    ros_nodes: tuple[RosNodeSpec, ...] = ()
    topics: tuple[TopicSpec, ...] = ()
    containers: tuple[ContainerSpec, ...] = ()
    pod_grouping: dict[str, str] = field(default_factory=dict)

    def container(self, name: str) -> ContainerSpec:
        for c in self.containers:
            if c.name == name:
                return c
        raise KeyError(name)

    def topic(self, name: str) -> TopicSpec:
        for t in self.topics:
            if t.name == name:
                return t
        raise KeyError(name)

    def nodes_in(self, container: str) -> list[RosNodeSpec]:
        return [n for n in self.ros_nodes if n.container == container]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "ros_nodes": [n.to_dict() for n in self.ros_nodes],
            "topics": [t.to_dict() for t in self.topics],
            "containers": [c.to_dict() for c in self.containers],
            "pod_grouping": dict(self.pod_grouping),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


@dataclass(frozen=True)
class ClusterNode:
    name: str
    subnet: str
    phys_mtu: int = 1500
    cpu_capacity: int = 0
    memory_capacity: int = 0
    extended_resources: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "subnet": self.subnet,
            "phys_mtu": self.phys_mtu,
            "cpu_capacity": self.cpu_capacity,
            "memory_capacity": self.memory_capacity,
            "extended_resources": dict(self.extended_resources),
        }


@dataclass(frozen=True)
class NetworkBackend:
    name: str
    supports_multicast: bool
    igmp_snooping: bool = False
    overlay_mtu: int = 1400
    encapsulation_overhead: int = DEFAULT_ENCAPSULATION_OVERHEAD

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "supports_multicast": self.supports_multicast,
            "igmp_snooping": self.igmp_snooping,
            "overlay_mtu": self.overlay_mtu,
            "encapsulation_overhead": self.encapsulation_overhead,
        }


@dataclass(frozen=True)
class ClusterSpec:
    nodes: tuple[ClusterNode, ...]
    backend: NetworkBackend
    nodeport_range: tuple[int, int] = DEFAULT_NODEPORT_RANGE
    rtps_discovery_port: int = DEFAULT_RTPS_DISCOVERY_PORT
    rtps_multicast_group: str = DEFAULT_RTPS_MULTICAST_GROUP
    # orchestrator flavour (k3s, k8s, ...); informational only
    distribution: str = "k3s"

    def node(self, name: str) -> ClusterNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "nodes": [n.to_dict() for n in self.nodes],
            "backend": self.backend.to_dict(),
            "nodeport_range": list(self.nodeport_range),
            "rtps_discovery_port": self.rtps_discovery_port,
            "rtps_multicast_group": self.rtps_multicast_group,
            "distribution": self.distribution,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


# ---------------------------------------------------------------------------
# strict document readers


def _join(path: str, key: str | int) -> str:
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else key


def _obj(value: Any, path: str, required: Iterable[str], optional: Iterable[str] = ()) -> dict:
    if not isinstance(value, dict):
        raise ParseError(path, f"expected an object, got {type(value).__name__}")
    required = list(required)
    allowed = set(required) | set(optional)
    for key in value:
        if key not in allowed:
            raise ParseError(_join(path, key), f"unknown key {key!r}")
    for key in required:
        if key not in value:
            raise ParseError(_join(path, key), "missing required key")
    return value


def _list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise ParseError(path, f"expected a list, got {type(value).__name__}")
    return value


def _str(value: Any, path: str) -> str:
    if not isinstance(value, str) or not value:
        raise ParseError(path, "expected a non-empty string")
    return value


def _int(value: Any, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise InvariantError(path, f"must be >= {minimum}, got {value}")
    return value


def _num(value: Any, path: str, minimum: float) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(path, f"expected a number, got {value!r}")
    if value < minimum:
        raise InvariantError(path, f"must be >= {minimum}, got {value}")
    return value


def _bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise ParseError(path, f"expected a boolean, got {value!r}")
    return value


def _enum(cls, value: Any, path: str):
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise ParseError(path, f"expected one of {choices}, got {value!r}") from None


def _counts(value: Any, path: str, minimum: int) -> dict[str, int]:
    if not isinstance(value, dict):
        raise ParseError(path, "expected an object of resource counts")
    return {_str(k, _join(path, k)): _int(v, _join(path, k), minimum) for k, v in value.items()}


def _names(value: Any, path: str) -> tuple[str, ...]:
    return tuple(_str(v, _join(path, i)) for i, v in enumerate(_list(value, path)))


def _unique(items: Iterable[str], path: str, what: str) -> None:
    seen: set[str] = set()
    for i, name in enumerate(items):
        if name in seen:
            raise InvariantError(_join(path, i), f"duplicate {what} name {name!r}")
        seen.add(name)


def _decode(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError("", f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from None


def _port(raw: Any, path: str) -> PortSpec:
    raw = _obj(raw, path, ["port"], ["protocol", "traffic_class", "force_node_port"])
    port = _int(raw["port"], _join(path, "port"), 1)
    if port > 65535:
        raise InvariantError(_join(path, "port"), f"port {port} outside [1, 65535]")
    protocol = _enum(Protocol, raw.get("protocol", "TCP"), _join(path, "protocol"))
    cls = _enum(TrafficClass, raw.get("traffic_class", "GENERIC"), _join(path, "traffic_class"))
    if cls is TrafficClass.RTPS and protocol is not Protocol.UDP:
        raise InvariantError(_join(path, "protocol"), "RTPS traffic must use UDP")
    force = _bool(raw.get("force_node_port", False), _join(path, "force_node_port"))
    return PortSpec(port, protocol, cls, force)


def _container(raw: Any, path: str) -> ContainerSpec:
    raw = _obj(
        raw, path, ["name", "image"],
        ["cpu_request", "memory_request", "exposed_ports", "is_ros"],
    )
    ports_path = _join(path, "exposed_ports")
    ports = tuple(
        _port(p, _join(ports_path, i)) for i, p in enumerate(_list(raw.get("exposed_ports", []), ports_path))
    )
    seen: set[tuple[int, Protocol]] = set()
    for i, p in enumerate(ports):
        if (p.port, p.protocol) in seen:
            raise InvariantError(_join(ports_path, i), f"duplicate port {p.port}/{p.protocol.value}")
        seen.add((p.port, p.protocol))
    return ContainerSpec(
        name=_str(raw["name"], _join(path, "name")),
        image=_str(raw["image"], _join(path, "image")),
        cpu_request=_int(raw.get("cpu_request", 0), _join(path, "cpu_request"), 0),
        memory_request=_int(raw.get("memory_request", 0), _join(path, "memory_request"), 0),
        exposed_ports=ports,
        is_ros=_bool(raw.get("is_ros", False), _join(path, "is_ros")),
    )


def _ros_node(raw: Any, path: str) -> RosNodeSpec:
    raw = _obj(raw, path, ["name", "container"], ["publishes", "subscribes", "hardware", "pinned_node"])
    pinned = raw.get("pinned_node")
    return RosNodeSpec(
        name=_str(raw["name"], _join(path, "name")),
        container=_str(raw["container"], _join(path, "container")),
        publishes=_names(raw.get("publishes", []), _join(path, "publishes")),
        subscribes=_names(raw.get("subscribes", []), _join(path, "subscribes")),
        hardware=_counts(raw.get("hardware", {}), _join(path, "hardware"), 1),
        pinned_node=None if pinned is None else _str(pinned, _join(path, "pinned_node")),
    )


def _topic(raw: Any, path: str) -> TopicSpec:
    raw = _obj(raw, path, ["name", "message_size"], ["rate"])
    return TopicSpec(
        name=_str(raw["name"], _join(path, "name")),
        message_size=_int(raw["message_size"], _join(path, "message_size"), 1),
        rate=_num(raw.get("rate", 0), _join(path, "rate"), 0),
    )


def app_from_dict(raw: Any) -> AppSpec:
    raw = _obj(raw, "", ["name"], ["ros_nodes", "topics", "containers", "pod_grouping"])
    topics = tuple(_topic(t, f"topics[{i}]") for i, t in enumerate(_list(raw.get("topics", []), "topics")))
    containers = tuple(
        _container(c, f"containers[{i}]") for i, c in enumerate(_list(raw.get("containers", []), "containers"))
    )
    nodes = tuple(_ros_node(n, f"ros_nodes[{i}]") for i, n in enumerate(_list(raw.get("ros_nodes", []), "ros_nodes")))
    grouping_raw = raw.get("pod_grouping", {})
    if not isinstance(grouping_raw, dict):
        raise ParseError("pod_grouping", "expected an object mapping container -> pod")
    grouping = {_str(k, _join("pod_grouping", k)): _str(v, _join("pod_grouping", k)) for k, v in grouping_raw.items()}

    _unique((t.name for t in topics), "topics", "topic")
    _unique((c.name for c in containers), "containers", "container")
    _unique((n.name for n in nodes), "ros_nodes", "ROS node")

    topic_names = {t.name for t in topics}
    container_names = {c.name for c in containers}
    for i, n in enumerate(nodes):
        if n.container not in container_names:
            raise SpecReferenceError(f"ros_nodes[{i}].container", f"unknown container {n.container!r}")
        for kind in ("publishes", "subscribes"):
            for j, t in enumerate(getattr(n, kind)):
                if t not in topic_names:
                    raise SpecReferenceError(f"ros_nodes[{i}].{kind}[{j}]", f"unknown topic {t!r}")
    for key in grouping:
        if key not in container_names:
            raise SpecReferenceError(_join("pod_grouping", key), f"unknown container {key!r}")
    for i, c in enumerate(containers):
        if c.name not in grouping:
            raise SpecReferenceError(f"containers[{i}]", f"container {c.name!r} is not mapped to a pod")

    return AppSpec(_str(raw["name"], "name"), nodes, topics, containers, grouping)


def cluster_from_dict(raw: Any) -> ClusterSpec:
    raw = _obj(
        raw, "", ["nodes", "backend"],
        ["nodeport_range", "rtps_discovery_port", "rtps_multicast_group", "distribution"],
    )
    nodes = []
    for i, n in enumerate(_list(raw["nodes"], "nodes")):
        p = f"nodes[{i}]"
        n = _obj(n, p, ["name", "subnet"], ["phys_mtu", "cpu_capacity", "memory_capacity", "extended_resources"])
        nodes.append(ClusterNode(
            name=_str(n["name"], _join(p, "name")),
            subnet=_str(n["subnet"], _join(p, "subnet")),
            phys_mtu=_int(n.get("phys_mtu", 1500), _join(p, "phys_mtu"), MIN_MTU),
            cpu_capacity=_int(n.get("cpu_capacity", 0), _join(p, "cpu_capacity"), 0),
            memory_capacity=_int(n.get("memory_capacity", 0), _join(p, "memory_capacity"), 0),
            extended_resources=_counts(n.get("extended_resources", {}), _join(p, "extended_resources"), 0),
        ))
    if not nodes:
        raise InvariantError("nodes", "cluster needs at least one node")
    _unique((n.name for n in nodes), "nodes", "node")

    b = _obj(
        raw["backend"], "backend", ["name", "supports_multicast"],
        ["igmp_snooping", "overlay_mtu", "encapsulation_overhead"],
    )
    backend = NetworkBackend(
        name=_str(b["name"], "backend.name"),
        supports_multicast=_bool(b["supports_multicast"], "backend.supports_multicast"),
        igmp_snooping=_bool(b.get("igmp_snooping", False), "backend.igmp_snooping"),
        overlay_mtu=_int(b.get("overlay_mtu", 1400), "backend.overlay_mtu", MIN_MTU),
        encapsulation_overhead=_int(
            b.get("encapsulation_overhead", DEFAULT_ENCAPSULATION_OVERHEAD), "backend.encapsulation_overhead", 0
        ),
    )

    rng = _list(raw.get("nodeport_range", list(DEFAULT_NODEPORT_RANGE)), "nodeport_range")
    if len(rng) != 2:
        raise ParseError("nodeport_range", "expected [lower, upper]")
    lo = _int(rng[0], "nodeport_range[0]", 1)
    hi = _int(rng[1], "nodeport_range[1]", 1)
    if lo > hi:
        raise InvariantError("nodeport_range", f"lower bound {lo} exceeds upper bound {hi}")

    return ClusterSpec(
        nodes=tuple(nodes),
        backend=backend,
        nodeport_range=(lo, hi),
        rtps_discovery_port=_int(raw.get("rtps_discovery_port", DEFAULT_RTPS_DISCOVERY_PORT), "rtps_discovery_port", 1),
        rtps_multicast_group=_str(raw.get("rtps_multicast_group", DEFAULT_RTPS_MULTICAST_GROUP), "rtps_multicast_group"),
        distribution=_str(raw.get("distribution", "k3s"), "distribution"),
    )


def load_app_spec(text: str) -> AppSpec:
    return app_from_dict(_decode(text))


def load_cluster_spec(text: str) -> ClusterSpec:
    return cluster_from_dict(_decode(text))


def _sum_counts(maps: Iterable[dict[str, int]]) -> dict[str, int]:
    total: dict[str, int] = {}
    for m in maps:
        for k, v in m.items():
            total[k] = total.get(k, 0) + v
    return dict(sorted(total.items()))


def container_hardware(app: AppSpec, container: str) -> dict[str, int]:
    """Extended resources demanded by the ROS nodes hosted in ``container``."""
    return _sum_counts(n.hardware for n in app.nodes_in(container))


def derive_pods(app: AppSpec) -> list[PodPlan]:
    """Materialize the declared container grouping into pod plans, sorted by name.

    Grouping problems (e.g. two ROS containers in one pod) are left for the
    rule catalog to report.
    """
    members: dict[str, list[ContainerSpec]] = {}
    for c in app.containers:
        members.setdefault(app.pod_grouping[c.name], []).append(c)
    pods = []
    for pod_name in sorted(members):
        cs = sorted(members[pod_name], key=lambda c: c.name)
        names = tuple(c.name for c in cs)
        ros_nodes = tuple(sorted(n.name for n in app.ros_nodes if n.container in names))
        pods.append(PodPlan(
            name=pod_name,
            containers=names,
            ros_nodes=ros_nodes,
            aggregate_hardware=_sum_counts(container_hardware(app, c.name) for c in cs),
            aggregate_cpu=sum(c.cpu_request for c in cs),
            aggregate_memory=sum(c.memory_request for c in cs),
        ))
    return pods
