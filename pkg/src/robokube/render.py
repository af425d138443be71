"""Manifest bundle rendering.

Output is plain block YAML written by a tiny emitter rather than a YAML
library so the bytes are fixed: two-space indent, sequences not indented
under their key (kubectl style), LF endings, key order as constructed.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

from .model import AppSpec, ClusterSpec, PodPlan, Protocol, container_hardware, derive_pods
from .placer import Placement
from .rules import Strategy, decide_exposure


class RenderError(RuntimeError):
    pass


@dataclass(frozen=True)
class ManifestFile:
    path: str
    content: str


@dataclass(frozen=True)
class ManifestBundle:
    files: tuple[ManifestFile, ...]
    values_digest: str

    @property
    def paths(self) -> list[str]:
        return [f.path for f in self.files]

    def write(self, out_dir: str | Path) -> list[Path]:
        out_dir = Path(out_dir)
        written = []
        for f in self.files:
            target = out_dir / f.path
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(f.content.encode("utf-8"))
            written.append(target)
        return written


_PLAIN = re.compile(r"[A-Za-z0-9_./][A-Za-z0-9_./:@-]*")
_NUMBERISH = re.compile(r"[-+]?(\d[\d_]*)?(\.\d*)?([eE][-+]?\d+)?|0x[0-9a-fA-F]+|0o[0-7]+")
_RESERVED = {"true", "false", "yes", "no", "on", "off", "null", "~", "y", "n"}


def _scalar(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    s = str(v)
    if _PLAIN.fullmatch(s) and not _NUMBERISH.fullmatch(s) and s.lower() not in _RESERVED:
        return s
    return json.dumps(s)


def _emit(obj, pad: str = "") -> list[str]:
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            key = _scalar(k)
            if isinstance(v, dict) and v:
                lines.append(f"{pad}{key}:")
                lines += _emit(v, pad + "  ")
            elif isinstance(v, list) and v:
                lines.append(f"{pad}{key}:")
                lines += _emit(v, pad)
            elif isinstance(v, (dict, list)):
                lines.append(f"{pad}{key}: {'{}' if isinstance(v, dict) else '[]'}")
            else:
                lines.append(f"{pad}{key}: {_scalar(v)}")
    else:
        for item in obj:
            if isinstance(item, dict) and item:
                sub = _emit(item, pad + "  ")
                lines.append(f"{pad}- {sub[0][len(pad) + 2:]}")
                lines += sub[1:]
            else:
                lines.append(f"{pad}- {_scalar(item)}")
    return lines


def to_yaml(obj: dict) -> str:
    return "\n".join(_emit(obj)) + "\n"


def pod_label(pod: str) -> dict:
    return {"robokube/pod": pod}


def render_pod_manifest(pod: PodPlan, placement: Placement, app: AppSpec) -> str:
    node = placement.assignments.get(pod.name)
    if node is None:
        raise RenderError(f"pod not placed: {pod.name}")
    containers = []
    for cname in pod.containers:
        c = app.container(cname)
        entry: dict = {"name": c.name, "image": c.image}
        if c.exposed_ports:
            entry["ports"] = [
                {"containerPort": p.port, "protocol": p.protocol.value} for p in c.exposed_ports
            ]
        resources: dict = {"requests": {"cpu": f"{c.cpu_request}m", "memory": c.memory_request}}
        hw = container_hardware(app, cname)
        if hw:
            resources["limits"] = hw
        entry["resources"] = resources
        containers.append(entry)
    doc = {
        "apiVersion": "v1",
        "kind": "Pod",
        "metadata": {"name": pod.name, "labels": pod_label(pod.name)},
        "spec": {"nodeName": node, "containers": containers},
    }
    return to_yaml(doc)


def _exposures(app: AppSpec, cluster: ClusterSpec):
    """Yield (pod, container, decision) for every exposed port, threading NodePort claims."""
    taken: set[int] = set()
    ports = sorted((
        (app.pod_grouping[c.name], c.name, p)
        for c in app.containers
        for p in c.exposed_ports
    ), key=lambda e: (e[0], e[1], e[2].port, e[2].protocol.value))
    for pod, cname, port in ports:
        decision = decide_exposure(port, cluster, taken)
        if decision.assigned_nodeport is not None:
            taken.add(decision.assigned_nodeport)
        yield pod, cname, decision


def _exposure_file(pod: str, decision) -> ManifestFile | None:
    port = decision.port
    name = f"{pod}-port-{port.port}"
    if port.protocol is Protocol.UDP:
        name += "-udp"
    if decision.strategy is Strategy.NODE_PORT:
        doc = {
            "apiVersion": "v1",
            "kind": "Service",
            "metadata": {"name": name},
            "spec": {
                "type": "NodePort",
                "selector": pod_label(pod),
                "ports": [{
                    "name": f"port-{port.port}",
                    "protocol": port.protocol.value,
                    "port": port.port,
                    "targetPort": port.port,
                    "nodePort": decision.assigned_nodeport,
                }],
            },
        }
        return ManifestFile(f"services/{name}.yaml", to_yaml(doc))
    if decision.strategy is Strategy.INGRESS_TCP_ROUTE:
        service = {"name": pod, "port": port.port}
        if port.protocol is Protocol.UDP:
            kind, route = "IngressRouteUDP", {"services": [service]}
        else:
            kind, route = "IngressRouteTCP", {"match": "HostSNI(`*`)", "services": [service]}
        doc = {
            "apiVersion": "traefik.io/v1alpha1",
            "kind": kind,
            "metadata": {"name": name},
            "spec": {"entryPoints": [f"port-{port.port}"], "routes": [route]},
        }
        return ManifestFile(f"routes/{name}.yaml", to_yaml(doc))
    return None


def render_exposure_manifests(app: AppSpec, cluster: ClusterSpec) -> list[str]:
    out = []
    for pod, _, decision in _exposures(app, cluster):
        f = _exposure_file(pod, decision)
        if f is not None:
            out.append(f.content)
    return out


def values_digest(app: AppSpec, cluster: ClusterSpec, placement: Placement) -> str:
    blob = json.dumps(
        {"app": app.to_dict(), "cluster": cluster.to_dict(), "placement": placement.to_dict()},
        sort_keys=True, separators=(",", ":"),
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _values(app: AppSpec, cluster: ClusterSpec, placement: Placement, pods: list[PodPlan], digest: str) -> dict:
    pod_values = {}
    for pod in pods:
        containers = {}
        for cname in pod.containers:
            c = app.container(cname)
            entry: dict = {
                "image": c.image,
                "cpu": f"{c.cpu_request}m",
                "memory": c.memory_request,
            }
            hw = container_hardware(app, cname)
            if hw:
                entry["limits"] = hw
            containers[cname] = entry
        pod_values[pod.name] = {"node": placement.assignments[pod.name], "containers": containers}
    exposure = []
    for pod, cname, d in _exposures(app, cluster):
        item = {
            "pod": pod,
            "container": cname,
            "port": d.port.port,
            "protocol": d.port.protocol.value,
            "strategy": d.strategy.value,
        }
        if d.strategy is Strategy.NODE_PORT:
            item["nodePort"] = d.assigned_nodeport
        elif d.strategy is Strategy.INGRESS_TCP_ROUTE:
            item["entryPoint"] = f"port-{d.port.port}"
        exposure.append(item)
    return {
        "app": app.name,
        "valuesDigest": digest,
        "rtps": {
            "discoveryPort": cluster.rtps_discovery_port,
            "multicastGroup": cluster.rtps_multicast_group,
        },
        "pods": pod_values,
        "exposure": exposure,
    }


def render_all(app: AppSpec, cluster: ClusterSpec, placement: Placement) -> ManifestBundle:
    pods = derive_pods(app)
    missing = [p.name for p in pods if p.name not in placement.assignments]
    if missing:
        raise RenderError(f"pod not placed: {', '.join(missing)}")
    digest = values_digest(app, cluster, placement)
    files = [ManifestFile(f"pods/{p.name}.yaml", render_pod_manifest(p, placement, app)) for p in pods]
    for pod, _, decision in _exposures(app, cluster):
        f = _exposure_file(pod, decision)
        if f is not None:
            files.append(f)
    files.append(ManifestFile("values.yaml", to_yaml(_values(app, cluster, placement, pods, digest))))
    files.sort(key=lambda f: f.path)
    paths = [f.path for f in files]
    dupes = sorted({p for p in paths if paths.count(p) > 1})
    if dupes:
        raise RenderError(f"duplicate manifest paths {dupes}; two containers in one pod expose the same port")
    return ManifestBundle(tuple(files), digest)
