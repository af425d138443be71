import json
import random
from pathlib import Path

import pytest

from robokube.model import app_from_dict, cluster_from_dict, load_app_spec, load_cluster_spec

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
TELEOP_APP = FIXTURES / "teleop" / "app.json"
TELEOP_CLUSTER = FIXTURES / "teleop" / "cluster.json"
GOLDEN = Path(__file__).resolve().parent / "golden" / "teleop"

JOYSTICK = "squat.ai/joystick"
RESOURCES = [JOYSTICK, "nvidia.com/gpu", "example.com/lidar"]


@pytest.fixture
def teleop_raw():
    return json.loads(TELEOP_APP.read_text()), json.loads(TELEOP_CLUSTER.read_text())


@pytest.fixture
def teleop():
    return load_app_spec(TELEOP_APP.read_text()), load_cluster_spec(TELEOP_CLUSTER.read_text())


def load_pair(raw_app, raw_cluster):
    return app_from_dict(raw_app), cluster_from_dict(raw_cluster)


def random_spec(rng: random.Random, max_nodes=6, max_pods=10, ros_only=False):
    """Raw (app, cluster) documents spanning every rule's trigger and non-trigger side."""
    n_nodes = rng.randint(1, max_nodes)
    nodes = []
    for i in range(n_nodes):
        nodes.append({
            "name": f"n{i}",
            "subnet": rng.choice(["lan-a", "lan-b", "wan"]),
            "phys_mtu": rng.choice([1400, 1450, 1500, 1500, 9000]),
            "cpu_capacity": rng.choice([1000, 2000, 4000, 8000]),
            "memory_capacity": rng.choice([1, 2, 4, 8]) * 2**30,
            "extended_resources": {r: rng.randint(0, 2) for r in rng.sample(RESOURCES, rng.randint(0, 2))},
        })
    backend = {
        "name": rng.choice(["kube-ovn", "weavenet", "flannel"]),
        "supports_multicast": rng.random() < 0.7,
        "igmp_snooping": rng.random() < 0.5,
        "overlay_mtu": rng.choice([1300, 1350, 1400, 1401, 1450, 1500]),
        "encapsulation_overhead": rng.choice([50, 100, 100]),
    }
    cluster = {"nodes": nodes, "backend": backend}

    topics = [{"name": f"/t{i}", "message_size": rng.choice([64, 1400, 4096]), "rate": rng.choice([0, 1, 10, 2.5])}
              for i in range(rng.randint(1, 5))]
    containers, grouping, ros_nodes = [], {}, []
    n_pods = rng.randint(0, max_pods)
    for p in range(n_pods):
        # containers in a pod share one network stack, so ports are unique per pod
        used: set[int] = set()
        for c in range(rng.choice([1, 1, 1, 2])):
            name = f"p{p}c{c}"
            ports = []
            for _ in range(rng.choice([0, 0, 1, 2])):
                kind = rng.choice(["RTPS", "EXTERNAL_DEVICE", "GENERIC"])
                port = rng.choice([7400, 7410, 30080, 30500, 32767, 32768, 50001, 29999])
                if port in used:
                    continue
                used.add(port)
                entry = {"port": port, "protocol": "UDP" if kind == "RTPS" else rng.choice(["TCP", "UDP"]),
                         "traffic_class": kind}
                if kind != "RTPS" and rng.random() < 0.3:
                    entry["force_node_port"] = True
                ports.append(entry)
            is_ros = True if ros_only else rng.random() < 0.7
            containers.append({
                "name": name, "image": f"img/{name}:1",
                "cpu_request": rng.choice([0, 100, 500, 1500]),
                "memory_request": rng.choice([0, 2**27, 2**29]),
                "exposed_ports": ports, "is_ros": is_ros,
            })
            grouping[name] = f"pod-{p}"
            if is_ros:
                for k in range(rng.randint(1, 2)):
                    hw = {}
                    if rng.random() < 0.25:
                        hw[rng.choice(RESOURCES)] = rng.randint(1, 2)
                    node = {
                        "name": f"{name}-node{k}", "container": name,
                        "publishes": [t["name"] for t in rng.sample(topics, rng.randint(0, len(topics)))],
                        "subscribes": [t["name"] for t in rng.sample(topics, rng.randint(0, len(topics)))],
                        "hardware": hw,
                    }
                    if rng.random() < 0.1:
                        node["pinned_node"] = rng.choice(nodes)["name"]
                    ros_nodes.append(node)
    app = {"name": "random", "ros_nodes": ros_nodes, "topics": topics,
           "containers": containers, "pod_grouping": grouping}
    return app, cluster


ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
