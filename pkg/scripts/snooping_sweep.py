"""Compare multicast load per node with IGMP snooping on and off.

Spreads a growing number of ROS pods over a fixed cluster where only some
nodes host participants, and prints discovery packets per node.

    python3 scripts/snooping_sweep.py [--nodes 6] [--max-pods 8]
"""
import argparse
from dataclasses import replace

from robokube.model import AppSpec, ClusterNode, ClusterSpec, ContainerSpec, NetworkBackend, RosNodeSpec
from robokube.netsim import SimParams, simulate_discovery
from robokube.placer import Placement


def scenario(n_nodes: int, n_pods: int):
    nodes = tuple(ClusterNode(f"n{i}", "lan", cpu_capacity=8000, memory_capacity=8 * 2**30) for i in range(n_nodes))
    containers = tuple(ContainerSpec(f"c{i}", f"ros/c{i}:1", is_ros=True) for i in range(n_pods))
    ros = tuple(RosNodeSpec(f"r{i}", f"c{i}") for i in range(n_pods))
    app = AppSpec("sweep", ros_nodes=ros, containers=containers, pod_grouping={f"c{i}": f"pod-{i}" for i in range(n_pods)})
    # participants live on the first half of the cluster only
    hosts = max(1, n_nodes // 2)
    placement = Placement({f"pod-{i}": f"n{i % hosts}" for i in range(n_pods)})
    cluster = ClusterSpec(nodes, NetworkBackend("kube-ovn", supports_multicast=True))
    return placement, app, cluster


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=6)
    ap.add_argument("--max-pods", type=int, default=8)
    ap.add_argument("--duration-ms", type=int, default=10_000)
    args = ap.parse_args()

    params = SimParams(duration=args.duration_ms)
    print(f"{'pods':>4} {'snoop':>5} {'total':>7}  per node")
    for n_pods in range(1, args.max_pods + 1):
        placement, app, cluster = scenario(args.nodes, n_pods)
        for snoop in (False, True):
            c = replace(cluster, backend=replace(cluster.backend, igmp_snooping=snoop))
            counts = simulate_discovery(placement, app, c, params).mcast_packets_per_node
            row = " ".join(f"{counts[n.name]:>4}" for n in c.nodes)
            print(f"{n_pods:>4} {'on' if snoop else 'off':>5} {sum(counts.values()):>7}  {row}")


if __name__ == "__main__":
    main()
