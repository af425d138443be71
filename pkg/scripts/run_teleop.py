"""Run the teleoperation example end to end and write its manifest bundle.

    python3 scripts/run_teleop.py [out_dir]
"""
import sys
from pathlib import Path

from robokube.model import derive_pods, load_app_spec, load_cluster_spec
from robokube.netsim import SimParams, simulate_dataplane, simulate_discovery
from robokube.placer import plan_placement
from robokube.render import render_all
from robokube.rules import validate, violations_table

ROOT = Path(__file__).resolve().parent.parent
TELEOP = ROOT / "fixtures" / "teleop"


def main(out_dir: Path) -> int:
    app = load_app_spec((TELEOP / "app.json").read_text())
    cluster = load_cluster_spec((TELEOP / "cluster.json").read_text())
    pods = derive_pods(app)

    print(violations_table(validate(app, pods, cluster)))

    placement = plan_placement(pods, app, cluster)
    for pod, node in sorted(placement.assignments.items()):
        print(f"{pod:<16} -> {node:<10} {placement.migratability[pod].value}")

    params = SimParams(duration=10_000)
    reach = simulate_discovery(placement, app, cluster, params)
    traffic = simulate_dataplane(placement, app, cluster, params, reach)
    print(f"discovery complete: {'yes' if reach.complete else 'no'}")
    print(f"multicast packets per node: {reach.mcast_packets_per_node}")
    for e in traffic.per_edge:
        print(f"{e.topic:<40} {e.publisher} -> {e.subscriber}: {e.messages_delivered} delivered, {e.messages_dropped} dropped")

    bundle = render_all(app, cluster, placement)
    bundle.write(out_dir)
    print(f"wrote {len(bundle.files)} files to {out_dir}")
    return 0 if reach.complete and not traffic.broken_paths else 1


if __name__ == "__main__":
    sys.exit(main(Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "out" / "teleop"))
