"""robokube command line: validate -> plan -> simulate -> render -> slim.

Exit codes: 0 ok, 1 findings (violations, unplaced pods, broken paths),
2 bad input or usage.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import model, netsim, placer, render, rules, slim

EXIT_OK, EXIT_FINDINGS, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror or e}") from None


def _load_inputs(args):
    try:
        app = model.load_app_spec(_read(args.app))
    except model.SpecError as e:
        raise InputError(f"{args.app}: {e}") from None
    try:
        cluster = model.load_cluster_spec(_read(args.cluster))
    except model.SpecError as e:
        raise InputError(f"{args.cluster}: {e}") from None
    return app, cluster


def _placement(args, app, cluster) -> placer.Placement:
    if getattr(args, "placement", None):
        try:
            return placer.Placement.loads(_read(args.placement))
        except (ValueError, KeyError, TypeError) as e:
            raise InputError(f"{args.placement}: invalid placement: {e}") from None
    return placer.plan_placement(model.derive_pods(app), app, cluster)


def cmd_validate(args) -> int:
    app, cluster = _load_inputs(args)
    found = rules.validate(app, model.derive_pods(app), cluster)
    if args.format == "json":
        sys.stdout.write(rules.violations_json(found))
    else:
        sys.stdout.write(rules.violations_table(found))
    return EXIT_FINDINGS if rules.has_errors(found) else EXIT_OK


def cmd_plan(args) -> int:
    app, cluster = _load_inputs(args)
    placement = placer.plan_placement(model.derive_pods(app), app, cluster)
    text = placement.dumps()
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as e:
            raise InputError(f"cannot write {args.out}: {e.strerror or e}") from None
    else:
        sys.stdout.write(text)
    for pod, reason in placement.unplaced:
        print(f"unplaced: {pod}: {reason}", file=sys.stderr)
    return EXIT_FINDINGS if placement.unplaced else EXIT_OK


def _text_sim(reach: netsim.ReachabilityReport, traffic: netsim.TrafficReport) -> str:
    out = [f"participants: {', '.join(reach.participants) or '-'}"]
    out.append(f"discovery complete: {'yes' if reach.complete else 'no'}")
    for a, b in sorted(reach.discovered):
        out.append(f"  {a} -> {b}")
    out.append("multicast packets per node:")
    for node, n in sorted(reach.mcast_packets_per_node.items()):
        out.append(f"  {node}: {n}")
    if reach.drops:
        reasons = sorted({d.reason for d in reach.drops})
        out.append(f"discovery drops: {len(reach.drops)} ({', '.join(reasons)})")
    out.append("edges:")
    for e in traffic.per_edge:
        note = f" [{e.drop_reason}]" if e.drop_reason else ""
        out.append(
            f"  {e.publisher} -> {e.subscriber} {e.topic}: delivered {e.messages_delivered}, "
            f"dropped {e.messages_dropped}, fragments {e.fragments_per_message}{note}"
        )
    for topic, sub in traffic.broken_paths:
        out.append(f"broken: {sub} has no publisher for {topic}")
    return "\n".join(out) + "\n"


def cmd_simulate(args) -> int:
    app, cluster = _load_inputs(args)
    try:
        params = netsim.SimParams(duration=args.duration_ms, announce_period=args.announce_period_ms, seed=args.seed)
    except ValueError as e:
        raise InputError(f"invalid simulation parameters: {e}") from None
    placement = _placement(args, app, cluster)
    try:
        reach = netsim.simulate_discovery(placement, app, cluster, params)
    except netsim.SimulationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FINDINGS
    traffic = netsim.simulate_dataplane(placement, app, cluster, params, reach)
    if args.format == "json":
        sys.stdout.write(netsim.reports_json(reach, traffic))
    else:
        sys.stdout.write(_text_sim(reach, traffic))
    return EXIT_OK if reach.complete and not traffic.broken_paths else EXIT_FINDINGS


def cmd_render(args) -> int:
    app, cluster = _load_inputs(args)
    placement = _placement(args, app, cluster)
    try:
        bundle = render.render_all(app, cluster, placement)
    except render.RenderError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FINDINGS
    try:
        bundle.write(args.out_dir)
    except OSError as e:
        raise InputError(f"cannot write bundle to {args.out_dir}: {e.strerror or e}") from None
    for path in bundle.paths:
        print(path)
    return EXIT_OK


def cmd_slim(args) -> int:
    try:
        image = slim.ImageModel.loads(_read(args.image))
        trace = slim.RuntimeTrace.loads(_read(args.trace)) if args.trace else slim.RuntimeTrace()
        report = slim.slim_report(image, slim.compute_keep_set(image, trace), trace)
    except (model.SpecError, slim.SlimError) as e:
        raise InputError(str(e)) from None
    if args.format == "json":
        sys.stdout.write(json.dumps(report.to_dict(), indent=2) + "\n")
    else:
        sys.stdout.write(report.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robokube", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def inputs(sp):
        sp.add_argument("-f", "--app", required=True, help="application spec (JSON)")
        sp.add_argument("-c", "--cluster", required=True, help="cluster spec (JSON)")

    def fmt(sp):
        sp.add_argument("--format", choices=["text", "json"], default="text", help="report format (default: text)")

    sp = sub.add_parser("validate", help="check the deployment rule catalog")
    inputs(sp)
    fmt(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("plan", help="place pods on cluster nodes")
    inputs(sp)
    sp.add_argument("--out", help="write placement JSON here instead of stdout")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("simulate", help="simulate discovery and topic traffic")
    inputs(sp)
    sp.add_argument("-p", "--placement", help="placement JSON (default: plan on the fly)")
    sp.add_argument("--duration-ms", type=int, default=10000, help="simulated time in ms (default: 10000)")
    sp.add_argument("--announce-period-ms", type=int, default=1000, help="announcement period in ms (default: 1000)")
    sp.add_argument("--seed", type=int, default=0, help="seed for announcement phases (default: 0)")
    fmt(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("render", help="write the manifest bundle")
    inputs(sp)
    sp.add_argument("-p", "--placement", help="placement JSON (default: plan on the fly)")
    sp.add_argument("--out-dir", required=True, help="directory for the bundle")
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("slim", help="dependency-closure image size analysis")
    sp.add_argument("image", help="image model JSON")
    sp.add_argument("trace", nargs="?", help="runtime trace JSON")
    fmt(sp)
    sp.set_defaults(func=cmd_slim)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
