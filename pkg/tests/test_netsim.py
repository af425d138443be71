import copy
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load_pair
from oracles import expected_mcast_counts
from robokube.model import derive_pods
from robokube.netsim import (
    MTU_EXCEEDED,
    NO_MULTICAST,
    SimParams,
    SimulationError,
    messages_in,
    oracle_reachability,
    participants,
    reports_json,
    simulate_dataplane,
    simulate_discovery,
)
from robokube.placer import Placement, plan_placement


def setup(raw_app, raw_cluster, placement=None):
    app, cluster = load_pair(raw_app, raw_cluster)
    if placement is None:
        placement = plan_placement(derive_pods(app), app, cluster)
    return placement, app, cluster


P = SimParams(duration=10_000)


def test_teleop_discovery_complete(teleop_raw):
    placement, app, cluster = setup(*teleop_raw)
    r = simulate_discovery(placement, app, cluster, P)
    assert r.participants == ("joy-pod/joy", "ur5-driver-pod/ur5-driver")
    assert r.complete
    assert r.matched_topics == (("joy-pod/joy", "ur5-driver-pod/ur5-driver", "/servo_node/delta_twist_cmds"),)
    assert r.drops == ()


def test_snooping_spares_idle_node(teleop_raw):
    app, cluster = teleop_raw
    cluster["nodes"].append({"name": "spare", "subnet": "lan-b", "cpu_capacity": 0})
    placement, app, cluster = setup(app, cluster)
    r = simulate_discovery(placement, app, cluster, P)
    assert r.complete
    assert r.mcast_packets_per_node["spare"] == 0
    assert r.mcast_packets_per_node["edge-1"] > 0


def test_no_multicast(teleop_raw):
    app, cluster = teleop_raw
    cluster["backend"]["supports_multicast"] = False
    placement, app, cluster = setup(app, cluster)
    r = simulate_discovery(placement, app, cluster, P)
    assert r.discovered == frozenset()
    assert r.drops and all(d.reason == NO_MULTICAST for d in r.drops)
    assert len(r.drops) == 2 * 10
    assert set(r.mcast_packets_per_node.values()) == {0}


def _single_participant():
    app = {
        "name": "solo",
        "topics": [{"name": "/t", "message_size": 10, "rate": 1}],
        "ros_nodes": [{"name": "n", "container": "c", "publishes": ["/t"]}],
        "containers": [{"name": "c", "image": "c:1", "is_ros": True}],
        "pod_grouping": {"c": "p"},
    }
    cluster = {
        "nodes": [{"name": "host", "subnet": "a"}, {"name": "other", "subnet": "b"}],
        "backend": {"name": "kube-ovn", "supports_multicast": True, "igmp_snooping": False},
    }
    return app, cluster


def test_single_participant_counts_hand_replay():
    # phase offset o in [0, 1000): announcements at o, o+1000, o+2000 -> 3 copies per node
    app, cluster = _single_participant()
    placement, app, cluster = setup(app, cluster, Placement({"p": "host"}))
    r = simulate_discovery(placement, app, cluster, SimParams(duration=3000, announce_period=1000, seed=7))
    assert r.mcast_packets_per_node == {"host": 3, "other": 3}
    cluster_snoop = copy.deepcopy(_single_participant()[1])
    cluster_snoop["backend"]["igmp_snooping"] = True
    placement, app, c2 = setup(_single_participant()[0], cluster_snoop, Placement({"p": "host"}))
    r = simulate_discovery(placement, app, c2, SimParams(duration=3000, announce_period=1000, seed=7))
    assert r.mcast_packets_per_node == {"host": 3, "other": 0}


def test_unplaced_ros_pod_is_an_error(teleop):
    app, cluster = teleop
    with pytest.raises(SimulationError, match="joy-pod"):
        simulate_discovery(Placement({"ur5-driver-pod": "cloud-1"}), app, cluster, P)


@pytest.mark.parametrize("kw", [
    dict(duration=500, announce_period=1000),
    dict(duration=1000, announce_period=0),
    dict(duration=1000, inter_subnet_latency=-1),
])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        SimParams(**kw)


def _fragment_fixture(overlay_mtu, message_size=4096):
    app = {
        "name": "frag",
        "topics": [{"name": "/cloud", "message_size": message_size, "rate": 10}],
        "ros_nodes": [
            {"name": "pub", "container": "a", "publishes": ["/cloud"]},
            {"name": "sub", "container": "b", "subscribes": ["/cloud"]},
        ],
        "containers": [
            {"name": "a", "image": "a:1", "is_ros": True},
            {"name": "b", "image": "b:1", "is_ros": True},
        ],
        "pod_grouping": {"a": "pa", "b": "pb"},
    }
    cluster = {
        "nodes": [{"name": "x", "subnet": "s1", "phys_mtu": 1500}, {"name": "y", "subnet": "s2", "phys_mtu": 1500}],
        "backend": {"name": "kube-ovn", "supports_multicast": True, "igmp_snooping": True,
                    "overlay_mtu": overlay_mtu, "encapsulation_overhead": 100},
    }
    return app, cluster


def test_fragments_4096_over_1400():
    placement, app, cluster = setup(*_fragment_fixture(1400), Placement({"pa": "x", "pb": "y"}))
    t = simulate_dataplane(placement, app, cluster, SimParams(duration=2000))
    (edge,) = t.per_edge
    assert (edge.messages_delivered, edge.messages_dropped, edge.fragments_per_message) == (20, 0, 3)


def test_mtu_misconfig_drops_inter_node():
    placement, app, cluster = setup(*_fragment_fixture(1450), Placement({"pa": "x", "pb": "y"}))
    t = simulate_dataplane(placement, app, cluster, SimParams(duration=2000))
    (edge,) = t.per_edge
    assert (edge.messages_delivered, edge.messages_dropped, edge.drop_reason) == (0, 20, MTU_EXCEEDED)


def test_mtu_misconfig_spares_same_node():
    placement, app, cluster = setup(*_fragment_fixture(1450), Placement({"pa": "x", "pb": "x"}))
    (edge,) = simulate_dataplane(placement, app, cluster, SimParams(duration=2000)).per_edge
    assert edge.messages_dropped == 0 and edge.fragments_per_message == 3


def test_same_pod_loopback():
    app, cluster = _fragment_fixture(1450)
    app["pod_grouping"] = {"a": "shared", "b": "shared"}
    placement, app, cluster = setup(app, cluster, Placement({"shared": "x"}))
    (edge,) = simulate_dataplane(placement, app, cluster, SimParams(duration=2000)).per_edge
    assert (edge.messages_delivered, edge.fragments_per_message) == (20, 1)


def test_subscriber_without_publisher_is_broken():
    app, cluster = _fragment_fixture(1400)
    app["ros_nodes"][0]["publishes"] = []
    placement, app, cluster = setup(app, cluster, Placement({"pa": "x", "pb": "y"}))
    t = simulate_dataplane(placement, app, cluster, P)
    assert t.per_edge == ()
    assert t.broken_paths == (("/cloud", "pb/b"),)


def test_teleop_no_broken_paths(teleop_raw):
    placement, app, cluster = setup(*teleop_raw)
    assert simulate_dataplane(placement, app, cluster, P).broken_paths == ()


def test_multicast_off_breaks_paths(teleop_raw):
    app, cluster = teleop_raw
    cluster["backend"]["supports_multicast"] = False
    placement, app, cluster = setup(app, cluster)
    t = simulate_dataplane(placement, app, cluster, P)
    assert t.broken_paths == (("/servo_node/delta_twist_cmds", "ur5-driver-pod/ur5-driver"),)


@pytest.mark.parametrize("rate, duration, expected", [(0, 5000, 0), (0.3, 10_000, 3), (2.5, 1000, 2), (125, 999, 124)])
def test_messages_in(rate, duration, expected):
    assert messages_in(rate, duration) == expected


def test_oracle_definition(teleop_raw):
    placement, app, cluster = setup(*teleop_raw)
    assert oracle_reachability(placement, app, cluster) == [[False, True], [True, False]]
    app_raw, cluster_raw = copy.deepcopy(teleop_raw)
    cluster_raw["backend"]["supports_multicast"] = False
    placement, app, cluster = setup(app_raw, cluster_raw)
    assert oracle_reachability(placement, app, cluster) == [[False, False], [False, False]]


def random_sim_instance(rng, max_nodes=6, max_participants=8):
    """A random ROS-only app plus an arbitrary (not planned) placement."""
    n_nodes = rng.randint(1, max_nodes)
    n_parts = rng.randint(1, max_participants)
    topics = [{"name": f"/t{i}", "message_size": rng.choice([64, 2000, 5000]), "rate": rng.choice([0, 1, 20])}
              for i in range(4)]
    containers, nodes_ros, grouping = [], [], {}
    for i in range(n_parts):
        containers.append({"name": f"c{i}", "image": f"c{i}:1", "is_ros": True})
        nodes_ros.append({
            "name": f"r{i}", "container": f"c{i}",
            "publishes": [t["name"] for t in rng.sample(topics, rng.randint(0, 2))],
            "subscribes": [t["name"] for t in rng.sample(topics, rng.randint(0, 2))],
        })
        grouping[f"c{i}"] = f"p{i}"
    cluster = {
        "nodes": [{"name": f"n{i}", "subnet": rng.choice(["a", "b", "c"]), "phys_mtu": rng.choice([1500, 9000])}
                  for i in range(n_nodes)],
        "backend": {"name": "kube-ovn", "supports_multicast": rng.random() < 0.8,
                    "igmp_snooping": rng.random() < 0.5, "overlay_mtu": rng.choice([1400, 1450])},
    }
    app = {"name": "sim", "topics": topics, "ros_nodes": nodes_ros, "containers": containers, "pod_grouping": grouping}
    placement = Placement({f"p{i}": f"n{rng.randrange(n_nodes)}" for i in range(n_parts)})
    return setup(app, cluster, placement)


def _with_snooping(cluster, on):
    from dataclasses import replace
    return replace(cluster, backend=replace(cluster.backend, igmp_snooping=on))


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(0, 2**31), st.integers(2, 6))
def test_snooping_neutral_and_saving(rng, seed, periods):
    placement, app, cluster = random_sim_instance(rng)
    params = SimParams(duration=periods * 1000 + rng.randrange(1000), seed=seed)
    on = simulate_discovery(placement, app, _with_snooping(cluster, True), params)
    off = simulate_discovery(placement, app, _with_snooping(cluster, False), params)
    assert on.discovered == off.discovered
    assert on.matched_topics == off.matched_topics
    hosting = set(placement.assignments.values())
    for node in on.mcast_packets_per_node:
        if node not in hosting:
            assert on.mcast_packets_per_node[node] == 0
        if cluster.backend.supports_multicast:
            assert off.mcast_packets_per_node[node] >= 1


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(0, 2**31))
def test_counts_match_closed_form(rng, seed):
    placement, app, cluster = random_sim_instance(rng)
    params = SimParams(duration=rng.randint(1000, 7000), announce_period=rng.choice([250, 500, 1000]), seed=seed)
    r = simulate_discovery(placement, app, cluster, params)
    expected = expected_mcast_counts(
        [n.name for n in cluster.nodes], set(placement.assignments.values()), len(r.participants),
        params.duration // params.announce_period, cluster.backend.supports_multicast, cluster.backend.igmp_snooping,
    )
    assert r.mcast_packets_per_node == expected


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(0, 2**31))
def test_discovery_matches_oracle(rng, seed):
    placement, app, cluster = random_sim_instance(rng)
    params = SimParams(duration=2000 + rng.randrange(3000), seed=seed)
    assert simulate_discovery(placement, app, cluster, params).matrix() == oracle_reachability(placement, app, cluster)


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_conservation_and_matching(rng):
    placement, app, cluster = random_sim_instance(rng)
    params = SimParams(duration=rng.randint(1000, 5000))
    reach = simulate_discovery(placement, app, cluster, params)
    for pub, sub, topic in reach.matched_topics:
        assert (pub, sub) in reach.discovered and (sub, pub) in reach.discovered
    traffic = simulate_dataplane(placement, app, cluster, params, reach)
    for e in traffic.per_edge:
        assert e.messages_delivered + e.messages_dropped == messages_in(app.topic(e.topic).rate, params.duration)


@settings(max_examples=30, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(0, 2**31))
def test_deterministic_reports(rng, seed):
    placement, app, cluster = random_sim_instance(rng)
    params = SimParams(duration=3000, seed=seed)
    a = reports_json(simulate_discovery(placement, app, cluster, params), simulate_dataplane(placement, app, cluster, params))
    b = reports_json(simulate_discovery(placement, app, cluster, params), simulate_dataplane(placement, app, cluster, params))
    assert a == b
    json.loads(a)


def test_virtual_ips_unique(teleop_raw):
    placement, app, cluster = setup(*teleop_raw)
    ips = [p.virtual_ip for p in participants(placement, app, cluster)]
    assert len(set(ips)) == len(ips)
