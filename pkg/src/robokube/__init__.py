"""Planning, validation, placement, simulation and rendering for ROS 2 on Kubernetes."""

from .model import (
    AppSpec,
    ClusterSpec,
    PodPlan,
    SpecError,
    derive_pods,
    load_app_spec,
    load_cluster_spec,
)
from .netsim import SimParams, oracle_reachability, simulate_dataplane, simulate_discovery
from .placer import Placement, eligible_nodes, plan_placement
from .render import render_all, render_exposure_manifests, render_pod_manifest
from .rules import decide_exposure, validate
from .slim import ImageModel, RuntimeTrace, compute_keep_set, slim_report

__version__ = "0.1.0"
