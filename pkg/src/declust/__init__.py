"""Simulator and analysis toolkit for decentralized multi-task networks.

Agents connected by a graph learn per-cluster parameter vectors with
stochastic gradients while discovering, online, which neighbors share
their task. Includes the relay ("linking") extension that routes useful
iterates across foreign-cluster edges, plus theoretical bound calculators
and a Monte-Carlo experiment harness.
"""

from declust.model import (
    AgentDataSpec,
    ClusterGroundTruth,
    HyperParams,
    RiskSpec,
    Topology,
    compute_risk_constants,
    generate_models,
    generate_topology,
    sample_datum,
)
from declust.scenario import Scenario, load_scenario, save_scenario

__all__ = [
    "AgentDataSpec",
    "ClusterGroundTruth",
    "HyperParams",
    "RiskSpec",
    "Scenario",
    "Topology",
    "compute_risk_constants",
    "generate_models",
    "generate_topology",
    "load_scenario",
    "sample_datum",
    "save_scenario",
]
