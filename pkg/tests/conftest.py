"""Shared fixtures: small hand-built scenarios used across the test modules."""

import numpy as np
import pytest

from declust.model import AgentDataSpec, ClusterGroundTruth, HyperParams, Topology, generate_topology
from declust.scenario import Scenario, preset_scenario


def make_tiny_scenario(alpha: float = 0.1, mu: float = 0.05, nu: float = 0.9) -> Scenario:
    """4-agent ring, two 2-agent clusters, isotropic unit regressors."""
    topo = generate_topology(4, 2, "explicit", edges=[(0, 1), (1, 2), (2, 3), (3, 0)])
    clusters = ClusterGroundTruth(
        models=np.array([[1.0, 0.0], [-1.0, 0.0]]),
        assignment=np.array([0, 0, 1, 1]),
        delta=1.0,
    )
    specs = [AgentDataSpec(np.eye(2), 0.01) for _ in range(4)]
    hyper = HyperParams(np.array([mu]), alpha, nu, 0.5)
    return Scenario(topo, clusters, specs, hyper)


@pytest.fixture
def tiny_scenario() -> Scenario:
    return make_tiny_scenario()


@pytest.fixture
def bridge_scenario() -> Scenario:
    return preset_scenario("bridge")


@pytest.fixture
def ring_topology() -> Topology:
    return generate_topology(6, 2, "explicit", edges=[(k, (k + 1) % 6) for k in range(6)])
