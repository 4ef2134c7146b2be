"""Scenario container, YAML schema and named presets.

A scenario config is a YAML/JSON document with keys `topology`,
`clusters`, `data_profiles`, `hyperparams` and `schedule`. Each section
either pins explicit values or gives a generation recipe; recipes are
materialized deterministically from the master seed. See README for the
full schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from declust.model import (
    AgentDataSpec,
    ClusterGroundTruth,
    HyperParams,
    ScenarioError,
    Topology,
    assign_clusters,
    generate_models,
    generate_topology,
    sample_data_profiles,
)


@dataclass(frozen=True)
class Scenario:
    """A fully materialized simulation scenario."""

    topology: Topology
    clusters: ClusterGroundTruth
    data_specs: list[AgentDataSpec]
    hyper: HyperParams
    # (round, new per-agent assignment); applied without resetting agent state
    schedule: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        n = self.topology.n_agents
        if self.clusters.assignment.shape[0] != n:
            raise ScenarioError("assignment length must match n_agents")
        if len(self.data_specs) != n:
            raise ScenarioError("need one data spec per agent")
        if self.hyper.alpha >= self.clusters.delta**2:
            raise ScenarioError("alpha must satisfy 0 < alpha < delta^2")
        prev = -1
        for rnd, a in self.schedule:
            if rnd <= prev:
                raise ScenarioError("switch rounds must be strictly increasing")
            prev = rnd
            a = np.asarray(a, dtype=int)
            if a.shape[0] != n or len(np.unique(a)) != self.clusters.n_clusters:
                raise ScenarioError("switch assignment invalid")
        self.hyper.broadcast(n)

    @property
    def n_agents(self) -> int:
        return self.topology.n_agents

    @property
    def dim(self) -> int:
        return self.clusters.dim

    def assignment_at(self, round_idx: int) -> np.ndarray:
        """Active assignment at the given round under the switch schedule."""
        a = self.clusters.assignment
        for rnd, new_a in self.schedule:
            if round_idx >= rnd:
                a = np.asarray(new_a, dtype=int)
        return a

    def true_clustering_matrix(self, assignment: np.ndarray | None = None) -> np.ndarray:
        """E°: adjacency masked to same-cluster links, diagonal included."""
        a = self.clusters.assignment if assignment is None else np.asarray(assignment)
        same = a[:, None] == a[None, :]
        return self.topology.adjacency & same


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def scenario_to_dict(scn: Scenario) -> dict:
    return {
        "topology": {
            "model": "explicit",
            "n_agents": scn.n_agents,
            "edges": [[int(i), int(j)] for i, j in scn.topology.edge_list()],
        },
        "clusters": {
            "delta": float(scn.clusters.delta),
            "models": scn.clusters.models.tolist(),
            "assignment": scn.clusters.assignment.tolist(),
        },
        "data_profiles": [
            {
                "regressor_covariance": s.regressor_covariance.tolist(),
                "noise_variance": float(s.noise_variance),
            }
            for s in scn.data_specs
        ],
        "hyperparams": {
            "step_sizes": scn.hyper.step_sizes.tolist(),
            "alpha": float(scn.hyper.alpha),
            "nu": float(scn.hyper.nu),
            "gamma": float(scn.hyper.gamma),
        },
        "schedule": [
            {"round": int(r), "assignment": a.tolist()} for r, a in scn.schedule
        ],
    }


def save_scenario(scn: Scenario, path: str | Path) -> None:
    path = Path(path)
    doc = scenario_to_dict(scn)
    if path.suffix == ".json":
        path.write_text(json.dumps(doc, indent=2))
    else:
        path.write_text(yaml.safe_dump(doc, sort_keys=False))


def _build_topology(cfg: dict, rng: np.random.Generator) -> Topology:
    model = cfg.get("model", "random-geometric-capped")
    n = int(cfg["n_agents"])
    n_max = int(cfg.get("n_max", n - 1))
    edges = [tuple(e) for e in cfg.get("edges", [])] or None
    return generate_topology(n, n_max, model, seed=rng, edges=edges)


def _build_clusters(cfg: dict, n_agents: int, rng: np.random.Generator) -> ClusterGroundTruth:
    delta = float(cfg["delta"])
    if "models" in cfg:
        models = np.asarray(cfg["models"], dtype=float)
    else:
        models = generate_models(
            int(cfg["n_clusters"]),
            int(cfg["dim"]),
            delta,
            tuple(cfg.get("value_range", (-1.0, 1.0))),
            seed=rng,
        )
    if "assignment" in cfg:
        assignment = np.asarray(cfg["assignment"], dtype=int)
    else:
        assignment = assign_clusters(n_agents, models.shape[0], rng)
    return ClusterGroundTruth(models, assignment, delta)


def _build_profiles(cfg, n_agents: int, dim: int, rng: np.random.Generator) -> list[AgentDataSpec]:
    if isinstance(cfg, list):
        return [
            AgentDataSpec(np.asarray(p["regressor_covariance"], dtype=float), float(p["noise_variance"]))
            for p in cfg
        ]
    cfg = cfg or {}
    if "noise_variance" in cfg and "regressor_covariance" in cfg:
        cov = np.asarray(cfg["regressor_covariance"], dtype=float)
        return [AgentDataSpec(cov, float(cfg["noise_variance"])) for _ in range(n_agents)]
    return sample_data_profiles(
        n_agents,
        dim,
        rng,
        noise_range=tuple(cfg.get("noise_range", (1e-3, 1e-2))),
        trace_range=tuple(cfg.get("trace_range", (1.0, 2.0))),
    )


def scenario_from_dict(cfg: dict, seed=None) -> Scenario:
    """Materialize a scenario config; recipe randomness flows from `seed`."""
    try:
        rng = np.random.default_rng(seed)
        topo = _build_topology(cfg["topology"], rng)
        clusters = _build_clusters(cfg["clusters"], topo.n_agents, rng)
        specs = _build_profiles(cfg.get("data_profiles"), topo.n_agents, clusters.dim, rng)
        hp_cfg = cfg["hyperparams"]
        hyper = HyperParams(
            step_sizes=np.asarray(hp_cfg.get("step_sizes", hp_cfg.get("step_size")), dtype=float),
            alpha=float(hp_cfg["alpha"]),
            nu=float(hp_cfg["nu"]),
            gamma=float(hp_cfg["gamma"]),
        )
        schedule = []
        for ev in cfg.get("schedule", []) or []:
            rnd = int(ev["round"])
            if "assignment" in ev:
                new_a = np.asarray(ev["assignment"], dtype=int)
            elif ev.get("reassign", "shuffle") == "shuffle":
                new_a = assign_clusters(topo.n_agents, clusters.n_clusters, rng)
            else:
                raise ScenarioError(f"unknown schedule event: {ev}")
            schedule.append((rnd, new_a))
        return Scenario(topo, clusters, specs, hyper, schedule)
    except KeyError as exc:
        raise ScenarioError(f"missing scenario config key: {exc}") from exc


def load_scenario(path: str | Path, seed=None) -> Scenario:
    path = Path(path)
    text = path.read_text()
    cfg = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    return scenario_from_dict(cfg, seed=seed)


# ---------------------------------------------------------------------------
# Named presets
# ---------------------------------------------------------------------------


def preset_config(name: str) -> dict:
    """Scenario recipes for the stock experiments."""
    if name == "protocol":
        # N=50, C=3, M=2, degree cap 6, switch at round 400
        return {
            "topology": {"model": "random-geometric-capped", "n_agents": 50, "n_max": 6},
            "clusters": {"n_clusters": 3, "dim": 2, "delta": 0.17},
            "data_profiles": {"noise_range": [1e-3, 1e-2], "trace_range": [1.0, 2.0]},
            "hyperparams": {"step_sizes": 0.05, "alpha": 0.015, "nu": 0.98, "gamma": 0.5},
            "schedule": [{"round": 400, "reassign": "shuffle"}],
        }
    if name == "bridge":
        # Alternating two-cluster ring: every same-cluster pair is separated
        # by a foreign bridge agent, so only relaying can connect them.
        n = 12
        edges = [[k, (k + 1) % n] for k in range(n)]
        return {
            "topology": {"model": "explicit", "n_agents": n, "n_max": 2, "edges": edges},
            "clusters": {
                "delta": 1.0,
                "models": [[0.5, 0.5], [-0.5, -0.5]],
                "assignment": [k % 2 for k in range(n)],
            },
            "data_profiles": {
                "regressor_covariance": [[1.0, 0.0], [0.0, 1.0]],
                "noise_variance": 0.01,
            },
            "hyperparams": {"step_sizes": 0.05, "alpha": 0.1, "nu": 0.98, "gamma": 0.5},
            "schedule": [],
        }
    if name == "easy":
        # Well-separated models and tiny noise: clustering decisions are
        # essentially error-free, so clustering should match the oracle.
        return {
            "topology": {"model": "random-geometric-capped", "n_agents": 20, "n_max": 5},
            "clusters": {
                "delta": 0.5,
                "models": [[0.6, 0.6], [-0.6, 0.6], [0.0, -0.6]],
            },
            "data_profiles": {
                "regressor_covariance": [[1.0, 0.0], [0.0, 1.0]],
                "noise_variance": 1e-3,
            },
            "hyperparams": {"step_sizes": 0.05, "alpha": 0.1, "nu": 0.98, "gamma": 0.5},
            "schedule": [],
        }
    if name == "sweep":
        # Two modestly separated clusters with sizeable noise: proximity-test
        # errors are measurable, which the step-size sweeps rely on. The
        # separation stays above 2*sqrt(alpha) and every agent keeps a
        # same-cluster majority in its neighborhood, so an erroneously
        # fused w cannot keep foreign neighbors inside the threshold.
        n = 16
        ring = [[k, (k + 1) % n] for k in range(n)]
        cross = [[0, 8], [2, 10], [4, 12], [6, 14]]
        chords = [[0, 2], [1, 3], [4, 6], [5, 7], [8, 10], [9, 11], [12, 14], [13, 15]]
        return {
            "topology": {"model": "explicit", "n_agents": n, "n_max": 4,
                         "edges": ring + cross + chords},
            "clusters": {
                "delta": 0.45,
                "models": [[0.3, 0.4], [0.57, 0.76]],
                "assignment": [0] * 8 + [1] * 8,
            },
            "data_profiles": {
                "regressor_covariance": [[1.0, 0.0], [0.0, 1.0]],
                "noise_variance": 0.05,
            },
            "hyperparams": {"step_sizes": 0.05, "alpha": 0.035, "nu": 0.98, "gamma": 0.5},
            "schedule": [],
        }
    raise ScenarioError(f"unknown preset: {name!r}")


def preset_scenario(name: str, seed=None) -> Scenario:
    return scenario_from_dict(preset_config(name), seed=seed)
