"""Scenario container, serialization round-trips and named presets."""

import numpy as np
import pytest
from numpy.random import SeedSequence

from declust.model import ScenarioError
from declust.scenario import (
    Scenario,
    load_scenario,
    preset_config,
    preset_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from conftest import make_tiny_scenario


class TestScenarioValidation:
    def test_alpha_must_stay_below_delta_squared(self):
        with pytest.raises(ScenarioError, match="alpha"):
            make_tiny_scenario(alpha=1.0)  # delta = 1.0, so alpha must be < 1

    def test_schedule_rounds_strictly_increasing(self):
        from dataclasses import replace

        scn = make_tiny_scenario()
        sched = [(100, np.array([1, 0, 1, 0])), (100, np.array([0, 1, 0, 1]))]
        with pytest.raises(ScenarioError, match="strictly increasing"):
            replace(scn, schedule=sched)

    def test_assignment_at_follows_schedule(self):
        from dataclasses import replace

        scn = make_tiny_scenario()
        scn = replace(scn, schedule=[(50, np.array([1, 1, 0, 0]))])
        np.testing.assert_array_equal(scn.assignment_at(49), [0, 0, 1, 1])
        np.testing.assert_array_equal(scn.assignment_at(50), [1, 1, 0, 0])

    def test_true_clustering_matrix(self, tiny_scenario):
        e = tiny_scenario.true_clustering_matrix()
        # 4-ring 0-1-2-3 with clusters {0,1} and {2,3}
        assert e[0, 1] and e[1, 0] and e[2, 3] and e[3, 2]
        assert not e[1, 2] and not e[3, 0]
        assert np.all(np.diag(e))

    def test_missing_config_key_reported(self):
        with pytest.raises(ScenarioError, match="missing scenario config key"):
            scenario_from_dict({"topology": {"n_agents": 4, "model": "explicit", "edges": [[0, 1], [1, 2], [2, 3]]}})


class TestSerialization:
    def test_yaml_round_trip(self, tmp_path, tiny_scenario):
        p = tmp_path / "scn.yaml"
        save_scenario(tiny_scenario, p)
        again = load_scenario(p)
        np.testing.assert_array_equal(again.topology.adjacency, tiny_scenario.topology.adjacency)
        np.testing.assert_array_equal(again.clusters.assignment, tiny_scenario.clusters.assignment)
        np.testing.assert_allclose(again.clusters.models, tiny_scenario.clusters.models)
        assert again.hyper == tiny_scenario.hyper
        for a, b in zip(again.data_specs, tiny_scenario.data_specs):
            np.testing.assert_allclose(a.regressor_covariance, b.regressor_covariance)
            assert a.noise_variance == b.noise_variance

    def test_json_round_trip(self, tmp_path, tiny_scenario):
        p = tmp_path / "scn.json"
        save_scenario(tiny_scenario, p)
        again = load_scenario(p)
        assert scenario_to_dict(again) == scenario_to_dict(tiny_scenario)

    def test_materialization_is_seed_deterministic(self):
        cfg = preset_config("protocol")
        a = scenario_from_dict(cfg, seed=SeedSequence(123))
        b = scenario_from_dict(cfg, seed=SeedSequence(123))
        assert scenario_to_dict(a)["topology"] == scenario_to_dict(b)["topology"]
        np.testing.assert_array_equal(a.clusters.assignment, b.clusters.assignment)
        np.testing.assert_allclose(a.clusters.models, b.clusters.models)
        for x, y in zip(a.schedule, b.schedule):
            assert x[0] == y[0]
            np.testing.assert_array_equal(x[1], y[1])


class TestPresets:
    @pytest.mark.parametrize("name", ["protocol", "bridge", "easy", "sweep"])
    def test_presets_materialize(self, name):
        scn = preset_scenario(name, seed=SeedSequence(0))
        assert isinstance(scn, Scenario)

    def test_protocol_parameters(self):
        cfg = preset_config("protocol")
        assert cfg["topology"]["n_agents"] == 50
        assert cfg["topology"]["n_max"] == 6
        assert cfg["clusters"]["n_clusters"] == 3
        assert cfg["clusters"]["dim"] == 2
        assert cfg["clusters"]["delta"] == 0.17
        hp = cfg["hyperparams"]
        assert (hp["step_sizes"], hp["alpha"], hp["nu"], hp["gamma"]) == (0.05, 0.015, 0.98, 0.5)
        assert cfg["schedule"] == [{"round": 400, "reassign": "shuffle"}]

    def test_bridge_alternates_clusters(self):
        scn = preset_scenario("bridge")
        a = scn.clusters.assignment
        # neighbors on the ring never share a cluster: only relaying helps
        assert all(a[k] != a[(k + 1) % 12] for k in range(12))

    def test_sweep_preset_has_same_cluster_majorities(self):
        """Every agent's neighborhood is majority own-cluster (lock-free design)."""
        scn = preset_scenario("sweep")
        a = scn.clusters.assignment
        for k in range(scn.n_agents):
            nbrs = [l for l in scn.topology.neighbor_sets[k] if l != k]
            own = sum(a[l] == a[k] for l in nbrs)
            assert own >= len(nbrs) - own

    def test_unknown_preset_rejected(self):
        with pytest.raises(ScenarioError, match="unknown preset"):
            preset_config("nope")
