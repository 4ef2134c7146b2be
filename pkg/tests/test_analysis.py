"""Metrics, confidence intervals and theoretical bound calculators."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from declust.analysis import (
    ProportionEstimate,
    estimate_tail_probs,
    gradient_noise_covariance,
    hessian_at_optimum,
    lyapunov_steady_state,
    msd,
    normalized_errors,
    stability_bound,
    steady_window,
    theory_report,
    to_db,
    trust_error_bounds,
    wilson_interval,
    wilson_upper,
)
from declust.model import AgentDataSpec, ScenarioError, risk_spec_for
from declust.simulate import build_edge_index, run_single
from conftest import make_tiny_scenario


class TestMetrics:
    def test_msd_is_squared_stacked_norm(self):
        assert msd(np.array([[3.0, 0.0], [0.0, 4.0]])) == pytest.approx(25.0)

    def test_zero_error(self):
        assert msd(np.zeros((5, 2))) == 0.0

    def test_mc_average_of_two_runs(self):
        assert np.mean([msd(np.array([1.0])), msd(np.array([np.sqrt(3.0)]))]) == pytest.approx(2.0)

    def test_to_db(self):
        assert to_db(1.0) == pytest.approx(0.0)
        assert to_db(0.01) == pytest.approx(-20.0)
        assert to_db(0.0) == -200.0  # floor for exact zeros

    def test_to_db_vector(self):
        out = to_db(np.array([1.0, 0.0, 100.0]))
        np.testing.assert_allclose(out, [0.0, -200.0, 20.0])


class TestNormalizedErrors:
    def test_perfect_clustering(self):
        e = np.array([1, 1, 1, 0], dtype=float)
        v1, v2 = normalized_errors(e, e, n_k=3)
        assert (v1, v2) == (0.0, 0.0)

    def test_all_links_missed(self):
        # true column has 3 ones (incl. self), decision keeps self only
        e = np.array([1, 0, 0], dtype=float)
        et = np.array([1, 1, 1], dtype=float)
        v1, v2 = normalized_errors(e, et, n_k=3)
        assert v1 == pytest.approx(1.0)
        assert v2 == 0.0

    def test_all_links_false(self):
        e = np.ones(4)
        et = np.array([1, 0, 0, 0], dtype=float)
        v1, v2 = normalized_errors(e, et, n_k=4)
        assert v1 == 0.0
        assert v2 == pytest.approx(1.0)

    def test_degenerate_neighborhood(self):
        assert normalized_errors(np.array([1.0]), np.array([1.0]), n_k=1) == (0.0, 0.0)

    @given(st.integers(2, 8), st.data())
    @settings(max_examples=100)
    def test_in_unit_interval_and_zero_iff_equal(self, n_k, data):
        bits = st.lists(st.booleans(), min_size=n_k - 1, max_size=n_k - 1)
        e = np.array([1] + [int(b) for b in data.draw(bits)], dtype=float)
        et = np.array([1] + [int(b) for b in data.draw(bits)], dtype=float)
        v1, v2 = normalized_errors(e, et, n_k)
        assert 0.0 <= v1 <= 1.0 and 0.0 <= v2 <= 1.0
        assert (v1 == 0.0 and v2 == 0.0) == np.array_equal(e, et)


class TestWilson:
    def test_contains_point_estimate(self):
        lo, hi = wilson_interval(30, 100)
        assert lo < 0.3 < hi

    def test_zero_count_upper_positive(self):
        assert 0.0 < wilson_upper(0, 1000) < 0.01

    def test_rejects_no_trials(self):
        with pytest.raises(ValueError):
            wilson_interval(0, 0)

    def test_proportion_estimate(self):
        p = ProportionEstimate(5, 50)
        assert p.point == pytest.approx(0.1)
        lo, hi = p.ci
        assert lo < 0.1 < hi
        assert p.upper > 0.1


class TestTrustErrorBounds:
    def test_perfect_detection_gives_zero_bound(self):
        tb = trust_error_bounds(1.0, 0.0, 0.98, 0.5)
        assert tb.p1_bound == 0.0
        assert tb.p2_bound == 0.0

    def test_hand_value(self):
        tb = trust_error_bounds(0.99, 0.0, 0.98, 0.5)
        expected = (0.02 / 1.98) * (0.99 * 0.01) / 0.49**2
        assert tb.p1_bound == pytest.approx(expected)
        assert tb.p1_bound == pytest.approx(4.165e-4, rel=1e-3)

    def test_inapplicable_marked_none(self):
        tb = trust_error_bounds(0.4, 0.6, 0.98, 0.5)  # gamma >= p_d and gamma <= p_f
        assert tb.p1_bound is None
        assert tb.p2_bound is None

    def test_smoothing_suppresses_errors(self):
        loose = trust_error_bounds(0.9, 0.1, 0.9, 0.5)
        tight = trust_error_bounds(0.9, 0.1, 0.99, 0.5)
        assert tight.p1_bound < loose.p1_bound
        assert tight.p2_bound < loose.p2_bound


class TestStabilityBound:
    def test_hand_values(self):
        risk = risk_spec_for([AgentDataSpec(np.eye(2), 0.01)])
        bound, xi = stability_bound(risk, np.array([0.05]))
        assert bound[0] == pytest.approx(1.0)  # 2*2 / (4 + 0)
        assert xi[0] == pytest.approx(0.81)  # 1 - 0.2 + 0.01

    def test_zero_step_no_contraction(self):
        risk = risk_spec_for([AgentDataSpec(np.eye(2), 0.01)])
        _, xi = stability_bound(risk, np.array([0.0]))
        assert xi[0] == pytest.approx(1.0)

    def test_marginal_at_the_bound(self):
        risk = risk_spec_for([AgentDataSpec(np.eye(2), 0.01)])
        bound, xi = stability_bound(risk, np.array([1.0]))
        assert bound[0] == pytest.approx(1.0)
        assert xi[0] == pytest.approx(1.0)  # 1 - 4 + 4

    def test_pure_function(self):
        risk = risk_spec_for([AgentDataSpec(np.diag([0.3, 1.7]), 0.005)])
        a = stability_bound(risk, np.array([0.02]))
        b = stability_bound(risk, np.array([0.02]))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])


class TestLyapunov:
    def test_scalar_case(self):
        gamma = lyapunov_steady_state(np.eye(2), 2.0 * np.eye(2))
        np.testing.assert_allclose(gamma, np.eye(2), atol=1e-12)

    def test_analytic_quadratic_gaussian_case(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.standard_normal((3, 3))
            r_u = a @ a.T + 0.1 * np.eye(3)
            sigma2 = float(rng.uniform(1e-3, 1e-1))
            gamma = lyapunov_steady_state(2.0 * r_u, 4.0 * sigma2 * r_u)
            np.testing.assert_allclose(gamma, sigma2 * np.eye(3), atol=1e-10)

    def test_residual_oracle_random_instances(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            a = rng.standard_normal((4, 4))
            h = a @ a.T + 0.05 * np.eye(4)
            b = rng.standard_normal((4, 4))
            r = b @ b.T
            gamma = lyapunov_steady_state(h, r)
            assert np.linalg.norm(h @ gamma + gamma @ h - r, "fro") <= 1e-10

    def test_non_spd_rejected(self):
        with pytest.raises(ScenarioError):
            lyapunov_steady_state(-np.eye(2), np.eye(2))
        with pytest.raises(ScenarioError):
            lyapunov_steady_state(np.array([[1.0, 0.5], [0.0, 1.0]]), np.eye(2))

    def test_quadratic_gaussian_helpers(self):
        spec = AgentDataSpec(np.diag([1.0, 2.0]), 0.01)
        np.testing.assert_allclose(hessian_at_optimum(spec), np.diag([2.0, 4.0]))
        np.testing.assert_allclose(gradient_noise_covariance(spec), 0.04 * np.diag([1.0, 2.0]))


class TestTheoryReport:
    def test_report_fields_and_text(self, tiny_scenario):
        report = theory_report(tiny_scenario, p_d=0.99, p_f=0.01)
        assert report.mu_bound.shape == (4,)
        # isotropic unit regressors: bound = 1, Gamma = sigma_v^2 I
        np.testing.assert_allclose(report.mu_bound, np.ones(4))
        np.testing.assert_allclose(report.gamma_lyap, 0.01 * np.eye(2)[None].repeat(4, 0), atol=1e-12)
        assert report.p1_bound is not None and report.p2_bound is not None
        text = report.to_text()
        assert "mu_bound" in text and "type-I trust bound" in text


class TestSteadyWindow:
    def test_no_schedule_last_fifth(self, tiny_scenario):
        assert steady_window(1000, tiny_scenario) == (800, 1000)

    def test_stops_before_first_switch(self):
        from dataclasses import replace

        scn = make_tiny_scenario()
        scn = replace(scn, schedule=[(400, np.array([1, 1, 0, 0]))])
        assert steady_window(1000, scn) == (320, 400)


class TestTailEstimates:
    def _converged_traces(self, scenario, n_runs=3):
        from numpy.random import SeedSequence

        return [
            run_single(scenario, "clustering", 400, s, collect_edges=True)
            for s in SeedSequence(7).spawn(n_runs)
        ]

    def test_converged_network_error_free(self, tiny_scenario):
        """Well-separated clusters, tiny noise: P_d -> 1, P_f -> 0."""
        traces = self._converged_traces(tiny_scenario)
        tails = estimate_tail_probs(traces, tiny_scenario, (320, 400))
        assert tails.p_d.point == 1.0
        assert tails.p_f.point == 0.0
        assert tails.p1.point == 0.0
        assert tails.p2.point == 0.0

    def test_synthetic_bernoulli_streams_recovered(self, tiny_scenario):
        """Seeded Bernoulli b-histories are estimated within their own CI."""
        traces = self._converged_traces(tiny_scenario, n_runs=2)
        rng = np.random.default_rng(5)
        p_same, p_diff = 0.8, 0.25
        edges = build_edge_index(tiny_scenario)
        same = tiny_scenario.clusters.assignment[edges.src] == tiny_scenario.clusters.assignment[edges.dst]
        for tr in traces:
            tr.b_hist[same] = (rng.random((same.sum(), tr.b_hist.shape[1])) < p_same)
            tr.b_hist[~same] = (rng.random(((~same).sum(), tr.b_hist.shape[1])) < p_diff)
        tails = estimate_tail_probs(traces, tiny_scenario, (0, 400))
        lo, hi = tails.p_d.ci
        assert lo <= p_same <= hi
        lo, hi = tails.p_f.ci
        assert lo <= p_diff <= hi

    def test_empty_ensemble_rejected(self, tiny_scenario):
        with pytest.raises(ValueError, match="empty run ensemble"):
            estimate_tail_probs([], tiny_scenario, (0, 10))

    def test_empty_window_rejected(self, tiny_scenario):
        traces = self._converged_traces(tiny_scenario, n_runs=1)
        with pytest.raises(ValueError, match="empty steady window"):
            estimate_tail_probs(traces, tiny_scenario, (10, 10))

    def test_missing_edge_history_rejected(self, tiny_scenario):
        from numpy.random import SeedSequence

        tr = run_single(tiny_scenario, "clustering", 50, SeedSequence(0))
        with pytest.raises(ValueError, match="edge history"):
            estimate_tail_probs([tr], tiny_scenario, (40, 50))
