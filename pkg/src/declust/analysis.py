"""Metrics, probability estimators and theoretical bound calculators.

Everything here is a pure function of its inputs; the empirical
estimators reduce over immutable run traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from declust.model import AgentDataSpec, RiskSpec, ScenarioError, risk_spec_for
from declust.scenario import Scenario

DB_FLOOR = -200.0


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def msd(errors: np.ndarray) -> float:
    """Squared Euclidean norm of the stacked error vector."""
    errors = np.asarray(errors, dtype=float)
    return float((errors * errors).sum())


def to_db(value: float | np.ndarray, floor: float = DB_FLOOR) -> np.ndarray | float:
    """10*log10 with a floor for exact zeros."""
    value = np.asarray(value, dtype=float)
    out = np.full_like(value, floor)
    pos = value > 0
    out[pos] = np.maximum(10.0 * np.log10(value[pos]), floor)
    return float(out) if out.ndim == 0 else out


def normalized_errors(e_col: np.ndarray, e_true_col: np.ndarray, n_k: int) -> tuple[float, float]:
    """Normalized type-I (missed links) and type-II (false links) errors.

    v1 = (1 - e)^T (e_true - e) / (n_k - 1);  v2 = e^T (e - e_true) / (n_k - 1).
    For a degenerate neighborhood (n_k == 1) both are zero.
    """
    e = np.asarray(e_col, dtype=float)
    et = np.asarray(e_true_col, dtype=float)
    if n_k <= 1:
        return 0.0, 0.0
    v1 = float((1.0 - e) @ (et - e)) / (n_k - 1)
    v2 = float(e @ (e - et)) / (n_k - 1)
    return v1, v2


# ---------------------------------------------------------------------------
# Confidence intervals
# ---------------------------------------------------------------------------

_Z_TWO_SIDED_95 = 1.959963984540054
_Z_ONE_SIDED_95 = 1.6448536269514722


def wilson_interval(successes: int, trials: int, z: float = _Z_TWO_SIDED_95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def wilson_upper(successes: int, trials: int) -> float:
    """One-sided 95% upper bound; meaningful even for zero counts."""
    return wilson_interval(successes, trials, z=_Z_ONE_SIDED_95)[1]


@dataclass(frozen=True)
class ProportionEstimate:
    successes: int
    trials: int

    @property
    def point(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.trials)

    @property
    def upper(self) -> float:
        return wilson_upper(self.successes, self.trials)


# ---------------------------------------------------------------------------
# Theoretical calculators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrustErrorBounds:
    """Markov bounds on the steady error probabilities of the trust test.

    A bound is None when its validity condition (gamma < p_d for type I,
    gamma > p_f for type II) fails.
    """

    p1_bound: float | None
    p2_bound: float | None


def trust_error_bounds(p_d: float, p_f: float, nu: float, gamma: float) -> TrustErrorBounds:
    smoothing = (1.0 - nu) / (1.0 + nu)
    p1 = smoothing * p_d * (1.0 - p_d) / (p_d - gamma) ** 2 if gamma < p_d else None
    p2 = smoothing * p_f * (1.0 - p_f) / (gamma - p_f) ** 2 if gamma > p_f else None
    return TrustErrorBounds(p1_bound=p1, p2_bound=p2)


def stability_bound(risk: RiskSpec, step_sizes: np.ndarray | None = None):
    """Per-agent step-size bound 2*tau/(zeta^2+beta^2) and contraction xi."""
    tau = risk.strong_convexity
    zeta = risk.lipschitz_gradient
    beta_sq = risk.noise_beta_sq
    bound = 2.0 * tau / (zeta**2 + beta_sq)
    if step_sizes is None:
        return bound, None
    mu = np.broadcast_to(np.asarray(step_sizes, dtype=float), tau.shape)
    xi = 1.0 - 2.0 * mu * tau + mu**2 * (zeta**2 + beta_sq)
    return bound, xi


def lyapunov_steady_state(h: np.ndarray, r: np.ndarray, residual_tol: float = 1e-10) -> np.ndarray:
    """Solve H G + G H = R for symmetric positive definite H."""
    h = np.asarray(h, dtype=float)
    r = np.asarray(r, dtype=float)
    if not np.allclose(h, h.T, atol=1e-12) or np.linalg.eigvalsh(h).min() <= 0:
        raise ScenarioError("H must be symmetric positive definite")
    gamma = solve_continuous_lyapunov(h, r)
    gamma = 0.5 * (gamma + gamma.T)
    residual = np.linalg.norm(h @ gamma + gamma @ h - r, ord="fro")
    if residual > residual_tol:
        raise ScenarioError(f"Lyapunov residual {residual:.3e} exceeds {residual_tol:.1e}")
    return gamma


def hessian_at_optimum(spec: AgentDataSpec) -> np.ndarray:
    """Hessian of the quadratic risk at its minimizer: 2 R_u."""
    return 2.0 * spec.regressor_covariance


def gradient_noise_covariance(spec: AgentDataSpec) -> np.ndarray:
    """Steady-state gradient-noise covariance of the quadratic/Gaussian case."""
    return 4.0 * spec.noise_variance * spec.regressor_covariance


@dataclass(frozen=True)
class TheoryReport:
    """Per-agent stability numbers, Lyapunov matrices and optional trust bounds."""

    mu_bound: np.ndarray
    xi: np.ndarray
    gamma_lyap: np.ndarray  # (N, M, M)
    p1_bound: float | None = None
    p2_bound: float | None = None

    def to_text(self) -> str:
        lines = ["agent  mu_bound    xi          tr(Gamma)"]
        for k, (b, x, g) in enumerate(zip(self.mu_bound, self.xi, self.gamma_lyap)):
            lines.append(f"{k:>5d}  {b:<10.6g}  {x:<10.6g}  {np.trace(g):<10.6g}")
        if self.p1_bound is not None:
            lines.append(f"type-I trust bound:  {self.p1_bound:.6g}")
        if self.p2_bound is not None:
            lines.append(f"type-II trust bound: {self.p2_bound:.6g}")
        return "\n".join(lines)


def theory_report(
    scenario: Scenario,
    beta_sq: float = 0.0,
    p_d: float | None = None,
    p_f: float | None = None,
) -> TheoryReport:
    risk = risk_spec_for(scenario.data_specs, beta_sq=beta_sq)
    mu = scenario.hyper.broadcast(scenario.n_agents)
    bound, xi = stability_bound(risk, mu)
    gammas = np.stack(
        [
            lyapunov_steady_state(hessian_at_optimum(s), gradient_noise_covariance(s))
            for s in scenario.data_specs
        ]
    )
    p1 = p2 = None
    if p_d is not None and p_f is not None:
        tb = trust_error_bounds(p_d, p_f, scenario.hyper.nu, scenario.hyper.gamma)
        p1, p2 = tb.p1_bound, tb.p2_bound
    return TheoryReport(mu_bound=bound, xi=xi, gamma_lyap=gammas, p1_bound=p1, p2_bound=p2)


# ---------------------------------------------------------------------------
# Empirical probability estimators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailEstimates:
    """Window-frequency estimates of the proximity-test and decision errors."""

    p_d: ProportionEstimate
    p_f: ProportionEstimate
    p1: ProportionEstimate  # Pr(decision off | same cluster)
    p2: ProportionEstimate  # Pr(decision on | different cluster)


def steady_window(n_rounds: int, scenario: Scenario | None = None) -> tuple[int, int]:
    """Last 20% of rounds before the first scheduled switch (or of the run)."""
    stop = n_rounds
    if scenario is not None and scenario.schedule:
        stop = min(stop, scenario.schedule[0][0])
    start = stop - max(1, stop // 5)
    return start, stop


def estimate_tail_probs(traces, scenario: Scenario, window: tuple[int, int]) -> TailEstimates:
    """Frequency estimates of (P_d, P_f, P_I, P_II) over a steady window.

    Requires traces recorded with edge collection enabled.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("empty run ensemble")
    start, stop = window
    if stop <= start:
        raise ValueError("empty steady window")
    from declust.simulate import build_edge_index

    edges = build_edge_index(scenario)
    counts = np.zeros(6, dtype=np.int64)  # b1_same, n_same, b1_diff, n_diff, e0_same, e1_diff
    for tr in traces:
        if tr.b_hist is None or tr.e_hist is None:
            raise ValueError("trace lacks edge history; rerun with collect_edges=True")
        sel = (tr.rounds >= start) & (tr.rounds < stop)
        if not sel.any():
            raise ValueError("no recorded rounds inside the window")
        for t in np.flatnonzero(sel):
            a = scenario.assignment_at(int(tr.rounds[t]))
            same = a[edges.src] == a[edges.dst]
            b = tr.b_hist[:, t].astype(bool)
            e = tr.e_hist[:, t].astype(bool)
            counts[0] += int((b & same).sum())
            counts[1] += int(same.sum())
            counts[2] += int((b & ~same).sum())
            counts[3] += int((~same).sum())
            counts[4] += int((~e & same).sum())
            counts[5] += int((e & ~same).sum())
    return TailEstimates(
        p_d=ProportionEstimate(int(counts[0]), int(counts[1])),
        p_f=ProportionEstimate(int(counts[2]), int(counts[3])),
        p1=ProportionEstimate(int(counts[4]), int(counts[1])),
        p2=ProportionEstimate(int(counts[5]), int(counts[3])),
    )
