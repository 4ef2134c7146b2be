"""Domain types, scenario generation and the streaming data source.

Agents observe data from a linear regression model d = u w + v with
per-agent regressor covariance and noise variance. Ground truth is a set
of cluster models separated by at least `delta` plus a per-agent cluster
assignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.sparse import csr_matrix


class ScenarioError(ValueError):
    """Invalid or infeasible scenario configuration."""


# ---------------------------------------------------------------------------
# Topology
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Topology:
    """Undirected agent graph with self-loops on every node.

    adjacency[l, k] is True iff l is a neighbor of k (including l == k).
    """

    adjacency: np.ndarray
    neighbor_sets: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ScenarioError("adjacency must be square")
        if not np.all(np.diag(adj)):
            raise ScenarioError("every agent must belong to its own neighborhood")
        if not np.array_equal(adj, adj.T):
            raise ScenarioError("adjacency must be symmetric")
        n_comp, _ = connected_components(csr_matrix(adj), directed=False)
        if n_comp != 1:
            raise ScenarioError("graph must be connected")
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(
            self, "neighbor_sets", [np.flatnonzero(adj[:, k]) for k in range(adj.shape[0])]
        )

    @property
    def n_agents(self) -> int:
        return self.adjacency.shape[0]

    def degrees(self) -> np.ndarray:
        """Neighborhood sizes including self."""
        return self.adjacency.sum(axis=0)

    def edge_list(self) -> list[tuple[int, int]]:
        """Undirected edges (i < j), excluding self-loops."""
        n = self.n_agents
        return [(i, j) for i in range(n) for j in range(i + 1, n) if self.adjacency[i, j]]


def _greedy_capped_edges(order: np.ndarray, pairs: np.ndarray, n: int, n_max: int) -> np.ndarray:
    adj = np.eye(n, dtype=bool)
    deg = np.zeros(n, dtype=int)
    for idx in order:
        i, j = pairs[idx]
        if deg[i] < n_max and deg[j] < n_max:
            adj[i, j] = adj[j, i] = True
            deg[i] += 1
            deg[j] += 1
    return adj


def generate_topology(
    n_agents: int,
    n_max: int,
    connectivity_model: str = "random-geometric-capped",
    seed=None,
    edges: list[tuple[int, int]] | None = None,
    max_attempts: int = 200,
) -> Topology:
    """Generate a connected topology whose degree (excluding self) is <= n_max.

    connectivity_model:
      - "random-geometric-capped": agents placed uniformly in the unit
        square; shortest candidate edges added greedily under the degree
        cap; retried until connected.
      - "ring-plus-chords": a ring plus random chords under the cap.
      - "explicit": the given edge list, validated against all invariants.
    """
    if n_agents < 2:
        raise ScenarioError("need at least 2 agents")
    if n_max < 1:
        raise ScenarioError("n_max must be >= 1")
    rng = np.random.default_rng(seed)

    if connectivity_model == "explicit":
        if edges is None:
            raise ScenarioError("explicit topology requires an edge list")
        adj = np.eye(n_agents, dtype=bool)
        for i, j in edges:
            if not (0 <= i < n_agents and 0 <= j < n_agents) or i == j:
                raise ScenarioError(f"invalid edge ({i}, {j})")
            adj[i, j] = adj[j, i] = True
        topo = Topology(adj)
        if np.max(topo.degrees() - 1) > n_max:
            raise ScenarioError("explicit edge list violates the degree cap")
        return topo

    if connectivity_model == "random-geometric-capped":
        iu, ju = np.triu_indices(n_agents, k=1)
        pairs = np.column_stack([iu, ju])
        for _ in range(max_attempts):
            pts = rng.random((n_agents, 2))
            dist = np.linalg.norm(pts[iu] - pts[ju], axis=1)
            adj = _greedy_capped_edges(np.argsort(dist, kind="stable"), pairs, n_agents, n_max)
            n_comp, _ = connected_components(csr_matrix(adj), directed=False)
            if n_comp == 1:
                return Topology(adj)
        raise ScenarioError(
            f"no connected graph with degree cap {n_max} found in {max_attempts} attempts"
        )

    if connectivity_model == "ring-plus-chords":
        adj = np.eye(n_agents, dtype=bool)
        for k in range(n_agents):
            adj[k, (k + 1) % n_agents] = adj[(k + 1) % n_agents, k] = True
        deg = adj.sum(axis=0) - 1
        if np.max(deg) > n_max:
            raise ScenarioError("n_max < 2 cannot accommodate a ring")
        # sprinkle chords up to roughly half the remaining degree budget
        n_chords = int(rng.integers(0, max(1, n_agents // 2) + 1))
        for _ in range(n_chords):
            i, j = rng.integers(0, n_agents, size=2)
            if i != j and not adj[i, j] and deg[i] < n_max and deg[j] < n_max:
                adj[i, j] = adj[j, i] = True
                deg[i] += 1
                deg[j] += 1
        return Topology(adj)

    raise ScenarioError(f"unknown connectivity model: {connectivity_model!r}")


# ---------------------------------------------------------------------------
# Ground truth
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterGroundTruth:
    """Cluster models, per-agent assignment and the separation delta."""

    models: np.ndarray  # (C, M)
    assignment: np.ndarray  # (N,) values in [0, C)
    delta: float

    def __post_init__(self):
        models = np.asarray(self.models, dtype=float)
        assignment = np.asarray(self.assignment, dtype=int)
        if models.ndim != 2:
            raise ScenarioError("models must be a (C, M) array")
        if self.delta <= 0:
            raise ScenarioError("delta must be positive")
        c = models.shape[0]
        if assignment.min(initial=0) < 0 or assignment.max(initial=0) >= c:
            raise ScenarioError("assignment indices out of range")
        if len(np.unique(assignment)) != c:
            raise ScenarioError("every cluster must be non-empty")
        if min_model_separation(models) < self.delta - 1e-12:
            raise ScenarioError("cluster models violate the delta separation")
        object.__setattr__(self, "models", models)
        object.__setattr__(self, "assignment", assignment)

    @property
    def n_clusters(self) -> int:
        return self.models.shape[0]

    @property
    def dim(self) -> int:
        return self.models.shape[1]

    def agent_models(self, assignment: np.ndarray | None = None) -> np.ndarray:
        """Per-agent true model vectors, (N, M)."""
        a = self.assignment if assignment is None else assignment
        return self.models[a]


def min_model_separation(models: np.ndarray) -> float:
    models = np.asarray(models, dtype=float)
    if models.shape[0] < 2:
        return np.inf
    diffs = models[:, None, :] - models[None, :, :]
    d = np.linalg.norm(diffs, axis=-1)
    return float(d[np.triu_indices(models.shape[0], k=1)].min())


def generate_models(
    n_clusters: int,
    dim: int,
    delta: float,
    value_range: tuple[float, float] = (-1.0, 1.0),
    seed=None,
    max_attempts: int = 10_000,
) -> np.ndarray:
    """Draw cluster models with entries in value_range, pairwise >= delta apart."""
    if n_clusters < 1 or dim < 1 or delta <= 0:
        raise ScenarioError("need n_clusters >= 1, dim >= 1, delta > 0")
    lo, hi = value_range
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        models = rng.uniform(lo, hi, size=(n_clusters, dim))
        if min_model_separation(models) >= delta:
            return models
    raise ScenarioError(
        f"could not place {n_clusters} models with separation {delta} in {value_range}"
    )


def assign_clusters(n_agents: int, n_clusters: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random agent-to-cluster assignment, rejecting empty clusters."""
    if n_agents < n_clusters:
        raise ScenarioError("fewer agents than clusters")
    while True:
        a = rng.integers(0, n_clusters, size=n_agents)
        if len(np.unique(a)) == n_clusters:
            return a


# ---------------------------------------------------------------------------
# Per-agent data statistics
# ---------------------------------------------------------------------------


def _check_spd(mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ScenarioError("covariance must be square")
    if not np.allclose(mat, mat.T, atol=1e-12):
        raise ScenarioError("covariance must be symmetric")
    if np.linalg.eigvalsh(mat).min() <= 0:
        raise ScenarioError("covariance must be positive definite")
    return mat


@dataclass(frozen=True)
class AgentDataSpec:
    """Regressor covariance and measurement-noise variance of one agent."""

    regressor_covariance: np.ndarray  # (M, M) SPD
    noise_variance: float

    def __post_init__(self):
        cov = _check_spd(self.regressor_covariance)
        if self.noise_variance <= 0:
            raise ScenarioError("noise variance must be positive")
        object.__setattr__(self, "regressor_covariance", cov)

    @property
    def dim(self) -> int:
        return self.regressor_covariance.shape[0]

    def cholesky(self) -> np.ndarray:
        return np.linalg.cholesky(self.regressor_covariance)


def sample_data_profiles(
    n_agents: int,
    dim: int,
    rng: np.random.Generator,
    noise_range: tuple[float, float] = (1e-3, 1e-2),
    trace_range: tuple[float, float] = (1.0, 2.0),
) -> list[AgentDataSpec]:
    """Per-agent diagonal regressor covariances and noise variances.

    Noise variances are log-uniform over noise_range; covariance traces
    are uniform over trace_range with the trace split over the diagonal
    so no entry falls below 40% of the mean.
    """
    specs = []
    for _ in range(n_agents):
        sigma2 = float(np.exp(rng.uniform(np.log(noise_range[0]), np.log(noise_range[1]))))
        trace = rng.uniform(*trace_range)
        frac = rng.uniform(0.4, 0.6, size=dim)
        diag = trace * frac / frac.sum()
        specs.append(AgentDataSpec(np.diag(diag), sigma2))
    return specs


def sample_datum(
    spec: AgentDataSpec, true_model: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """One (regressor, measurement) pair: d = u @ w_true + v."""
    u = spec.cholesky() @ rng.standard_normal(spec.dim)
    v = np.sqrt(spec.noise_variance) * rng.standard_normal()
    return u, float(u @ np.asarray(true_model, dtype=float) + v)


# ---------------------------------------------------------------------------
# Hyperparameters and risk constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HyperParams:
    """Step sizes, proximity threshold, trust forgetting factor, decision threshold."""

    step_sizes: np.ndarray  # (N,) or scalar broadcast at scenario build
    alpha: float
    nu: float
    gamma: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.step_sizes, dtype=float))
        if np.any(mu <= 0):
            raise ScenarioError("step sizes must be positive")
        if self.alpha <= 0:
            raise ScenarioError("alpha must be positive")
        if not 0 < self.nu < 1:
            raise ScenarioError("nu must lie in (0, 1)")
        if not 0 < self.gamma < 1:
            raise ScenarioError("gamma must lie in (0, 1)")
        object.__setattr__(self, "step_sizes", mu)

    def broadcast(self, n_agents: int) -> np.ndarray:
        mu = self.step_sizes
        if mu.size == 1:
            return np.full(n_agents, mu[0])
        if mu.size != n_agents:
            raise ScenarioError("step_sizes length must be 1 or n_agents")
        return mu


@dataclass(frozen=True)
class RiskSpec:
    """Per-agent curvature and gradient-noise constants of quadratic risks."""

    strong_convexity: np.ndarray  # tau_k
    lipschitz_gradient: np.ndarray  # zeta_k
    hessian_lipschitz: np.ndarray  # kappa_k, zero for quadratic risks
    noise_beta_sq: np.ndarray  # beta_k^2, configurable, defaults to zero


def compute_risk_constants(spec: AgentDataSpec) -> tuple[float, float]:
    """(tau, zeta) of the quadratic risk E(d - u w)^2: 2*lambda_min/max of R_u."""
    eig = np.linalg.eigvalsh(spec.regressor_covariance)
    return 2.0 * float(eig[0]), 2.0 * float(eig[-1])


def risk_spec_for(specs: list[AgentDataSpec], beta_sq: float | np.ndarray = 0.0) -> RiskSpec:
    taus, zetas = zip(*(compute_risk_constants(s) for s in specs))
    n = len(specs)
    return RiskSpec(
        strong_convexity=np.array(taus),
        lipschitz_gradient=np.array(zetas),
        hessian_lipschitz=np.zeros(n),
        noise_beta_sq=np.broadcast_to(np.asarray(beta_sq, dtype=float), (n,)).copy(),
    )
