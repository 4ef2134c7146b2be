"""Round-synchronized simulation engine.

Each round: all agents adapt from their round i-1 state, then exchange,
then all fuse (two-phase barrier). Supported schemes:

  - non_cooperative: adapt only, w = psi.
  - clustering:      trust-driven neighbor selection, fuse fresh psi.
  - clustering_linking: trust tests and fusion consume the one-round-stale
    relay vectors phi; relays are re-selected after fusion.
  - oracle:          fuse over the true same-cluster neighborhood from
    round 0 (quantifies the clustering loss).

The engine is vectorized over directed edges; its round updates are the
same formulas exposed by the learning/clustering/linking modules, which
the test suite cross-checks agent by agent.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from declust.scenario import Scenario

SCHEMES = ("non_cooperative", "clustering", "clustering_linking", "oracle")


class DivergenceAbort(RuntimeError):
    """A run produced non-finite iterates."""

    def __init__(self, round_idx: int):
        super().__init__(f"non-finite iterate at round {round_idx}")
        self.round_idx = round_idx
        self.run_idx: int | None = None


@dataclass(frozen=True)
class EdgeIndex:
    """Directed links src -> dst with src in N_dst, src != dst."""

    src: np.ndarray
    dst: np.ndarray
    # relay candidate table for the edge interpreted as sender=src,
    # receiver=dst; rows padded with the first (smallest) candidate so
    # argmin tie-breaking stays index-ordered
    cand: np.ndarray
    cand_len: np.ndarray

    @property
    def n_edges(self) -> int:
        return self.src.shape[0]


def build_edge_index(scenario: Scenario) -> EdgeIndex:
    adj = scenario.topology.adjacency
    n = scenario.n_agents
    src, dst = [], []
    for k in range(n):
        for l in scenario.topology.neighbor_sets[k]:
            if l != k:
                src.append(int(l))
                dst.append(int(k))
    src = np.array(src, dtype=int)
    dst = np.array(dst, dtype=int)

    cand_lists = []
    for a, b in zip(src, dst):
        cand = sorted({int(m) for m in scenario.topology.neighbor_sets[a] if not adj[m, b]} | {int(a)})
        cand_lists.append(cand)
    width = max(len(c) for c in cand_lists)
    cand = np.array([c + [c[0]] * (width - len(c)) for c in cand_lists], dtype=int)
    cand_len = np.array([len(c) for c in cand_lists], dtype=int)
    return EdgeIndex(src=src, dst=dst, cand=cand, cand_len=cand_len)


@dataclass
class SimState:
    """Mutable per-run state (N agents, E directed edges, dim M)."""

    psi: np.ndarray  # (N, M)
    w: np.ndarray  # (N, M)
    f_edges: np.ndarray  # (E,)
    b_edges: np.ndarray  # (E,) bool
    e_edges: np.ndarray  # (E,) bool
    phi: np.ndarray  # (E, M), relay value carried into the next round
    phi_src: np.ndarray  # (E,), -1 until first selection

    @classmethod
    def initial(cls, n_agents: int, dim: int, n_edges: int) -> "SimState":
        return cls(
            psi=np.zeros((n_agents, dim)),
            w=np.zeros((n_agents, dim)),
            f_edges=np.zeros(n_edges),
            b_edges=np.zeros(n_edges, dtype=bool),
            e_edges=np.zeros(n_edges, dtype=bool),
            phi=np.zeros((n_edges, dim)),
            phi_src=np.full(n_edges, -1, dtype=int),
        )


@dataclass
class RunTrace:
    """Time series and final snapshots of a single seeded run."""

    scheme: str
    seed_key: tuple
    rounds: np.ndarray
    msd_psi: np.ndarray  # squared norm of the stacked psi error, per round
    msd_w: np.ndarray
    v1_bar: np.ndarray
    v2_bar: np.ndarray
    max_psi_err: np.ndarray  # max over agents of the per-agent error norm
    max_w_err: np.ndarray
    final_f: np.ndarray
    final_e: np.ndarray
    wall_clock: float = 0.0
    diverged_at: int | None = None
    b_hist: np.ndarray | None = None  # (E, T) when edge collection is on
    e_hist: np.ndarray | None = None
    relay_log: list = field(default_factory=list)  # (round, sender, receiver, m*)
    phi_src_final: np.ndarray | None = None


class _DataStream:
    """Vectorized per-round (u, d) sampling for all agents."""

    def __init__(self, scenario: Scenario, rng: np.random.Generator):
        self.rng = rng
        covs = np.stack([s.regressor_covariance for s in scenario.data_specs])
        self.noise_std = np.sqrt(np.array([s.noise_variance for s in scenario.data_specs]))
        self.diagonal = all(
            np.count_nonzero(c - np.diag(np.diag(c))) == 0 for c in covs
        )
        if self.diagonal:
            self.scale = np.sqrt(np.stack([np.diag(c) for c in covs]))
        else:
            self.chol = np.linalg.cholesky(covs)

    def draw(self, true_models: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n, m = true_models.shape
        z = self.rng.standard_normal((n, m))
        u = z * self.scale if self.diagonal else np.einsum("kij,kj->ki", self.chol, z)
        d = (u * true_models).sum(axis=1) + self.noise_std * self.rng.standard_normal(n)
        return u, d


def _fuse_counts(psi: np.ndarray, sources: np.ndarray, active: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Uniform-weight fusion: w_k = mean of psi_k and active incoming sources."""
    acc = psi.copy()
    cnt = np.ones(psi.shape[0])
    idx = dst[active]
    np.add.at(acc, idx, sources[active])
    np.add.at(cnt, idx, 1.0)
    return acc / cnt[:, None]


def run_single(
    scenario: Scenario,
    scheme: str,
    n_rounds: int,
    seed,
    decimate: int = 1,
    collect_edges: bool = False,
    relay_log: bool = False,
    raise_on_divergence: bool = True,
) -> RunTrace:
    """Execute one seeded run of the selected scheme."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    t0 = time.perf_counter()

    rng = np.random.default_rng(seed)
    seed_key = (seed.entropy, tuple(seed.spawn_key)) if isinstance(seed, np.random.SeedSequence) else (seed,)
    edges = build_edge_index(scenario)
    n, m = scenario.n_agents, scenario.dim
    mu = scenario.hyper.broadcast(n)
    alpha, nu, gamma = scenario.hyper.alpha, scenario.hyper.nu, scenario.hyper.gamma
    state = SimState.initial(n, m, edges.n_edges)
    stream = _DataStream(scenario, rng)

    deg_minus = scenario.topology.degrees().astype(float) - 1.0
    err_agents = np.flatnonzero(deg_minus >= 1)

    assignment = scenario.assignment_at(-1)
    true_models = scenario.clusters.agent_models(assignment)
    same_edges = assignment[edges.src] == assignment[edges.dst]
    schedule = list(scenario.schedule)

    recorded = [i for i in range(n_rounds) if i % decimate == 0]
    t_rec = len(recorded)
    out = {
        k: np.zeros(t_rec)
        for k in ("msd_psi", "msd_w", "v1_bar", "v2_bar", "max_psi_err", "max_w_err")
    }
    b_hist = np.zeros((edges.n_edges, t_rec), dtype=np.uint8) if collect_edges else None
    e_hist = np.zeros((edges.n_edges, t_rec), dtype=np.uint8) if collect_edges else None
    log: list = []
    diverged_at = None

    rec = 0
    for i in range(n_rounds):
        if schedule and i == schedule[0][0]:
            assignment = schedule.pop(0)[1]
            true_models = scenario.clusters.agent_models(assignment)
            same_edges = assignment[edges.src] == assignment[edges.dst]

        u, d = stream.draw(true_models)
        # overflow is how divergence manifests; it is detected, not a fault
        with np.errstate(over="ignore", invalid="ignore"):
            residual = d - (u * state.psi).sum(axis=1)
            psi_new = state.psi + 2.0 * mu[:, None] * residual[:, None] * u
        if not np.all(np.isfinite(psi_new)):
            diverged_at = i
            if raise_on_divergence:
                raise DivergenceAbort(i)
            break

        w_prev = state.w
        # squared distances of near-divergent iterates may overflow to inf;
        # the proximity comparisons still evaluate correctly
        with np.errstate(over="ignore", invalid="ignore"):
            if scheme == "non_cooperative":
                w_new = psi_new
            elif scheme == "oracle":
                state.e_edges = same_edges.copy()
                state.f_edges = same_edges.astype(float)
                w_new = _fuse_counts(psi_new, psi_new[edges.src], state.e_edges, edges.dst)
            elif scheme == "clustering":
                diff = psi_new[edges.src] - w_prev[edges.dst]
                state.b_edges = (diff * diff).sum(axis=1) <= alpha
                state.f_edges = nu * state.f_edges + (1.0 - nu) * state.b_edges
                state.e_edges = state.f_edges >= gamma
                w_new = _fuse_counts(psi_new, psi_new[edges.src], state.e_edges, edges.dst)
            else:  # clustering_linking
                diff = state.phi - w_prev[edges.dst]
                state.b_edges = (diff * diff).sum(axis=1) <= alpha
                state.f_edges = nu * state.f_edges + (1.0 - nu) * state.b_edges
                state.e_edges = state.f_edges >= gamma
                w_new = _fuse_counts(psi_new, state.phi, state.e_edges, edges.dst)
                # re-select relays from the fresh iterates (one round of staleness)
                d2 = ((psi_new[edges.cand] - psi_new[edges.dst][:, None, :]) ** 2).sum(axis=2)
                pick = np.argmin(d2, axis=1)
                state.phi_src = edges.cand[np.arange(edges.n_edges), pick]
                state.phi = psi_new[state.phi_src]
                if relay_log and i % decimate == 0:
                    log.extend(
                        (i, int(s), int(r), int(ms))
                        for s, r, ms in zip(edges.src, edges.dst, state.phi_src)
                    )

        state.psi = psi_new
        state.w = w_new

        if i % decimate == 0:
            # metrics of a run heading for divergence may overflow to inf
            with np.errstate(over="ignore"):
                psi_err = psi_new - true_models
                w_err = w_new - true_models
                out["msd_psi"][rec] = float((psi_err * psi_err).sum())
                out["msd_w"][rec] = float((w_err * w_err).sum())
                out["max_psi_err"][rec] = float(np.sqrt((psi_err * psi_err).sum(axis=1)).max())
                out["max_w_err"][rec] = float(np.sqrt((w_err * w_err).sum(axis=1)).max())
            miss = np.zeros(n)
            false = np.zeros(n)
            np.add.at(miss, edges.dst[same_edges & ~state.e_edges], 1.0)
            np.add.at(false, edges.dst[~same_edges & state.e_edges], 1.0)
            out["v1_bar"][rec] = float((miss[err_agents] / deg_minus[err_agents]).mean())
            out["v2_bar"][rec] = float((false[err_agents] / deg_minus[err_agents]).mean())
            if collect_edges:
                b_hist[:, rec] = state.b_edges
                e_hist[:, rec] = state.e_edges
            rec += 1

    final_f = np.eye(n)
    final_e = np.eye(n, dtype=bool)
    final_f[edges.src, edges.dst] = state.f_edges
    final_e[edges.src, edges.dst] = state.e_edges

    kept = slice(0, rec)
    return RunTrace(
        scheme=scheme,
        seed_key=seed_key,
        rounds=np.array(recorded[:rec]),
        msd_psi=out["msd_psi"][kept],
        msd_w=out["msd_w"][kept],
        v1_bar=out["v1_bar"][kept],
        v2_bar=out["v2_bar"][kept],
        max_psi_err=out["max_psi_err"][kept],
        max_w_err=out["max_w_err"][kept],
        final_f=final_f,
        final_e=final_e,
        wall_clock=time.perf_counter() - t0,
        diverged_at=diverged_at,
        b_hist=None if b_hist is None else b_hist[:, kept],
        e_hist=None if e_hist is None else e_hist[:, kept],
        relay_log=log,
        phi_src_final=state.phi_src.copy(),
    )


def linked_round(scenario: Scenario, state: SimState, edges: EdgeIndex, datum, round_idx: int = 0):
    """One synchronous round of the linking scheme on an explicit state.

    Reference-grade path used by tests; `run_single` executes the same
    update stream-wise.
    """
    u, d = datum
    n = scenario.n_agents
    mu = scenario.hyper.broadcast(n)
    alpha, nu, gamma = scenario.hyper.alpha, scenario.hyper.nu, scenario.hyper.gamma
    residual = d - (u * state.psi).sum(axis=1)
    psi_new = state.psi + 2.0 * mu[:, None] * residual[:, None] * u
    if not np.all(np.isfinite(psi_new)):
        raise DivergenceAbort(round_idx)
    diff = state.phi - state.w[edges.dst]
    state.b_edges = (diff * diff).sum(axis=1) <= alpha
    state.f_edges = nu * state.f_edges + (1.0 - nu) * state.b_edges
    state.e_edges = state.f_edges >= gamma
    state.w = _fuse_counts(psi_new, state.phi, state.e_edges, edges.dst)
    d2 = ((psi_new[edges.cand] - psi_new[edges.dst][:, None, :]) ** 2).sum(axis=2)
    pick = np.argmin(d2, axis=1)
    state.phi_src = edges.cand[np.arange(edges.n_edges), pick]
    state.phi = psi_new[state.phi_src]
    state.psi = psi_new
    return state
