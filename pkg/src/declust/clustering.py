"""Trust engine: proximity test, exponential trust smoothing, cluster decision.

Trust state for destination agent k lives on the directed links
l -> k with l in the graph neighborhood of k (excluding k); diagonals
are pinned to one and entries for non-neighbors are never allocated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from declust.model import Topology


def proximity_test(psi_l: np.ndarray, w_k_prev: np.ndarray, alpha: float) -> bool:
    """Boolean b: neighbor iterate within squared distance alpha of last fused w."""
    diff = np.asarray(psi_l, dtype=float) - np.asarray(w_k_prev, dtype=float)
    return bool(diff @ diff <= alpha)


def trust_update(f_prev: float, b_now: bool, nu: float) -> float:
    """Exponential smoothing f = nu * f_prev + (1 - nu) * b."""
    return nu * f_prev + (1.0 - nu) * float(b_now)


def cluster_decision(f_now: float, gamma: float) -> bool:
    """Declare same-cluster once trust reaches gamma (boundary inclusive)."""
    return f_now >= gamma


def believed_neighborhood(e_col: np.ndarray, neighbors: np.ndarray, k: int) -> np.ndarray:
    """Indices l in N_k with e_lk = 1; always contains k itself."""
    nbrs = np.asarray(neighbors, dtype=int)
    kept = nbrs[np.asarray(e_col, dtype=bool)[nbrs]]
    if k not in kept:
        kept = np.sort(np.append(kept, k))
    return kept


@dataclass
class TrustMatrices:
    """Dense B/F/E snapshots; off-neighborhood entries are structurally zero."""

    b: np.ndarray  # boolean
    f: np.ndarray  # real in [0, 1]
    e: np.ndarray  # boolean

    @classmethod
    def identity(cls, n_agents: int) -> "TrustMatrices":
        eye = np.eye(n_agents, dtype=bool)
        return cls(b=eye.copy(), f=eye.astype(float), e=eye.copy())

    def validate(self, topology: Topology | None = None) -> None:
        n = self.f.shape[0]
        assert np.all(np.diag(self.b)) and np.all(np.diag(self.e))
        assert np.allclose(np.diag(self.f), 1.0)
        assert np.all((self.f >= 0.0) & (self.f <= 1.0))
        if topology is not None:
            off = ~topology.adjacency
            assert not self.b[off].any() and not self.e[off].any()
            assert np.allclose(self.f[off], 0.0)
            assert n == topology.n_agents
