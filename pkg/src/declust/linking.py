"""Relay ("linking") extension: route useful iterates across foreign edges.

For each ordered edge k -> l, agent k forwards the iterate among
{k} union {m in N_k : m not in N_l} that is closest to psi_l. The
exclusion avoids delivering information l already receives directly.
"""

from __future__ import annotations

import numpy as np

from declust.model import Topology


def relay_candidates(k: int, l: int, topology: Topology) -> np.ndarray:
    """Sorted candidate indices for the relay sent from k to l."""
    if not topology.adjacency[l, k]:
        raise ValueError(f"{l} is not a neighbor of {k}")
    nk = topology.neighbor_sets[k]
    in_nl = topology.adjacency[:, l]
    cand = set(int(m) for m in nk if not in_nl[m])
    cand.add(k)
    return np.array(sorted(cand), dtype=int)


def select_relay(
    k: int, l: int, iterates: np.ndarray, topology: Topology
) -> tuple[np.ndarray, int]:
    """Relay vector phi_{kl} and its source index m*.

    m* minimizes ||psi_m - psi_l||^2 over the candidate set; ties break
    toward the smallest agent index (candidates are sorted, argmin takes
    the first minimum).
    """
    cand = relay_candidates(k, l, topology)
    d2 = ((iterates[cand] - iterates[l]) ** 2).sum(axis=1)
    m_star = int(cand[np.argmin(d2)])
    return iterates[m_star].copy(), m_star
