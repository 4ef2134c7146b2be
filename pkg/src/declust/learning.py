"""Per-round adapt step and convex fusion over the believed neighborhood.

The quadratic loss Q(w; u, d) = (d - u w)^2 gives the instantaneous
gradient -2 u^T (d - u w); the factor-2 convention keeps the curvature
constants (tau = 2 lambda_min(R_u), zeta = 2 lambda_max(R_u)) and the
Lyapunov formulas internally consistent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DivergenceError(RuntimeError):
    """An iterate became non-finite (step size too large)."""


@dataclass
class AgentState:
    """One agent's intermediate iterate psi, fused iterate w and step size."""

    psi: np.ndarray
    w: np.ndarray
    step_size: float


def stochastic_gradient(psi: np.ndarray, datum: tuple[np.ndarray, float]) -> np.ndarray:
    """Gradient of the instantaneous loss (d - u psi)^2 at psi."""
    u, d = datum
    u = np.asarray(u, dtype=float)
    return -2.0 * u * (d - u @ psi)


def adapt(state: AgentState, datum: tuple[np.ndarray, float]) -> np.ndarray:
    """Stochastic-gradient step on psi; flags divergence."""
    # overflow is how divergence manifests; it is detected, not a fault
    with np.errstate(over="ignore", invalid="ignore"):
        psi = state.psi - state.step_size * stochastic_gradient(state.psi, datum)
    if not np.all(np.isfinite(psi)):
        raise DivergenceError("non-finite iterate after adapt step")
    state.psi = psi
    return psi


def build_uniform_weights(believed_neighborhoods: list[np.ndarray], n_agents: int) -> np.ndarray:
    """Left-stochastic combination matrix A with a_lk = 1/|N_{k,i}| on believed links.

    believed_neighborhoods[k] must contain k itself.
    """
    a = np.zeros((n_agents, n_agents))
    for k, nbrs in enumerate(believed_neighborhoods):
        nbrs = np.asarray(nbrs, dtype=int)
        if k not in nbrs:
            raise ValueError(f"agent {k} missing from its own believed neighborhood")
        a[nbrs, k] = 1.0 / len(nbrs)
    return a


def fuse(weights_col: np.ndarray, iterates: np.ndarray) -> np.ndarray:
    """Convex combination w_k = sum_l a_lk psi_l for one destination agent."""
    weights_col = np.asarray(weights_col, dtype=float)
    iterates = np.asarray(iterates, dtype=float)
    if weights_col.shape[0] != iterates.shape[0]:
        raise ValueError("weight column and iterate stack disagree in length")
    return weights_col @ iterates
