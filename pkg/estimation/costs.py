from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from delays.buffer import FeedbackPacket
from mdp.errors import ContractViolation


@dataclass(frozen=True, eq=False)
class EstimatedCost:
    """c-hat^j over (h, s, a)."""

    values: np.ndarray


def is_cost_estimator(suffered_cost, visited, u_hs, pi_has, gamma: float):
    """c * 1{visited} / (u * pi + gamma), elementwise."""
    visited = np.asarray(visited, dtype=bool)
    denom = np.asarray(u_hs, dtype=float) * np.asarray(pi_has, dtype=float) + gamma
    if np.any(visited & (denom <= 0.0)):
        raise ContractViolation("importance weight undefined: u * pi + gamma is zero on a visited pair")
    safe = np.where(denom > 0.0, denom, 1.0)
    out = np.where(visited, np.asarray(suffered_cost, dtype=float) / safe, 0.0)
    return float(out) if out.ndim == 0 else out


def estimate_costs(packet: FeedbackPacket, u: np.ndarray | None, gamma: float) -> EstimatedCost:
    """Full information returns c^j itself; bandit feedback importance-weights the suffered costs."""
    if packet.mode == "full_info":
        return EstimatedCost(packet.costs)
    if gamma <= 0.0:
        raise ContractViolation("bandit feedback needs gamma > 0")
    if u is None:
        raise ContractViolation("bandit feedback needs the upper occupancy bound of the episode")
    pi = packet.policy_snapshot.probs
    traj = packet.trajectory
    H, S, A = pi.shape
    values = np.zeros((H, S, A))
    steps = np.arange(H)
    s, a = traj.states, traj.actions
    values[steps, s, a] = is_cost_estimator(packet.costs, True, u[steps, s], pi[steps, s, a], gamma)
    return EstimatedCost(values)


def estimator_excess(c_hat: np.ndarray, costs: np.ndarray, q_state: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One episode's c-hat - (q / u) c, per (h, s, a).

    Its running sum stays below ``estimator_excess_bound`` with high
    probability; diagnostic only.
    """
    ratio = np.where(u > 0.0, q_state / np.where(u > 0.0, u, 1.0), 0.0)
    return c_hat - ratio[..., None] * costs


def estimator_excess_bound(horizon: int, num_states: int, num_actions: int, num_episodes: int, delta: float, gamma: float) -> float:
    return math.log(num_states * num_actions * horizon * num_episodes / delta) / (2.0 * gamma)
