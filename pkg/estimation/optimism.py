from __future__ import annotations

import numpy as np

from estimation.confidence import ConfidenceSet
from mdp.dynamics import occupancy_measure
from mdp.model import Policy, TabularMdp


def optimistic_transition(p_bar_row: np.ndarray, eps_row: np.ndarray, v_next: np.ndarray) -> np.ndarray:
    """Minimize <p', v_next> over the box [p_bar - eps, p_bar + eps] cut with the simplex.

    Works on any leading axes. Every entry starts at its lower bound and the
    leftover mass fills the cheapest next states first, up to their upper
    bounds; a stable sort breaks ties by state index.
    """
    p_bar_row = np.asarray(p_bar_row, dtype=float)
    eps_row = np.asarray(eps_row, dtype=float)
    shape = np.broadcast_shapes(p_bar_row.shape, eps_row.shape, np.shape(v_next))
    lower = np.broadcast_to(np.maximum(0.0, p_bar_row - eps_row), shape)
    upper = np.broadcast_to(np.minimum(1.0, p_bar_row + eps_row), shape)
    v = np.broadcast_to(np.asarray(v_next, dtype=float), shape)

    order = np.argsort(v, axis=-1, kind="stable")
    lo = np.take_along_axis(lower, order, axis=-1)
    room = np.take_along_axis(upper, order, axis=-1) - lo
    budget = 1.0 - lo.sum(axis=-1, keepdims=True)
    filled_before = np.cumsum(room, axis=-1) - room
    extra = np.clip(budget - filled_before, 0.0, room)

    out = np.empty(shape)
    np.put_along_axis(out, order, lo + extra, axis=-1)
    return out


def upper_occupancy(
    confidence_set: ConfidenceSet | TabularMdp,
    policy: Policy,
    initial_state: int | None = None,
) -> np.ndarray:
    """u_h(s) = max over kernels in the set of Pr[s_h = s], shape (H, S).

    Given the true MDP instead of a confidence set, returns the exact
    occupancy marginals. Otherwise one maximizing DP per target layer,
    vectorized over the target states.
    """
    if isinstance(confidence_set, TabularMdp):
        return occupancy_measure(confidence_set, policy).state()
    if initial_state is None:
        raise ValueError("initial_state is required with a confidence set")

    p_bar, eps = confidence_set.p_bar, confidence_set.epsilon
    H, S, _ = policy.shape
    u = np.zeros((H, S))
    u[0, initial_state] = 1.0
    for target in range(1, H):
        # reach[t, s]: best probability of hitting state t at layer ``target`` from s
        reach = np.eye(S)
        for h in reversed(range(target)):
            p_hat = optimistic_transition(p_bar[h][None], eps[h][None], -reach[:, None, None, :])
            step = np.einsum("tsaj,tj->tsa", p_hat, reach)
            reach = np.einsum("tsa,sa->ts", step, policy.probs[h])
        u[target] = reach[:, initial_state]
    return np.clip(u, 0.0, 1.0)
