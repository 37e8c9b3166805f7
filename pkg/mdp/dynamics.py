"""Exact dynamic programming, sampling and the regret oracle."""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence

import numpy as np

from mdp.errors import ContractViolation
from mdp.model import (
    ROW_TOL,
    CostFunction,
    CostSequence,
    OccupancyMeasure,
    Policy,
    TabularMdp,
    Trajectory,
    ValueTables,
)


def _cost_table(cost: CostFunction | np.ndarray) -> np.ndarray:
    return cost.costs if isinstance(cost, CostFunction) else np.asarray(cost, dtype=float)


def _check_dims(mdp: TabularMdp, table: np.ndarray, what: str) -> None:
    if table.shape != mdp.shape:
        raise ContractViolation(f"{what} shape {table.shape} does not match MDP {mdp.shape}")


def q_backup(cost_layer: np.ndarray, transition_layer: np.ndarray, v_next: np.ndarray) -> np.ndarray:
    """Q(s, a) = c(s, a) + <p(. | s, a), v_next>."""
    cost_layer = np.asarray(cost_layer, dtype=float)
    transition_layer = np.asarray(transition_layer, dtype=float)
    v_next = np.asarray(v_next, dtype=float)
    if transition_layer.ndim != 3 or v_next.shape != (transition_layer.shape[-1],):
        raise ContractViolation(
            f"value vector of shape {v_next.shape} does not match kernel {transition_layer.shape}"
        )
    if cost_layer.shape != transition_layer.shape[:2]:
        raise ContractViolation(f"cost layer {cost_layer.shape} does not match kernel {transition_layer.shape}")
    return cost_layer + transition_layer @ v_next


def v_from_q(q_layer: np.ndarray, policy_layer: np.ndarray) -> np.ndarray:
    """V(s) = <pi(. | s), Q(s, .)>."""
    q_layer = np.asarray(q_layer, dtype=float)
    policy_layer = np.asarray(policy_layer, dtype=float)
    if q_layer.shape != policy_layer.shape:
        raise ContractViolation(f"Q layer {q_layer.shape} and policy layer {policy_layer.shape} disagree")
    if np.any(policy_layer < 0.0) or np.max(np.abs(policy_layer.sum(axis=-1) - 1.0)) > ROW_TOL:
        raise ContractViolation("policy rows must be probability vectors")
    return np.einsum("sa,sa->s", q_layer, policy_layer)


def policy_value(mdp: TabularMdp, policy: Policy, cost: CostFunction | np.ndarray) -> ValueTables:
    """Backward Bellman recursion for the exact V and Q of ``policy``."""
    c = _cost_table(cost)
    _check_dims(mdp, c, "cost")
    _check_dims(mdp, policy.probs, "policy")
    H, S, A = mdp.shape
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, A))
    for h in reversed(range(H)):
        Q[h] = q_backup(c[h], mdp.transitions[h], V[h + 1])
        V[h] = v_from_q(Q[h], policy.probs[h])
    return ValueTables(V=V, Q=Q)


def initial_value(mdp: TabularMdp, policy: Policy, cost: CostFunction | np.ndarray) -> float:
    return policy_value(mdp, policy, cost).initial_value(mdp.initial_state)


def occupancy_measure(mdp: TabularMdp, policy: Policy) -> OccupancyMeasure:
    """Forward recursion for q_h(s, a, s') under ``policy`` and the true kernel."""
    _check_dims(mdp, policy.probs, "policy")
    H, S, A = mdp.shape
    q = np.zeros((H, S, A, S))
    mu = np.zeros(S)
    mu[mdp.initial_state] = 1.0
    for h in range(H):
        q[h] = (mu[:, None] * policy.probs[h])[..., None] * mdp.transitions[h]
        mu = q[h].sum(axis=(0, 1))
    return OccupancyMeasure(q)


def best_response(mdp: TabularMdp, total_cost: np.ndarray) -> tuple[Policy, float]:
    """Greedy DP on an already-summed cost table.

    The returned policy is deterministic; ``np.argmin`` breaks ties toward
    the lowest action index.
    """
    total_cost = np.asarray(total_cost, dtype=float)
    _check_dims(mdp, total_cost, "summed cost")
    H, S, _ = mdp.shape
    V = np.zeros(S)
    actions = np.zeros((H, S), dtype=int)
    for h in reversed(range(H)):
        Q = total_cost[h] + mdp.transitions[h] @ V
        actions[h] = np.argmin(Q, axis=1)
        V = np.take_along_axis(Q, actions[h][:, None], axis=1)[:, 0]
    return Policy.deterministic(actions, mdp.num_actions), float(V[mdp.initial_state])


def best_policy_in_hindsight(mdp: TabularMdp, costs: CostSequence) -> tuple[Policy, float]:
    """argmin over policies of sum_k V^{k, pi}_1(s_init).

    The value is linear in the cost for a fixed kernel, so the best fixed
    policy is the optimal policy for the summed cost.
    """
    return best_response(mdp, costs.total())


def prefix_hindsight_values(
    mdp: TabularMdp,
    costs: CostSequence,
    checkpoints: Iterable[int] | None = None,
) -> dict[int, float]:
    """min_pi sum_{j <= k} V^{j, pi}_1 for each checkpoint k (all k by default)."""
    K = costs.num_episodes
    wanted = sorted(set(range(1, K + 1) if checkpoints is None else checkpoints))
    if wanted and not 1 <= wanted[0] <= wanted[-1] <= K:
        raise ContractViolation(f"checkpoints must lie in [1, {K}]")
    running = np.zeros(mdp.shape)
    out: dict[int, float] = {}
    done = 0
    for k in wanted:
        running += costs.tables[done:k].sum(axis=0)
        done = k
        out[k] = best_response(mdp, running)[1]
    return out


def draw_index(row: np.ndarray, u: float) -> int:
    """Inverse-CDF draw from a probability row with one uniform."""
    cdf = np.cumsum(row)
    return int(np.searchsorted(cdf, u * cdf[-1], side="right"))


def rollout(
    mdp: TabularMdp,
    act: Callable[[int, int, np.random.Generator], int],
    cost: CostFunction | np.ndarray,
    rng: np.random.Generator,
) -> Trajectory:
    """Roll out one episode, asking ``act(state, step, rng)`` for every action.

    Each step the action is chosen before one uniform is drawn for the next
    state.
    """
    c = _cost_table(cost)
    _check_dims(mdp, c, "cost")
    H, S, A = mdp.shape
    states = np.empty(H, dtype=int)
    actions = np.empty(H, dtype=int)
    suffered = np.empty(H)
    s = mdp.initial_state
    for h in range(H):
        states[h] = s
        a = int(act(s, h, rng))
        if not 0 <= a < A:
            raise ContractViolation(f"action {a} outside [0, {A}) at step {h}")
        actions[h] = a
        suffered[h] = c[h, s, a]
        s = draw_index(mdp.transitions[h, s, a], rng.random())
    return Trajectory(states=states, actions=actions, suffered_costs=suffered, final_state=int(s))


def sample_episode(
    mdp: TabularMdp,
    policy: Policy,
    cost: CostFunction | np.ndarray,
    rng: np.random.Generator,
) -> Trajectory:
    """Roll out ``policy`` by inverse-CDF sampling.

    Consumes exactly 2H uniforms from ``rng`` (action then next state at
    every step), so a run is bitwise reproducible from its seed.
    """
    _check_dims(mdp, policy.probs, "policy")
    return rollout(mdp, lambda s, h, r: draw_index(policy.probs[h, s], r.random()), cost, rng)


def empirical_regret(
    values: Sequence[float] | np.ndarray,
    hindsight: Sequence[float] | np.ndarray | float,
    *,
    prefix: bool = True,
    at: Sequence[int] | None = None,
) -> np.ndarray:
    """Cumulative regret of the played values against the hindsight comparator.

    With ``prefix`` the comparator is the series of prefix minima and the
    result has one entry per episode, or one per 1-based episode in ``at``
    when the minima are only known there. Otherwise ``hindsight`` is the
    final best total and the result holds R_K only.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ContractViolation("values must be a non-empty 1-d series")
    if not prefix:
        if np.ndim(hindsight) != 0:
            raise ContractViolation("final-only regret takes a scalar hindsight total")
        return np.array([values.sum() - float(hindsight)])
    best = np.asarray(hindsight, dtype=float)
    cumulative = np.cumsum(values)
    if at is not None:
        idx = np.asarray(at, dtype=int)
        if idx.ndim != 1 or np.any(idx < 1) or np.any(idx > values.size):
            raise ContractViolation(f"regret episodes must lie in [1, {values.size}]")
        cumulative = cumulative[idx - 1]
    if best.shape != cumulative.shape:
        raise ContractViolation(f"hindsight series length {best.shape} does not match {cumulative.shape}")
    return cumulative - best
