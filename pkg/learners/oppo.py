"""Delayed OPPO: optimistic evaluation of arrived feedback plus exponential-weights improvement."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.special import softmax

from delays.buffer import FeedbackMode, FeedbackPacket
from estimation.confidence import ConfidenceSet, TransitionCounts, log_term
from estimation.costs import estimate_costs
from estimation.optimism import optimistic_transition, upper_occupancy
from learners.base import sample_action
from mdp.dynamics import q_backup, v_from_q
from mdp.errors import ContractViolation
from mdp.model import Policy, TabularMdp, Trajectory, ValueTables

logger = logging.getLogger(__name__)

DynamicsMode = Literal["known", "unknown"]


class OppoConfig(BaseModel):
    """Inputs of Delayed OPPO."""

    learning_rate: float = Field(gt=0, description="eta")
    exploration: float = Field(default=0.0, ge=0, description="gamma, the importance-sampling floor")
    delta: float = Field(default=0.1, gt=0, lt=1, description="Confidence parameter")
    num_episodes: int = Field(ge=1, description="K, enters the confidence radius")
    feedback_mode: FeedbackMode = "full_info"
    dynamics_mode: DynamicsMode = "known"
    use_explicit_exploration: bool = False
    d_max_hint: int | None = Field(default=None, ge=0, description="Maximal delay, for the exploration gate")
    trajectory_delayed: bool = Field(default=True, description="False: trajectories are observed at end of episode")
    union_split: bool = Field(default=False, description="Use delta / 9 in the radius")

    @model_validator(mode="after")
    def _check_regime(self) -> OppoConfig:
        if self.feedback_mode == "bandit" and self.exploration <= 0:
            raise ValueError("bandit feedback needs exploration (gamma) > 0")
        if self.use_explicit_exploration and self.d_max_hint is None:
            raise ValueError("explicit exploration needs d_max_hint")
        if self.use_explicit_exploration and self.dynamics_mode == "known":
            raise ValueError("explicit exploration only applies to unknown dynamics")
        return self


def tuned_parameters(feedback_mode: FeedbackMode, horizon: int, num_actions: int, num_episodes: int, total_delay: int) -> tuple[float, float]:
    """(eta, gamma) from the regret analysis; gamma is 0 under full information."""
    if feedback_mode == "full_info":
        return 1.0 / (horizon * math.sqrt(num_episodes + total_delay)), 0.0
    scale = num_actions**1.5 * num_episodes + total_delay
    return 1.0 / (horizon * scale ** (2.0 / 3.0)), 1.0 / scale ** (1.0 / 3.0)


def evaluate_policy_optimistic(
    packet: FeedbackPacket,
    model: ConfidenceSet | TabularMdp,
    config: OppoConfig,
    initial_state: int,
) -> ValueTables:
    """Q^j and V^j of the packet's policy with the cost estimate and the optimistic kernel.

    ``model`` is the true MDP under known dynamics, else the confidence set
    to optimize over (the snapshot P^j under bandit feedback). Q is not
    clipped.
    """
    policy = packet.policy_snapshot
    u = None
    if packet.mode == "bandit":
        u = upper_occupancy(model, policy, initial_state)
    c_hat = estimate_costs(packet, u, config.exploration).values

    H, S, A = policy.shape
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, A))
    for h in reversed(range(H)):
        if isinstance(model, TabularMdp):
            Q[h] = q_backup(c_hat[h], model.transitions[h], V[h + 1])
        else:
            p_hat = optimistic_transition(model.p_bar[h], model.epsilon[h], V[h + 1])
            Q[h] = q_backup(c_hat[h], p_hat, V[h + 1])
        V[h] = v_from_q(Q[h], policy.probs[h])
    return ValueTables(V=V, Q=Q)


POLICY_FLOOR = 1e-300


def policy_from_scores(scores: np.ndarray, eta: float) -> Policy:
    """softmax(-eta * scores) per row, floored so every action keeps positive mass."""
    probs = np.maximum(softmax(-eta * scores, axis=-1), POLICY_FLOOR)
    return Policy(probs / probs.sum(axis=-1, keepdims=True))


def improve_policy(scores: np.ndarray, q_tables: Sequence[np.ndarray], eta: float) -> tuple[np.ndarray, Policy]:
    """Exponential-weights step pi' ∝ pi exp(-eta sum_j Q^j), kept as cumulative scores.

    An empty batch returns the scores unchanged.
    """
    if not q_tables:
        return scores, policy_from_scores(scores, eta)
    total = np.array(q_tables[0], dtype=float, copy=True)
    for q in q_tables[1:]:
        total += q
    if not np.all(np.isfinite(total)):
        raise ContractViolation("Q estimates must be finite")
    new_scores = scores + total
    return new_scores, policy_from_scores(new_scores, eta)


class DelayedOppo:
    """Delayed OPPO for every combination of feedback and dynamics knowledge.

    Under known dynamics only ``mdp.transitions`` is read; otherwise the
    learner uses the MDP for its dimensions and initial state only.
    """

    def __init__(self, config: OppoConfig, mdp: TabularMdp) -> None:
        self.config = config
        self.mdp = mdp
        H, S, A = mdp.shape
        self.eta = config.learning_rate
        self.gamma = config.exploration
        self.scores = np.zeros((H, S, A))
        self._policy = Policy.uniform(H, S, A)
        self._played = self._policy
        self._gate = np.zeros((H, S), dtype=bool)
        self.k_exp: set[int] = set()
        self._processed: set[int] = set()
        self._snapshots: dict[int, ConfidenceSet] = {}
        self._unsnapped: list[int] = []
        self.counts: TransitionCounts | None = None
        if config.dynamics_mode == "unknown":
            log_l = log_term(H, S, A, config.num_episodes, config.delta, union_split=config.union_split)
            self.counts = TransitionCounts(H, S, A, log_l)
        if config.feedback_mode == "bandit" and config.use_explicit_exploration:
            logger.info("explicit exploration enabled under bandit feedback; the bandit analysis does not use it")

    @property
    def policy(self) -> Policy:
        return self._policy

    @property
    def known_dynamics(self) -> bool:
        return self.counts is None

    def exploration_gate(self) -> np.ndarray:
        """(H, S) mask of states still played uniformly: n_h(s) <= 2 d_max log(HSA / delta)."""
        if not self.config.use_explicit_exploration or self.counts is None:
            return np.zeros(self.scores.shape[:2], dtype=bool)
        H, S, A = self.scores.shape
        threshold = 2.0 * self.config.d_max_hint * math.log(H * S * A / self.config.delta)
        return self.counts.state_counts() <= threshold

    def begin_episode(self, k: int) -> Policy:
        self._gate = self.exploration_gate()
        if self._gate.any():
            A = self.scores.shape[-1]
            self._played = Policy(np.where(self._gate[..., None], 1.0 / A, self._policy.probs))
        else:
            self._played = self._policy
        return self._played

    def act(self, state: int, step: int, rng: np.random.Generator) -> int:
        return sample_action(self._played, state, step, rng)

    def end_episode(self, k: int, trajectory: Trajectory) -> None:
        trajectory.check_against(self.mdp)
        steps = np.arange(trajectory.horizon)
        if np.any(self._gate[steps, trajectory.states]):
            self.k_exp.add(k)
        if self.counts is not None and not self.config.trajectory_delayed:
            self.counts.observe(trajectory)
        if self.config.feedback_mode == "bandit" and self.counts is not None:
            self._unsnapped.append(k)

    def observe_trajectory(self, packet: FeedbackPacket) -> None:
        """Feed only the transitions of a packet whose costs are withheld."""
        if self.counts is not None and self.config.trajectory_delayed:
            self.counts.observe(packet.trajectory)
        self._snapshots.pop(packet.episode, None)

    def drop_feedback(self, packet: FeedbackPacket) -> None:
        """Forget a packet that will never be evaluated."""
        self._snapshots.pop(packet.episode, None)

    def _model_for(self, packet: FeedbackPacket) -> ConfidenceSet | TabularMdp:
        if self.counts is None:
            return self.mdp
        if packet.mode == "bandit":
            snapshot = self._snapshots.pop(packet.episode, None)
            if snapshot is None:
                raise ContractViolation(f"no confidence snapshot for episode {packet.episode}")
            return snapshot
        return self.counts.confidence_set()

    def on_feedback(self, k: int, packets: Sequence[FeedbackPacket]) -> None:
        for packet in packets:
            if packet.episode in self._processed:
                raise ContractViolation(f"feedback of episode {packet.episode} replayed")
            self._processed.add(packet.episode)
            if self.counts is not None and self.config.trajectory_delayed:
                self.counts.observe(packet.trajectory)
        if self._unsnapped:
            # an episode is evaluated on the set as it stood once that episode ended
            snapshot = self.counts.confidence_set()
            for j in self._unsnapped:
                self._snapshots[j] = snapshot
            self._unsnapped.clear()

        q_tables = []
        for packet in packets:
            if packet.episode in self.k_exp:
                self._snapshots.pop(packet.episode, None)
                continue
            model = self._model_for(packet)
            q_tables.append(evaluate_policy_optimistic(packet, model, self.config, self.mdp.initial_state).Q)

        if q_tables:
            self.scores, self._policy = improve_policy(self.scores, q_tables, self.eta)

    def restart(self, eta: float, gamma: float | None = None) -> None:
        """New phase: uniform policy with new parameters; transition statistics are kept."""
        self.eta = eta
        if gamma is not None:
            self.gamma = gamma
            self.config = self.config.model_copy(update={"learning_rate": eta, "exploration": gamma})
        else:
            self.config = self.config.model_copy(update={"learning_rate": eta})
        self.scores = np.zeros_like(self.scores)
        self._policy = Policy.uniform(*self.scores.shape)
        self._played = self._policy

    def state_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "kind": "oppo",
            "eta": self.eta,
            "gamma": self.gamma,
            "scores": self.scores.tolist(),
            "policy": self._policy.probs.tolist(),
            "k_exp": sorted(self.k_exp),
            "processed": len(self._processed),
        }
        if self.counts is not None:
            out["transition_counts"] = self.counts.counts.tolist()
        return out
