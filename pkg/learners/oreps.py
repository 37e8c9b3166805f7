"""Delayed O-REPS for known dynamics and full-information feedback."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from delays.buffer import FeedbackPacket
from learners.base import sample_action
from learners.projection import (
    OccupancyPolytope,
    kl_project_known_p,
    policy_from_occupancy,
    unconstrained_update,
)
from mdp.dynamics import occupancy_measure
from mdp.errors import ContractViolation
from mdp.model import OccupancyMeasure, Policy, TabularMdp, Trajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OrepsState:
    q: OccupancyMeasure
    eta: float

    @property
    def policy(self) -> Policy:
        return policy_from_occupancy(self.q)


def initial_state(mdp: TabularMdp, eta: float) -> OrepsState:
    """Occupancy of the uniform policy, feasible from the start."""
    return OrepsState(q=occupancy_measure(mdp, Policy.uniform(*mdp.shape)), eta=eta)


def oreps_on_feedback(
    state: OrepsState,
    batch_costs: Sequence[np.ndarray],
    mdp: TabularMdp,
    polytope: OccupancyPolytope | None = None,
) -> OrepsState:
    """One mirror-descent step on the summed arrived costs; an empty batch is a no-op."""
    if not batch_costs:
        return state
    total = np.zeros(mdp.shape)
    for cost in batch_costs:
        total += cost
    q_tilde = unconstrained_update(state.q, total, state.eta)
    return OrepsState(q=kl_project_known_p(q_tilde, mdp, polytope=polytope), eta=state.eta)


class DelayedOreps:
    def __init__(self, mdp: TabularMdp, learning_rate: float) -> None:
        if learning_rate <= 0:
            raise ContractViolation("learning rate must be positive")
        self.mdp = mdp
        self.polytope = OccupancyPolytope(mdp)
        self.state = initial_state(mdp, learning_rate)
        self._policy = self.state.policy
        self._processed: set[int] = set()

    @property
    def policy(self) -> Policy:
        return self._policy

    @property
    def eta(self) -> float:
        return self.state.eta

    def begin_episode(self, k: int) -> Policy:
        return self._policy

    def act(self, state: int, step: int, rng: np.random.Generator) -> int:
        return sample_action(self._policy, state, step, rng)

    def end_episode(self, k: int, trajectory: Trajectory) -> None:
        pass

    def on_feedback(self, k: int, packets: Sequence[FeedbackPacket]) -> None:
        costs = []
        for packet in packets:
            if packet.mode != "full_info":
                raise ContractViolation("O-REPS needs full-information feedback")
            if packet.episode in self._processed:
                raise ContractViolation(f"feedback of episode {packet.episode} replayed")
            self._processed.add(packet.episode)
            costs.append(packet.costs)
        if not costs:
            return
        self.state = oreps_on_feedback(self.state, costs, self.mdp, self.polytope)
        self._policy = self.state.policy

    def restart(self, eta: float, gamma: float | None = None) -> None:
        self.state = initial_state(self.mdp, eta)
        self._policy = self.state.policy

    def state_dict(self) -> dict[str, Any]:
        return {
            "kind": "oreps",
            "eta": self.state.eta,
            "policy": self._policy.probs.tolist(),
            "residuals": self.polytope.residuals(self.state.q),
            "processed": len(self._processed),
        }
