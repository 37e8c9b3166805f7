from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Literal

import numpy as np

from delays.schedule import DelaySchedule
from mdp.errors import ContractViolation
from mdp.model import Policy, Trajectory

logger = logging.getLogger(__name__)

FeedbackMode = Literal["full_info", "bandit"]


@dataclass(frozen=True, eq=False)
class FeedbackPacket:
    """Everything episode ``episode`` reveals once its feedback arrives.

    ``costs`` is the full (H, S, A) table under full information and the H
    suffered costs under bandit feedback.
    """

    episode: int
    trajectory: Trajectory
    costs: np.ndarray
    mode: FeedbackMode
    policy_snapshot: Policy
    delay: int

    def __post_init__(self) -> None:
        H = self.trajectory.horizon
        costs = np.asarray(self.costs, dtype=float)
        if self.mode == "full_info" and (costs.ndim != 3 or costs.shape[0] != H):
            raise ContractViolation("full-information packets carry an (H, S, A) cost table")
        if self.mode == "bandit" and costs.shape != (H,):
            raise ContractViolation("bandit packets carry the H suffered costs")
        if self.delay < 0:
            raise ContractViolation("delay must be nonnegative")
        object.__setattr__(self, "costs", costs)

    @property
    def arrival(self) -> int:
        return self.episode + self.delay

    def suffered_costs(self) -> np.ndarray:
        if self.mode == "bandit":
            return self.costs
        traj = self.trajectory
        return self.costs[np.arange(traj.horizon), traj.states, traj.actions]


def visit_table(trajectory: Trajectory, num_states: int, num_actions: int) -> np.ndarray:
    """(H, S, A) indicator of the state-action pairs a trajectory touched."""
    H = trajectory.horizon
    table = np.zeros((H, num_states, num_actions), dtype=np.int64)
    table[np.arange(H), trajectory.states, trajectory.actions] = 1
    return table


class FeedbackBuffer:
    """Pending deliveries plus the visit counters m (executed) and n (observed)."""

    def __init__(self, schedule: DelaySchedule, num_states: int, num_actions: int, horizon: int) -> None:
        self.schedule = schedule
        self.shape = (horizon, num_states, num_actions)
        self.m = np.zeros(self.shape, dtype=np.int64)
        self.n = np.zeros(self.shape, dtype=np.int64)
        self._pending: dict[int, list[FeedbackPacket]] = defaultdict(list)
        self._executed: set[int] = set()
        self._observed: set[int] = set()
        self.dropped_past_horizon = 0

    @property
    def missing(self) -> int:
        """M^k after the latest delivery: executed episodes with outstanding feedback."""
        return len(self._executed) - len(self._observed)

    def record_visit(self, packet: FeedbackPacket) -> None:
        """Count the executed visits and queue the packet for its arrival episode."""
        j = packet.episode
        if j in self._executed:
            raise ContractViolation(f"episode {j} executed twice")
        if packet.delay != self.schedule.delay(j):
            raise ContractViolation(f"packet delay {packet.delay} disagrees with schedule for episode {j}")
        self._executed.add(j)
        self.m += visit_table(packet.trajectory, self.shape[1], self.shape[2])
        if packet.arrival <= self.schedule.num_episodes:
            self._pending[packet.arrival].append(packet)
        else:
            self.dropped_past_horizon += 1

    def record_observed(self, packet: FeedbackPacket) -> None:
        j = packet.episode
        if j in self._observed:
            raise ContractViolation(f"feedback of episode {j} delivered twice")
        if j not in self._executed:
            raise ContractViolation(f"feedback of episode {j} arrived before it was executed")
        self._observed.add(j)
        self.n += visit_table(packet.trajectory, self.shape[1], self.shape[2])

    def deliver(self, k: int) -> list[FeedbackPacket]:
        """Pop F^k in episode order and count each packet as observed."""
        packets = sorted(self._pending.pop(k, []), key=lambda p: p.episode)
        for packet in packets:
            self.record_observed(packet)
        if packets:
            logger.debug(f"episode {k}: delivered feedback of {[p.episode for p in packets]}")
        return packets

    def check_invariants(self) -> None:
        if np.any(self.n > self.m):
            raise ContractViolation("observed visits exceed executed visits")
        H = self.shape[0]
        if int((self.m - self.n).sum()) != H * self.missing:
            raise ContractViolation("outstanding visits disagree with the missing-episode count")
