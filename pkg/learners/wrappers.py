"""Learner combinators: skipping, doubling and the round-robin reduction."""

from __future__ import annotations

import dataclasses
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, Field

from delays.buffer import FeedbackPacket
from learners.base import Learner
from mdp.errors import ContractViolation
from mdp.model import Policy, Trajectory

logger = logging.getLogger(__name__)


class SkipConfig(BaseModel):
    threshold: float = Field(gt=0, description="beta: packets with delay above it are dropped")
    feed_skipped_trajectories: bool = Field(
        default=False,
        description="Forward the trajectory of a dropped packet to the transition model",
    )


def default_skip_threshold(total_delay: int, num_states: int, horizon: int, num_actions: int | None = None) -> float:
    """sqrt(D / (S H)); pass A for bandit feedback with delayed trajectories, giving sqrt(D / (H S A))."""
    denom = num_states * horizon * (num_actions or 1)
    # beta must stay positive; with D = 0 nothing is ever skipped
    return math.sqrt(total_delay / denom) if total_delay > 0 else 1.0


def skip_filter(packet: FeedbackPacket, beta: float) -> bool:
    """True keeps the packet."""
    return packet.delay <= beta


def _forward_trajectory(learner: Learner, packet: FeedbackPacket) -> None:
    observe = getattr(learner, "observe_trajectory", None)
    if observe is not None:
        observe(packet)


def _forward_drop(learner: Learner, packet: FeedbackPacket) -> None:
    drop = getattr(learner, "drop_feedback", None)
    if drop is not None:
        drop(packet)


def _discard(learner: Learner, packet: FeedbackPacket, feed_trajectory: bool) -> None:
    """Hand a skipped packet back: its trajectory, or just the news that it is gone."""
    if feed_trajectory:
        _forward_trajectory(learner, packet)
    else:
        _forward_drop(learner, packet)


class SkippingLearner:
    """Feeds the wrapped learner only the packets with delay <= beta."""

    def __init__(self, inner: Learner, config: SkipConfig) -> None:
        self.inner = inner
        self.config = config
        self.threshold = config.threshold
        self.skipped = 0

    @property
    def policy(self) -> Policy:
        return self.inner.policy

    def begin_episode(self, k: int) -> Policy:
        return self.inner.begin_episode(k)

    def act(self, state: int, step: int, rng: np.random.Generator) -> int:
        return self.inner.act(state, step, rng)

    def end_episode(self, k: int, trajectory: Trajectory) -> None:
        self.inner.end_episode(k, trajectory)

    def observe_trajectory(self, packet: FeedbackPacket) -> None:
        _forward_trajectory(self.inner, packet)

    def drop_feedback(self, packet: FeedbackPacket) -> None:
        _forward_drop(self.inner, packet)

    def on_feedback(self, k: int, packets: Sequence[FeedbackPacket]) -> None:
        kept = []
        for packet in packets:
            if skip_filter(packet, self.threshold):
                kept.append(packet)
                continue
            self.skipped += 1
            _discard(self.inner, packet, self.config.feed_skipped_trajectories)
        self.inner.on_feedback(k, kept)

    def restart(self, eta: float, gamma: float | None = None) -> None:
        self.inner.restart(eta, gamma)

    def state_dict(self) -> dict[str, Any]:
        return {"kind": "skip", "threshold": self.threshold, "skipped": self.skipped, "inner": self.inner.state_dict()}


DoublingSchedule = Literal["bandit", "full_info"]


@dataclass(frozen=True)
class DoublingState:
    """Phase e with its parameters; ``estimate`` is k + sum_{j<=k} M^j."""

    phase: int
    estimate: int
    eta: float
    gamma: float | None
    beta: float

    @classmethod
    def for_phase(cls, phase: int, horizon: int, estimate: int = 0, schedule: DoublingSchedule = "bandit") -> DoublingState:
        if schedule == "bandit":
            return cls(
                phase=phase,
                estimate=estimate,
                eta=2.0 ** (-2.0 * phase / 3.0) / horizon,
                gamma=2.0 ** (-phase / 3.0),
                beta=2.0 ** (phase / 2.0),
            )
        return cls(
            phase=phase,
            estimate=estimate,
            eta=2.0 ** (-phase / 2.0) / horizon,
            gamma=None,
            beta=2.0 ** (phase / 2.0),
        )


def doubling_controller(
    k: int,
    missing: int,
    state: DoublingState,
    horizon: int,
    schedule: DoublingSchedule = "bandit",
) -> tuple[bool, DoublingState]:
    """Advance the estimate by 1 + M^k; a new phase starts once it exceeds 2^e.

    ``missing`` is M^k after the deliveries of episode k, known online from
    arrivals alone.
    """
    if missing < 0 or missing > k:
        raise ContractViolation(f"missing count {missing} out of range at episode {k}")
    estimate = state.estimate + 1 + missing
    if estimate > 2**state.phase:
        return True, DoublingState.for_phase(state.phase + 1, horizon, estimate, schedule)
    return False, dataclasses.replace(state, estimate=estimate)


class DoublingLearner:
    """Restarts the wrapped learner with rescaled parameters whenever k + sum M doubles.

    Delays are not known in advance; skipping with the phase threshold beta_e
    is applied when ``skip`` is set.
    """

    def __init__(
        self,
        inner: Learner,
        horizon: int,
        *,
        skip: bool = True,
        schedule: DoublingSchedule = "bandit",
        feed_skipped_trajectories: bool = False,
    ) -> None:
        self.inner = inner
        self.horizon = horizon
        self.skip = skip
        self.schedule = schedule
        self.feed_skipped_trajectories = feed_skipped_trajectories
        self.state = DoublingState.for_phase(1, horizon, schedule=schedule)
        self.skipped = 0
        self.restarts: list[int] = []
        self._executed = 0
        self._observed = 0
        self.inner.restart(self.state.eta, self.state.gamma)

    @property
    def phase(self) -> int:
        return self.state.phase

    @property
    def policy(self) -> Policy:
        return self.inner.policy

    def begin_episode(self, k: int) -> Policy:
        return self.inner.begin_episode(k)

    def act(self, state: int, step: int, rng: np.random.Generator) -> int:
        return self.inner.act(state, step, rng)

    def end_episode(self, k: int, trajectory: Trajectory) -> None:
        self._executed += 1
        self.inner.end_episode(k, trajectory)

    def observe_trajectory(self, packet: FeedbackPacket) -> None:
        _forward_trajectory(self.inner, packet)

    def drop_feedback(self, packet: FeedbackPacket) -> None:
        _forward_drop(self.inner, packet)

    def on_feedback(self, k: int, packets: Sequence[FeedbackPacket]) -> None:
        self._observed += len(packets)
        kept = []
        for packet in packets:
            if not self.skip or skip_filter(packet, self.state.beta):
                kept.append(packet)
                continue
            self.skipped += 1
            _discard(self.inner, packet, self.feed_skipped_trajectories)
        self.inner.on_feedback(k, kept)

        restart, self.state = doubling_controller(k, self._executed - self._observed, self.state, self.horizon, self.schedule)
        if restart:
            self.restarts.append(k)
            logger.info(f"episode {k}: phase {self.state.phase} (estimate {self.state.estimate}, eta={self.state.eta:.4g})")
            self.inner.restart(self.state.eta, self.state.gamma)

    def restart(self, eta: float, gamma: float | None = None) -> None:
        self.inner.restart(eta, gamma)

    def state_dict(self) -> dict[str, Any]:
        return {
            "kind": "doubling",
            "phase": self.state.phase,
            "estimate": self.state.estimate,
            "beta": self.state.beta,
            "restarts": list(self.restarts),
            "skipped": self.skipped,
            "inner": self.inner.state_dict(),
        }


class RoundRobinReduction:
    """d_max + 1 non-delayed instances; episode k is played by instance k mod (d_max + 1).

    Each instance sees its own episodes numbered 1, 2, ... with zero delay.
    """

    def __init__(self, factory: Callable[[], Learner], d_max: int) -> None:
        if d_max < 0:
            raise ContractViolation("d_max must be nonnegative")
        self.d_max = d_max
        self.instances = [factory() for _ in range(d_max + 1)]
        self.played = [0] * (d_max + 1)
        self._owner: dict[int, tuple[int, int]] = {}
        self._outstanding: list[set[int]] = [set() for _ in range(d_max + 1)]
        self._current = 1 % (d_max + 1)

    def owner(self, k: int) -> int:
        return k % (self.d_max + 1)

    @property
    def policy(self) -> Policy:
        return self.instances[self._current].policy

    def begin_episode(self, k: int) -> Policy:
        index = self.owner(k)
        if self._outstanding[index]:
            raise ContractViolation(
                f"instance {index} reused at episode {k} with feedback of {sorted(self._outstanding[index])} outstanding"
            )
        self._current = index
        self.played[index] += 1
        local = self.played[index]
        self._owner[k] = (index, local)
        return self.instances[index].begin_episode(local)

    def act(self, state: int, step: int, rng: np.random.Generator) -> int:
        return self.instances[self._current].act(state, step, rng)

    def end_episode(self, k: int, trajectory: Trajectory) -> None:
        index, local = self._owner[k]
        self._outstanding[index].add(k)
        self.instances[index].end_episode(local, trajectory)

    def on_feedback(self, k: int, packets: Sequence[FeedbackPacket]) -> None:
        for packet in packets:
            if packet.episode not in self._owner or packet.episode not in self._outstanding[self._owner[packet.episode][0]]:
                raise ContractViolation(f"feedback of episode {packet.episode} does not match a completed episode")
            index, local = self._owner[packet.episode]
            self._outstanding[index].discard(packet.episode)
            self.instances[index].on_feedback(local, [dataclasses.replace(packet, episode=local, delay=0)])

    def restart(self, eta: float, gamma: float | None = None) -> None:
        for instance in self.instances:
            instance.restart(eta, gamma)

    def state_dict(self) -> dict[str, Any]:
        return {
            "kind": "round_robin",
            "d_max": self.d_max,
            "played": list(self.played),
            "instances": [instance.state_dict() for instance in self.instances],
        }


def blackbox_reduction(factory: Callable[[], Learner], d_max: int) -> RoundRobinReduction:
    return RoundRobinReduction(factory, d_max)
