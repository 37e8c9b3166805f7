from __future__ import annotations

from collections.abc import Sequence
from typing import Any, Protocol, runtime_checkable

import numpy as np

from delays.buffer import FeedbackPacket
from mdp.dynamics import draw_index
from mdp.model import Policy, Trajectory


@runtime_checkable
class Learner(Protocol):
    """The protocol the harness drives, once per episode k = 1..K.

    begin_episode -> act at every step -> end_episode -> on_feedback.
    """

    @property
    def policy(self) -> Policy:
        """Base policy pi^k, snapshotted into the episode's feedback packet."""
        ...

    def begin_episode(self, k: int) -> Policy:
        """Policy actually played in episode k (may mix in exploration)."""
        ...

    def act(self, state: int, step: int, rng: np.random.Generator) -> int:
        """Action at (step, state) under the policy returned by begin_episode."""
        ...

    def end_episode(self, k: int, trajectory: Trajectory) -> None: ...

    def on_feedback(self, k: int, packets: Sequence[FeedbackPacket]) -> None: ...

    def restart(self, eta: float, gamma: float | None = None) -> None: ...

    def state_dict(self) -> dict[str, Any]: ...


def sample_action(policy: Policy, state: int, step: int, rng: np.random.Generator) -> int:
    """One uniform per action, the same draw ``sample_episode`` makes."""
    return draw_index(policy.probs[step, state], rng.random())


class FixedPolicyLearner:
    """Plays one policy forever and ignores feedback (used for the hindsight self-check)."""

    def __init__(self, policy: Policy) -> None:
        self._policy = policy

    @property
    def policy(self) -> Policy:
        return self._policy

    def begin_episode(self, k: int) -> Policy:
        return self._policy

    def act(self, state: int, step: int, rng: np.random.Generator) -> int:
        return sample_action(self._policy, state, step, rng)

    def end_episode(self, k: int, trajectory: Trajectory) -> None:
        pass

    def on_feedback(self, k: int, packets: Sequence[FeedbackPacket]) -> None:
        pass

    def restart(self, eta: float, gamma: float | None = None) -> None:
        pass

    def state_dict(self) -> dict[str, Any]:
        return {"kind": "fixed"}
