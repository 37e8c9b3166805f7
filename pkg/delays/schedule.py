from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Literal

import numpy as np

from mdp.errors import ContractViolation

ScheduleKind = Literal["fixed", "uniform_random", "one_missing", "adversarial_list", "geometric"]


@dataclass(frozen=True, eq=False)
class DelaySchedule:
    """Oblivious delays d^1..d^K; feedback of episode j arrives at the end of j + d^j."""

    delays: tuple[int, ...]

    def __post_init__(self) -> None:
        delays = tuple(int(d) for d in self.delays)
        if not delays:
            raise ContractViolation("a delay schedule needs at least one episode")
        if any(d < 0 for d in delays):
            raise ContractViolation("delays must be nonnegative integers")
        object.__setattr__(self, "delays", delays)

    @property
    def num_episodes(self) -> int:
        return len(self.delays)

    @property
    def total(self) -> int:
        """D = sum of delays."""
        return sum(self.delays)

    @property
    def max_delay(self) -> int:
        return max(self.delays)

    def delay(self, j: int) -> int:
        return self.delays[j - 1]

    @cached_property
    def _arrival_index(self) -> dict[int, tuple[int, ...]]:
        index: dict[int, list[int]] = defaultdict(list)
        for j, d in enumerate(self.delays, start=1):
            if j + d <= self.num_episodes:
                index[j + d].append(j)
        return {k: tuple(js) for k, js in index.items()}

    def to_json(self) -> str:
        return json.dumps(list(self.delays))

    @classmethod
    def from_json(cls, text: str) -> DelaySchedule:
        return cls(tuple(json.loads(text)))


def make_schedule(
    kind: ScheduleKind,
    params: dict[str, Any] | None,
    num_episodes: int,
    rng: np.random.Generator | None = None,
) -> DelaySchedule:
    """Build a schedule of ``num_episodes`` delays.

    - fixed: every d^k = params["d"]
    - uniform_random: d^k ~ Uniform{0..params["d_hi"]}
    - one_missing: d^1 = K, all others 0 (the first episode never arrives)
    - adversarial_list: params["delays"] verbatim
    - geometric: d^k ~ Geometric(params["p"]) - 1, capped at params.get("d_cap")
    """
    params = params or {}
    K = int(num_episodes)
    if K < 1:
        raise ContractViolation("num_episodes must be >= 1")

    if kind == "fixed":
        d = int(params.get("d", 0))
        if d < 0:
            raise ContractViolation("fixed delay must be >= 0")
        return DelaySchedule((d,) * K)

    if kind == "one_missing":
        return DelaySchedule((K,) + (0,) * (K - 1))

    if kind == "adversarial_list":
        delays = list(params.get("delays", []))
        if len(delays) != K:
            raise ContractViolation(f"adversarial_list needs {K} delays, got {len(delays)}")
        return DelaySchedule(tuple(delays))

    if rng is None:
        raise ContractViolation(f"schedule kind '{kind}' needs a seeded rng")

    if kind == "uniform_random":
        d_hi = int(params.get("d_hi", 0))
        if d_hi < 0:
            raise ContractViolation("d_hi must be >= 0")
        return DelaySchedule(tuple(rng.integers(0, d_hi + 1, size=K).tolist()))

    if kind == "geometric":
        p = float(params.get("p", 0.5))
        if not 0.0 < p <= 1.0:
            raise ContractViolation("geometric p must lie in (0, 1]")
        delays = rng.geometric(p, size=K) - 1
        cap = params.get("d_cap")
        if cap is not None:
            delays = np.minimum(delays, int(cap))
        return DelaySchedule(tuple(delays.tolist()))

    raise ContractViolation(f"unknown schedule kind: {kind}")


def arrivals(schedule: DelaySchedule, k: int) -> frozenset[int]:
    """F^k = {j : j + d^j = k}; feedback due after episode K is never delivered."""
    if not 1 <= k <= schedule.num_episodes:
        raise ContractViolation(f"episode {k} outside [1, {schedule.num_episodes}]")
    return frozenset(schedule._arrival_index.get(k, ()))


def missing_count(schedule: DelaySchedule, k: int) -> int:
    """M^k = |{j <= k : j + d^j > k}|, the episodes still waiting at the end of k."""
    if not 0 <= k <= schedule.num_episodes:
        raise ContractViolation(f"episode {k} outside [0, {schedule.num_episodes}]")
    return sum(1 for j, d in enumerate(schedule.delays[:k], start=1) if j + d > k)


def missing_counts(schedule: DelaySchedule) -> np.ndarray:
    """M^1..M^K in one pass."""
    K = schedule.num_episodes
    arrived = np.zeros(K + 2, dtype=int)
    for j, d in enumerate(schedule.delays, start=1):
        if j + d <= K:
            arrived[j + d] += 1
    ks = np.arange(1, K + 1)
    return ks - np.cumsum(arrived[1 : K + 1])
