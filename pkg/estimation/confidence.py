from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mdp.errors import ContractViolation
from mdp.model import TabularMdp, Trajectory


def log_term(horizon: int, num_states: int, num_actions: int, num_episodes: int, delta: float, *, union_split: bool = False) -> float:
    """L = ln(HSAK / (4 delta)); ``union_split`` uses delta / 9 instead."""
    if not 0.0 < delta < 1.0:
        raise ContractViolation("delta must lie in (0, 1)")
    if union_split:
        delta = delta / 9.0
    return math.log(horizon * num_states * num_actions * num_episodes / (4.0 * delta))


def update_empirical(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Empirical kernel and visit counts from (h, s, a, s') transition counts.

    Rows never observed default to uniform.
    """
    counts = np.asarray(counts, dtype=float)
    n = counts.sum(axis=-1)
    S = counts.shape[-1]
    safe = np.where(n > 0, n, 1.0)
    p_bar = np.where(n[..., None] > 0, counts / safe[..., None], 1.0 / S)
    return p_bar, n.astype(np.int64)


def confidence_radius(p_bar_entry: np.ndarray | float, n: np.ndarray | int, log_l: float) -> np.ndarray | float:
    """eps = 4 sqrt(p(1-p) L / (n v 1)) + 10 L / (n v 1), unclipped."""
    p = np.asarray(p_bar_entry, dtype=float)
    denom = np.maximum(np.asarray(n, dtype=float), 1.0)
    eps = 4.0 * np.sqrt(p * (1.0 - p) * log_l / denom) + 10.0 * log_l / denom
    return float(eps) if eps.ndim == 0 else eps


@dataclass(frozen=True, eq=False)
class ConfidenceSet:
    """Per-(h, s, a) box of kernels around the empirical rows."""

    p_bar: np.ndarray
    n: np.ndarray
    epsilon: np.ndarray
    log_l: float

    @classmethod
    def from_counts(cls, counts: np.ndarray, log_l: float) -> ConfidenceSet:
        p_bar, n = update_empirical(counts)
        eps = confidence_radius(p_bar, n[..., None], log_l)
        for arr in (p_bar, n, eps):
            arr.setflags(write=False)
        return cls(p_bar=p_bar, n=n, epsilon=eps, log_l=log_l)

    @classmethod
    def exact(cls, mdp: TabularMdp) -> ConfidenceSet:
        """Degenerate set {p}; used where the dynamics are known."""
        zeros = np.zeros_like(mdp.transitions)
        return cls(p_bar=mdp.transitions, n=np.zeros(mdp.shape, dtype=np.int64), epsilon=zeros, log_l=0.0)

    @property
    def lower(self) -> np.ndarray:
        return np.maximum(0.0, self.p_bar - self.epsilon)

    @property
    def upper(self) -> np.ndarray:
        return np.minimum(1.0, self.p_bar + self.epsilon)


class TransitionCounts:
    """Running (h, s, a, s') observation counts owned by one learner."""

    def __init__(self, horizon: int, num_states: int, num_actions: int, log_l: float) -> None:
        self.counts = np.zeros((horizon, num_states, num_actions, num_states), dtype=np.int64)
        self.log_l = log_l
        self._cached: ConfidenceSet | None = None

    def observe(self, trajectory: Trajectory) -> None:
        H = trajectory.horizon
        np.add.at(self.counts, (np.arange(H), trajectory.states, trajectory.actions, trajectory.next_states()), 1)
        self._cached = None

    def state_counts(self) -> np.ndarray:
        """n_h(s) = sum_a n_h(s, a)."""
        return self.counts.sum(axis=(2, 3))

    def confidence_set(self) -> ConfidenceSet:
        if self._cached is None:
            self._cached = ConfidenceSet.from_counts(self.counts, self.log_l)
        return self._cached

    def reset(self) -> None:
        self.counts[:] = 0
        self._cached = None


def contains_truth(confidence_set: ConfidenceSet, p: TabularMdp | np.ndarray) -> bool:
    """True iff |p - p_bar| <= eps entrywise."""
    kernel = p.transitions if isinstance(p, TabularMdp) else np.asarray(p, dtype=float)
    if kernel.shape != confidence_set.p_bar.shape:
        raise ContractViolation(f"kernel {kernel.shape} does not match confidence set {confidence_set.p_bar.shape}")
    return bool(np.all(np.abs(kernel - confidence_set.p_bar) <= confidence_set.epsilon))


def l1_within_radius(confidence_set: ConfidenceSet, p: TabularMdp, delta: float, num_episodes: int) -> bool:
    """||p - p_bar||_1 <= sqrt(14 S ln(HSAK / delta) / (n v 1)) for every row.

    Diagnostic only; no learner uses the L1 ball.
    """
    H, S, A = p.shape
    bound = np.sqrt(14.0 * S * math.log(H * S * A * num_episodes / delta) / np.maximum(confidence_set.n, 1))
    gap = np.abs(p.transitions - confidence_set.p_bar).sum(axis=-1)
    return bool(np.all(gap <= bound))


def exploration_balanced(visits: np.ndarray, d_max: int, delta: float) -> bool:
    """Once n_h(s) >= d_max log(HSA / delta), every action has n_h(s, a) > d_max / (2A).

    ``visits`` is the observed (H, S, A) visit table.
    """
    H, S, A = visits.shape
    threshold = d_max * math.log(H * S * A / delta)
    seasoned = visits.sum(axis=-1) >= threshold
    starved = (visits <= d_max / (2.0 * A)).any(axis=-1)
    return not bool(np.any(seasoned & starved))
