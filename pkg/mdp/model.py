from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mdp.errors import ContractViolation

ROW_TOL = 1e-12
FLOW_TOL = 1e-9


def _frozen(array: np.ndarray, dtype=float) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _check_rows(probs: np.ndarray, what: str) -> None:
    if np.any(probs < 0.0) or np.any(probs > 1.0):
        raise ContractViolation(f"{what} has entries outside [0, 1]")
    if not np.all(np.isfinite(probs)):
        raise ContractViolation(f"{what} has non-finite entries")
    worst = float(np.max(np.abs(probs.sum(axis=-1) - 1.0))) if probs.size else 0.0
    if worst > ROW_TOL:
        raise ContractViolation(f"{what} rows do not sum to 1 (max deviation {worst:.3e})")


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Finite-horizon tabular MDP with a fixed initial state.

    ``transitions[h, s, a]`` is the distribution of the next state after
    taking ``a`` in ``s`` at (0-based) step ``h``.
    """

    transitions: np.ndarray
    initial_state: int = 0

    def __post_init__(self) -> None:
        p = _frozen(self.transitions)
        if p.ndim != 4 or p.shape[1] != p.shape[3]:
            raise ContractViolation(f"transitions must have shape (H, S, A, S), got {p.shape}")
        if min(p.shape) < 1:
            raise ContractViolation("S, A and H must be positive")
        _check_rows(p, "transition kernel")
        if not 0 <= self.initial_state < p.shape[1]:
            raise ContractViolation(f"initial_state {self.initial_state} outside [0, {p.shape[1]})")
        object.__setattr__(self, "transitions", p)

    @property
    def horizon(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        """(H, S, A)."""
        return self.horizon, self.num_states, self.num_actions

    @classmethod
    def random(
        cls,
        num_states: int,
        num_actions: int,
        horizon: int,
        rng: np.random.Generator,
        *,
        concentration: float = 1.0,
        support: int | None = None,
        initial_state: int = 0,
    ) -> TabularMdp:
        """Draw every transition row from a symmetric Dirichlet.

        With ``support`` set, each row is restricted to that many randomly
        chosen next states.
        """
        shape = (horizon, num_states, num_actions)
        rows = rng.dirichlet(np.full(num_states, concentration), size=shape)
        if support is not None and support < num_states:
            mask = np.zeros_like(rows, dtype=bool)
            for idx in np.ndindex(*shape):
                mask[idx][rng.choice(num_states, size=support, replace=False)] = True
            rows = np.where(mask, rows, 0.0)
        rows = rows / rows.sum(axis=-1, keepdims=True)
        return cls(transitions=rows, initial_state=initial_state)

    @classmethod
    def chain(cls, num_states: int, num_actions: int, horizon: int) -> TabularMdp:
        """Deterministic chain: action 0 moves right (capped), others stay put."""
        p = np.zeros((horizon, num_states, num_actions, num_states))
        for s in range(num_states):
            p[:, s, 0, min(s + 1, num_states - 1)] = 1.0
            p[:, s, 1:, s] = 1.0
        return cls(transitions=p)


@dataclass(frozen=True, eq=False)
class CostFunction:
    """Per-episode cost table c_h(s, a) in [0, 1], shape (H, S, A)."""

    costs: np.ndarray

    def __post_init__(self) -> None:
        c = _frozen(self.costs)
        if c.ndim != 3:
            raise ContractViolation(f"cost table must have shape (H, S, A), got {c.shape}")
        if np.any(c < 0.0) or np.any(c > 1.0) or not np.all(np.isfinite(c)):
            raise ContractViolation("costs must lie in [0, 1]")
        object.__setattr__(self, "costs", c)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.costs.shape


@dataclass(frozen=True, eq=False)
class CostSequence:
    """The adversary: K cost tables stacked as (K, H, S, A)."""

    tables: np.ndarray

    def __post_init__(self) -> None:
        c = _frozen(self.tables)
        if c.ndim != 4 or c.shape[0] < 1:
            raise ContractViolation(f"cost sequence must have shape (K, H, S, A), got {c.shape}")
        if np.any(c < 0.0) or np.any(c > 1.0) or not np.all(np.isfinite(c)):
            raise ContractViolation("costs must lie in [0, 1]")
        object.__setattr__(self, "tables", c)

    @property
    def num_episodes(self) -> int:
        return self.tables.shape[0]

    def __len__(self) -> int:
        return self.num_episodes

    def episode(self, k: int) -> CostFunction:
        """Cost function of 1-based episode ``k``."""
        if not 1 <= k <= self.num_episodes:
            raise ContractViolation(f"episode {k} outside [1, {self.num_episodes}]")
        return CostFunction(self.tables[k - 1])

    def total(self) -> np.ndarray:
        return self.tables.sum(axis=0)


@dataclass(frozen=True, eq=False)
class Policy:
    """Time-inhomogeneous stochastic policy, ``probs[h, s, a]``."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        pi = _frozen(self.probs)
        if pi.ndim != 3:
            raise ContractViolation(f"policy must have shape (H, S, A), got {pi.shape}")
        _check_rows(pi, "policy")
        object.__setattr__(self, "probs", pi)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.probs.shape

    @classmethod
    def uniform(cls, horizon: int, num_states: int, num_actions: int) -> Policy:
        return cls(np.full((horizon, num_states, num_actions), 1.0 / num_actions))

    @classmethod
    def deterministic(cls, actions: np.ndarray, num_actions: int) -> Policy:
        """Point-mass policy from an (H, S) table of action indices."""
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros(actions.shape + (num_actions,))
        np.put_along_axis(probs, actions[..., None], 1.0, axis=-1)
        return cls(probs)

    def is_deterministic(self) -> bool:
        return bool(np.all((self.probs == 0.0) | (self.probs == 1.0)))


@dataclass(frozen=True, eq=False)
class ValueTables:
    """V has H+1 layers with V[H] == 0; Q has H layers."""

    V: np.ndarray
    Q: np.ndarray

    def initial_value(self, state: int) -> float:
        return float(self.V[0, state])


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    suffered_costs: np.ndarray
    final_state: int

    def __post_init__(self) -> None:
        states = _frozen(self.states, dtype=np.int64)
        actions = _frozen(self.actions, dtype=np.int64)
        suffered = _frozen(self.suffered_costs)
        if states.ndim != 1 or states.size == 0:
            raise ContractViolation(f"states must be a non-empty 1-d array, got shape {states.shape}")
        if actions.shape != states.shape or suffered.shape != states.shape:
            raise ContractViolation(
                f"states {states.shape}, actions {actions.shape} and costs {suffered.shape} must all have length H"
            )
        if np.any(states < 0) or np.any(actions < 0) or self.final_state < 0:
            raise ContractViolation("state and action indices must be nonnegative")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "suffered_costs", suffered)
        object.__setattr__(self, "final_state", int(self.final_state))

    def check_against(self, mdp: TabularMdp) -> None:
        """Raise unless this is an episode of ``mdp``: H steps from the initial state."""
        H, S, A = mdp.shape
        if self.horizon != H:
            raise ContractViolation(f"trajectory has {self.horizon} steps, MDP horizon is {H}")
        if self.states[0] != mdp.initial_state:
            raise ContractViolation(f"trajectory starts in {self.states[0]}, not in {mdp.initial_state}")
        if self.states.max() >= S or self.final_state >= S or self.actions.max() >= A:
            raise ContractViolation("trajectory indices exceed the MDP dimensions")

    @property
    def horizon(self) -> int:
        return len(self.states)

    def steps(self) -> list[tuple[int, int]]:
        return [(int(s), int(a)) for s, a in zip(self.states, self.actions)]

    def next_states(self) -> np.ndarray:
        """s_{h+1} for every step h, the last one being the final state."""
        return np.append(self.states[1:], self.final_state)


@dataclass(frozen=True, eq=False)
class OccupancyMeasure:
    """q_h(s, a, s') = Pr[s_h = s, a_h = a, s_{h+1} = s']."""

    q: np.ndarray
    _state_action: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        q = _frozen(self.q)
        if q.ndim != 4:
            raise ContractViolation(f"occupancy measure must have shape (H, S, A, S), got {q.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "_state_action", q.sum(axis=-1))

    def state_action(self) -> np.ndarray:
        return self._state_action

    def state(self) -> np.ndarray:
        """q_h(s), shape (H, S)."""
        return self._state_action.sum(axis=-1)

    def dot(self, cost: np.ndarray) -> float:
        """<q, c> for a cost over (h, s, a) or (h, s, a, s')."""
        cost = np.asarray(cost, dtype=float)
        if cost.ndim == 3:
            return float(np.sum(self._state_action * cost))
        return float(np.sum(self.q * cost))

    def induced_transitions(self, floor: float = ROW_TOL) -> tuple[np.ndarray, np.ndarray]:
        """p^q and the mask of (h, s, a) whose marginal exceeds ``floor``."""
        mass = self._state_action
        mask = mass > floor
        safe = np.where(mask, mass, 1.0)
        return self.q / safe[..., None], mask

    def residuals(self, mdp: TabularMdp) -> dict[str, float]:
        """Worst violation of each defining constraint of the polytope."""
        q = self.q
        init = np.zeros(mdp.num_states)
        init[mdp.initial_state] = 1.0
        layer = float(np.max(np.abs(q.sum(axis=(1, 2, 3)) - 1.0)))
        start = float(np.max(np.abs(q[0].sum(axis=(1, 2)) - init)))
        inflow = q[:-1].sum(axis=(1, 2))
        outflow = q[1:].sum(axis=(2, 3))
        flow = float(np.max(np.abs(inflow - outflow))) if len(q) > 1 else 0.0
        induced, mask = self.induced_transitions()
        gap = np.abs(induced - mdp.transitions).max(axis=-1)
        kernel = float(np.max(np.where(mask, gap, 0.0)))
        return {"layer_sum": layer, "initial": start, "flow": flow, "kernel": kernel}

    def is_feasible(self, mdp: TabularMdp, tol: float = FLOW_TOL) -> bool:
        return max(self.residuals(mdp).values()) <= tol and bool(np.all(self.q >= 0.0))
