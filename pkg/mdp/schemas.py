from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, model_validator

from mdp.model import CostSequence, TabularMdp


class MdpDocument(BaseModel):
    """JSON form of a TabularMdp: dims plus a row-major (H, S, A, S) array."""

    num_states: int = Field(ge=1, description="S")
    num_actions: int = Field(ge=1, description="A")
    horizon: int = Field(ge=1, description="H")
    initial_state: int = Field(default=0, ge=0, description="Fixed initial state")
    transitions: list[float] = Field(description="Row-major p[h][s][a][s'] flattened")

    @model_validator(mode="after")
    def _check_length(self) -> MdpDocument:
        expected = self.horizon * self.num_states * self.num_actions * self.num_states
        if len(self.transitions) != expected:
            raise ValueError(f"expected {expected} transition entries, got {len(self.transitions)}")
        return self

    @classmethod
    def from_mdp(cls, mdp: TabularMdp) -> MdpDocument:
        return cls(
            num_states=mdp.num_states,
            num_actions=mdp.num_actions,
            horizon=mdp.horizon,
            initial_state=mdp.initial_state,
            transitions=mdp.transitions.ravel().tolist(),
        )

    def to_mdp(self) -> TabularMdp:
        shape = (self.horizon, self.num_states, self.num_actions, self.num_states)
        return TabularMdp(np.asarray(self.transitions).reshape(shape), initial_state=self.initial_state)


class CostSequenceDocument(BaseModel):
    """JSON form of a CostSequence: dims plus a row-major (K, H, S, A) array."""

    num_episodes: int = Field(ge=1, description="K")
    horizon: int = Field(ge=1)
    num_states: int = Field(ge=1)
    num_actions: int = Field(ge=1)
    costs: list[float] = Field(description="Row-major c[k][h][s][a] flattened")

    @model_validator(mode="after")
    def _check_length(self) -> CostSequenceDocument:
        expected = self.num_episodes * self.horizon * self.num_states * self.num_actions
        if len(self.costs) != expected:
            raise ValueError(f"expected {expected} cost entries, got {len(self.costs)}")
        return self

    @classmethod
    def from_costs(cls, costs: CostSequence) -> CostSequenceDocument:
        K, H, S, A = costs.tables.shape
        return cls(num_episodes=K, horizon=H, num_states=S, num_actions=A, costs=costs.tables.ravel().tolist())

    def to_costs(self) -> CostSequence:
        shape = (self.num_episodes, self.horizon, self.num_states, self.num_actions)
        return CostSequence(np.asarray(self.costs).reshape(shape))


def save_mdp(mdp: TabularMdp, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(MdpDocument.from_mdp(mdp).model_dump_json(), encoding="utf-8")
    return path


def load_mdp(path: str | Path) -> TabularMdp:
    return MdpDocument(**json.loads(Path(path).read_text(encoding="utf-8"))).to_mdp()


def save_cost_sequence(costs: CostSequence, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(CostSequenceDocument.from_costs(costs).model_dump_json(), encoding="utf-8")
    return path


def load_cost_sequence(path: str | Path) -> CostSequence:
    return CostSequenceDocument(**json.loads(Path(path).read_text(encoding="utf-8"))).to_costs()
