from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional, TypeVar

from pydantic import BaseModel, Field, ValidationError, model_validator

from mdp.errors import ConfigError

TModel = TypeVar("TModel", bound=BaseModel)

LearnerKind = Literal["oppo", "oreps", "blackbox", "hindsight"]
WrapperKind = Literal["skip", "doubling"]
CostKind = Literal["iid_stochastic", "piecewise_switching", "sinusoidal_drift", "fixed_file"]
DelayKind = Literal["fixed", "uniform_random", "one_missing", "adversarial_list", "geometric"]

REPORT_COLUMNS = ("k", "value", "cum_value", "hindsight", "regret", "missing", "skipped", "phase")


class MdpSpec(BaseModel):
    """Where the MDP comes from: generated from the run seed, or a JSON file."""

    kind: Literal["random", "chain", "file"] = Field(default="random")
    num_states: int = Field(default=4, ge=1, description="S")
    num_actions: int = Field(default=3, ge=1, description="A")
    horizon: int = Field(default=3, ge=1, description="H")
    concentration: float = Field(default=1.0, gt=0, description="Dirichlet concentration of random rows")
    support: Optional[int] = Field(default=None, ge=1, description="Next states per row of a sparse random MDP")
    path: Optional[str] = Field(default=None, description="MdpDocument JSON for kind=file")

    @model_validator(mode="after")
    def _check_source(self) -> MdpSpec:
        if self.kind == "file" and not self.path:
            raise ValueError("mdp kind 'file' needs a path")
        return self


class CostSpec(BaseModel):
    kind: CostKind = Field(default="iid_stochastic")
    params: dict[str, Any] = Field(default_factory=dict)


class DelaySpec(BaseModel):
    kind: DelayKind = Field(default="fixed")
    params: dict[str, Any] = Field(default_factory=dict)

    @property
    def label(self) -> str:
        if not self.params:
            return self.kind
        inner = ",".join(f"{key}={value}" for key, value in sorted(self.params.items()) if key != "delays")
        return f"{self.kind}({inner})" if inner else self.kind


class LearnerSpec(BaseModel):
    """Learner kind, regime flags, wrapper stack and parameter overrides."""

    kind: LearnerKind = Field(default="oppo")
    base: Literal["oppo", "oreps"] = Field(default="oppo", description="Instance kind of the blackbox reduction")
    feedback_mode: Literal["full_info", "bandit"] = Field(default="full_info")
    dynamics_mode: Literal["known", "unknown"] = Field(default="known")
    trajectory_delayed: bool = Field(default=True)
    use_explicit_exploration: bool = Field(default=False)
    union_split: bool = Field(default=False)
    wrappers: list[WrapperKind] = Field(default_factory=list, description="Applied inside out")
    feed_skipped_trajectories: Optional[bool] = Field(
        default=None,
        description="Default: on when trajectories are not delayed",
    )
    eta: Optional[float] = Field(default=None, gt=0)
    gamma: Optional[float] = Field(default=None, gt=0)
    delta: float = Field(default=0.1, gt=0, lt=1)
    beta: Optional[float] = Field(default=None, gt=0)
    name: Optional[str] = Field(default=None, description="Label in reports")

    @model_validator(mode="after")
    def _check_regime(self) -> LearnerSpec:
        uses_oreps = self.kind == "oreps" or (self.kind == "blackbox" and self.base == "oreps")
        if uses_oreps and (self.dynamics_mode != "known" or self.feedback_mode != "full_info"):
            raise ValueError("oreps needs known dynamics and full-information feedback")
        if self.kind in {"hindsight", "blackbox"} and self.wrappers:
            raise ValueError(f"learner kind '{self.kind}' takes no wrappers")
        if len(set(self.wrappers)) != len(self.wrappers):
            raise ValueError("wrappers must not repeat")
        if self.use_explicit_exploration and self.dynamics_mode == "known":
            raise ValueError("explicit exploration only applies to unknown dynamics")
        return self

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        parts = [self.kind if self.kind != "blackbox" else f"blackbox-{self.base}"]
        if self.kind != "hindsight":
            parts.append(self.feedback_mode)
            parts.append(f"{self.dynamics_mode}-p")
        parts.extend(self.wrappers)
        return "/".join(parts)


class ExperimentConfig(BaseModel):
    """One experiment: environment, adversary, delays, learner, K and seeds."""

    name: str = Field(default="experiment")
    mdp: MdpSpec = Field(default_factory=MdpSpec)
    costs: CostSpec = Field(default_factory=CostSpec)
    delays: DelaySpec = Field(default_factory=DelaySpec)
    learner: LearnerSpec = Field(default_factory=LearnerSpec)
    num_episodes: int = Field(default=1000, ge=1, description="K")
    seeds: list[int] = Field(default_factory=lambda: [0])
    checkpoints: Literal["log", "all"] = Field(default="log")
    num_checkpoints: int = Field(default=30, ge=1, description="Log-spaced prefix checkpoints, plus K")
    prefix_mode: Literal["full", "final"] = Field(
        default="full",
        description="full: prefix-optimal comparator per row; final: R_K only",
    )
    output_dir: Optional[str] = Field(default=None)

    @model_validator(mode="after")
    def _check_seeds(self) -> ExperimentConfig:
        if not self.seeds:
            raise ValueError("at least one seed is required")
        return self


class SweepConfig(BaseModel):
    """A grid over K, delay specs and learners around one base experiment."""

    base: ExperimentConfig
    num_episodes: list[int] = Field(default_factory=list)
    delays: list[DelaySpec] = Field(default_factory=list)
    learners: list[LearnerSpec] = Field(default_factory=list)
    seeds: list[int] = Field(default_factory=list)
    workers: Optional[int] = Field(default=None, ge=1)

    def grid(self) -> list[tuple[int, DelaySpec, LearnerSpec, int]]:
        ks = self.num_episodes or [self.base.num_episodes]
        delays = self.delays or [self.base.delays]
        learners = self.learners or [self.base.learner]
        seeds = self.seeds or self.base.seeds
        return [(k, d, learner, seed) for k in ks for d in delays for learner in learners for seed in seeds]


class RegretRow(BaseModel):
    k: int = Field(ge=1)
    value: float = Field(description="V^{k, pi^k}_1 of the played policy")
    cum_value: float
    hindsight: float = Field(description="Best fixed policy value over episodes 1..k")
    regret: float
    missing: int = Field(ge=0, description="M^k")
    skipped: int = Field(default=0, ge=0)
    phase: int = Field(default=1, ge=1)


class RegretRecord(BaseModel):
    """Regret of one (config, seed) run at its checkpoints, with provenance."""

    config: ExperimentConfig
    seed: int
    learner: str
    rows: list[RegretRow]
    total_delay: int = Field(ge=0)
    max_delay: int = Field(ge=0)
    suffered_total: float = Field(description="Sum of sampled suffered costs, for reference only")
    learner_state: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_columns(self) -> RegretRecord:
        if not self.rows:
            raise ValueError("a record needs at least one row")
        tol = 1e-9
        for prev, row in zip(self.rows, self.rows[1:]):
            if row.k <= prev.k:
                raise ValueError("rows must be ordered by k")
            if row.cum_value < prev.cum_value - tol or row.hindsight < prev.hindsight - tol:
                raise ValueError("cumulative columns must be monotone")
        for row in self.rows:
            if abs(row.regret - (row.cum_value - row.hindsight)) > tol * max(1.0, abs(row.cum_value)):
                raise ValueError(f"regret at k={row.k} disagrees with its components")
        return self

    @property
    def final_regret(self) -> float:
        return self.rows[-1].regret


class SweepCell(BaseModel):
    label: str
    num_episodes: int
    delay: str
    learner: str
    seed: int
    final_regret: Optional[float] = None
    total_delay: Optional[int] = None
    is_error: bool = False
    error_detail: Optional[str] = None


class SweepRow(BaseModel):
    num_episodes: int
    delay: str
    learner: str
    n_seeds: int = Field(description="Cells that finished without error")
    n_errors: int = 0
    mean_final_regret: Optional[float] = None
    stderr_final_regret: Optional[float] = None


def parse_model(data: dict[str, Any], model: type[TModel]) -> TModel:
    """Validate a decoded JSON object, raising ConfigError on failure."""
    # Drop explicit nulls so model defaults can apply.
    data = {key: value for key, value in data.items() if value is not None}
    try:
        return model(**data)
    except ValidationError as exc:
        raise ConfigError(f"invalid {model.__name__}: {exc}") from exc


def load_json_model(path: str | Path, model: type[TModel]) -> TModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return parse_model(data, model)


def load_config(path: str | Path) -> ExperimentConfig:
    return load_json_model(path, ExperimentConfig)


def load_sweep_config(path: str | Path) -> SweepConfig:
    return load_json_model(path, SweepConfig)
