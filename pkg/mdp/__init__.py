"""Tabular MDPs, exact dynamic programming and the best-in-hindsight oracle."""

from .dynamics import (
    best_policy_in_hindsight,
    best_response,
    draw_index,
    empirical_regret,
    initial_value,
    occupancy_measure,
    policy_value,
    prefix_hindsight_values,
    q_backup,
    rollout,
    sample_episode,
    v_from_q,
)
from .errors import ConfigError, ContractViolation, LabError, ProjectionError
from .model import CostFunction, CostSequence, OccupancyMeasure, Policy, TabularMdp, Trajectory, ValueTables

__all__ = [
    "CostFunction",
    "CostSequence",
    "ConfigError",
    "ContractViolation",
    "LabError",
    "OccupancyMeasure",
    "Policy",
    "ProjectionError",
    "TabularMdp",
    "Trajectory",
    "ValueTables",
    "best_policy_in_hindsight",
    "best_response",
    "draw_index",
    "empirical_regret",
    "initial_value",
    "occupancy_measure",
    "policy_value",
    "prefix_hindsight_values",
    "q_backup",
    "rollout",
    "sample_episode",
    "v_from_q",
]
