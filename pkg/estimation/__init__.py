"""Empirical transition models, confidence sets and cost estimators."""

from .confidence import (
    ConfidenceSet,
    TransitionCounts,
    confidence_radius,
    contains_truth,
    exploration_balanced,
    l1_within_radius,
    log_term,
    update_empirical,
)
from .costs import EstimatedCost, estimate_costs, estimator_excess, estimator_excess_bound, is_cost_estimator
from .optimism import optimistic_transition, upper_occupancy

__all__ = [
    "ConfidenceSet",
    "EstimatedCost",
    "TransitionCounts",
    "confidence_radius",
    "contains_truth",
    "estimate_costs",
    "estimator_excess",
    "estimator_excess_bound",
    "exploration_balanced",
    "is_cost_estimator",
    "l1_within_radius",
    "log_term",
    "optimistic_transition",
    "update_empirical",
    "upper_occupancy",
]
