"""Delayed-feedback learners and the combinators that wrap them."""

from .base import FixedPolicyLearner, Learner, sample_action
from .oppo import DelayedOppo, OppoConfig, evaluate_policy_optimistic, improve_policy, policy_from_scores, tuned_parameters
from .oreps import DelayedOreps, OrepsState, oreps_on_feedback
from .projection import OccupancyPolytope, bregman_divergence, kl_project_known_p, policy_from_occupancy, unconstrained_update
from .wrappers import (
    DoublingLearner,
    DoublingState,
    RoundRobinReduction,
    SkipConfig,
    SkippingLearner,
    blackbox_reduction,
    default_skip_threshold,
    doubling_controller,
    skip_filter,
)

__all__ = [
    "DelayedOppo",
    "DelayedOreps",
    "DoublingLearner",
    "DoublingState",
    "FixedPolicyLearner",
    "Learner",
    "OccupancyPolytope",
    "OppoConfig",
    "OrepsState",
    "RoundRobinReduction",
    "SkipConfig",
    "SkippingLearner",
    "blackbox_reduction",
    "bregman_divergence",
    "default_skip_threshold",
    "doubling_controller",
    "evaluate_policy_optimistic",
    "improve_policy",
    "kl_project_known_p",
    "oreps_on_feedback",
    "policy_from_occupancy",
    "policy_from_scores",
    "sample_action",
    "skip_filter",
    "tuned_parameters",
    "unconstrained_update",
]
