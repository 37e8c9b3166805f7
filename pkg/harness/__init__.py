"""Experiment generation, execution and reporting."""

from .costs import generate_costs
from .report import emit_report, load_report
from .runner import build_learner, run_experiment
from .schemas import ExperimentConfig, RegretRecord, RegretRow, SweepCell, SweepConfig, SweepRow
from .sweep import sweep

__all__ = [
    "ExperimentConfig",
    "RegretRecord",
    "RegretRow",
    "SweepCell",
    "SweepConfig",
    "SweepRow",
    "build_learner",
    "emit_report",
    "generate_costs",
    "load_report",
    "run_experiment",
    "sweep",
]
