"""Delay schedules, feedback arrival sets and visit counters."""

from .buffer import FeedbackBuffer, FeedbackMode, FeedbackPacket, visit_table
from .schedule import DelaySchedule, ScheduleKind, arrivals, make_schedule, missing_count, missing_counts

__all__ = [
    "DelaySchedule",
    "FeedbackBuffer",
    "FeedbackMode",
    "FeedbackPacket",
    "ScheduleKind",
    "arrivals",
    "make_schedule",
    "missing_count",
    "missing_counts",
    "visit_table",
]
