"""Closed-loop synthetic users and their token event logs."""
from .runner import SessionRecord, TokenEventLog, run_load, write_log
from .workload import (
    PlannedRequest,
    PromptSource,
    WorkloadSpec,
    build_prompt,
    category_weights,
    plan_run,
    plan_user,
    sample_category,
    sample_input_length,
)

__all__ = [
    "PlannedRequest",
    "PromptSource",
    "SessionRecord",
    "TokenEventLog",
    "WorkloadSpec",
    "build_prompt",
    "category_weights",
    "plan_run",
    "plan_user",
    "run_load",
    "sample_category",
    "sample_input_length",
    "write_log",
]
