"""Metrics over token event logs, run summaries and charts."""
from .metrics import (
    WindowedThroughput,
    mean_std,
    percentile,
    quantiles,
    response_time,
    tpot,
    ttft,
    user_throughput,
    windowed_throughput,
)
from .summarize import LoggedSession, load_run, read_events, summarize, summarize_sessions, write_report

__all__ = [
    "LoggedSession",
    "WindowedThroughput",
    "load_run",
    "mean_std",
    "percentile",
    "quantiles",
    "read_events",
    "response_time",
    "summarize",
    "summarize_sessions",
    "tpot",
    "ttft",
    "user_throughput",
    "windowed_throughput",
    "write_report",
]
