"""Simulated inference backends: latency model, batching engine and server."""
from .coordinator import Coordinator
from .engine import ActiveRequest, BatchEngine, Event
from .profile import (
    ModelProfile,
    builtin_profile_path,
    draw_output_length,
    iteration_time,
    load_profile,
    prefill_time,
    request_rng,
    sample_output_length,
)
from .server import BackendServer, serve
from .simulate import SimRecord, SimRequest, makespan, simulate_closed_loop

__all__ = [
    "ActiveRequest",
    "BackendServer",
    "BatchEngine",
    "Coordinator",
    "Event",
    "ModelProfile",
    "SimRecord",
    "SimRequest",
    "builtin_profile_path",
    "draw_output_length",
    "iteration_time",
    "load_profile",
    "makespan",
    "prefill_time",
    "request_rng",
    "sample_output_length",
    "serve",
    "simulate_closed_loop",
]
