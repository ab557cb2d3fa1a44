"""Shared drivers for the engine property checks (unit tests and acceptance)."""
import numpy as np

from xrouter.simbackend import BatchEngine, ModelProfile


def random_profile(rng) -> ModelProfile:
    return ModelProfile(
        name="t",
        tp_degree=int(rng.integers(1, 9)),
        weights_gb=1.0,
        kv_cache_gb=1.0,
        max_batch=int(rng.integers(1, 6)),
        kv_tokens_per_gb=float(rng.integers(20, 400)),
        prefill_coef_ns_per_token=float(rng.integers(0, 2000)),
        prefill_base_ns=float(rng.integers(0, 10_000)),
        decode_base_ns=float(rng.integers(0, 10_000)),
        decode_batch_coef_ns=float(rng.integers(0, 1000)) + float(rng.random()),
        tp_comm_overhead_ns=float(rng.integers(0, 500)),
        eos_prob=float(rng.choice([1.0, 0.5, 0.2, 0.05])),
        max_output_tokens=int(rng.integers(1, 30)),
    )


def random_trace(rng, n_max=12):
    n = int(rng.integers(1, n_max + 1))
    slots = rng.integers(0, 60_000, size=4)
    trace = []
    for i in range(n):
        arrival = int(rng.choice(slots)) if rng.random() < 0.5 else int(rng.integers(0, 100_000))
        max_tokens = None if rng.random() < 0.3 else int(rng.integers(1, 40))
        trace.append((f"q{int(rng.integers(1_000_000))}-{i}", int(rng.integers(0, 60)), max_tokens, arrival))
    return trace


def drive_engine(profile: ModelProfile, seed: int, trace, engine_cls=BatchEngine):
    """Feed ``trace`` to a BatchEngine as a server would (each request handed
    over once the engine reaches its arrival time) and check the invariants
    after every step. Returns ``(events, violations)``."""
    eng = engine_cls(profile, seed=seed)
    pending = sorted(trace, key=lambda r: (r[3], r[0]))
    targets = {}
    events, bad = [], []
    admitted_keys = []
    arrival = {r[0]: r[3] for r in trace}
    cap = eng.kv_capacity_tokens
    last_clock = 0
    while pending or eng.has_work:
        nb = eng.next_boundary()
        horizon = max(eng.clock_ns, pending[0][3]) if nb is None else nb
        while pending and pending[0][3] <= horizon:
            rid, n_in, max_tok, arr = pending.pop(0)
            q = eng.admit(rid, n_in, max_tok, arrival_ns=arr)
            targets[rid] = (q.input_tokens, q.target_output)
        now = eng.next_boundary()
        step = eng.step()
        events.extend(step)
        ended = [e for e in step if e.kind == "end"]
        toks = [e for e in step if e.kind == "tok"]
        for e in step:
            if e.kind == "admit":
                admitted_keys.append((arrival[e.request_id], e.request_id))
        if len(eng.running) > profile.max_batch or (toks and toks[0].batch_size > profile.max_batch):
            bad.append(("batch bound", now))
        used = sum(r.input_tokens + r.emitted for r in eng.running)
        if used != eng.kv_used_tokens:
            bad.append(("kv accounting", now))
        reserved = sum(r.input_tokens + r.target_output for r in eng.running)
        if reserved != eng.kv_reserved_tokens or reserved > cap or used > reserved:
            bad.append(("kv capacity", now))
        if eng.clock_ns < last_clock:
            bad.append(("clock went back", now))
        last_clock = eng.clock_ns
        # work conservation at the admission point of this step
        n_after = toks[0].batch_size if toks else 0
        res_after = eng.kv_reserved_tokens + sum(sum(targets[e.request_id]) for e in ended)
        if eng.queue and n_after < profile.max_batch:
            head = eng.queue[0]
            if head.arrival_ns <= now and res_after + head.input_tokens + head.target_output <= cap:
                bad.append(("idle slot while a fitting request waits", now))
    if admitted_keys != sorted(admitted_keys):
        bad.append(("admission not FIFO", None))
    if eng.kv_reserved_tokens != 0 or eng.kv_used_tokens != 0:
        bad.append(("kv not released", None))
    emitted = {}
    for e in events:
        if e.kind == "tok":
            emitted[e.request_id] = emitted.get(e.request_id, 0) + 1
    for e in events:
        if e.kind == "end" and emitted.get(e.request_id) != targets[e.request_id][1]:
            bad.append(("token count", e.request_id))
    return events, bad


def as_tuples(events):
    return [(e.kind, e.request_id, e.token_index, e.t_ns, e.batch_size, e.detail) for e in events]


def profile_dict(p: ModelProfile) -> dict:
    return p.to_dict()


def rng(seed):
    return np.random.default_rng(seed)
