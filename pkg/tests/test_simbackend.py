import asyncio
import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import as_tuples, drive_engine, random_profile, random_trace
from oracles import replay_engine
from xrouter.errors import DuplicateId, EmptyEngine
from xrouter.routecore import protocol
from xrouter.simbackend import (
    BackendServer,
    BatchEngine,
    Coordinator,
    ModelProfile,
    SimRequest,
    draw_output_length,
    iteration_time,
    load_profile,
    prefill_time,
    sample_output_length,
    simulate_closed_loop,
)


def prof(**kw):
    base = dict(name="t", tp_degree=1, weights_gb=1.0, kv_cache_gb=1.0, max_batch=4, kv_tokens_per_gb=10_000.0,
                prefill_coef_ns_per_token=1e6, prefill_base_ns=10e6, decode_base_ns=5e6,
                decode_batch_coef_ns=0.1e6, tp_comm_overhead_ns=0.0, eos_prob=0.01, max_output_tokens=1000)
    base.update(kw)
    return ModelProfile(**base)


# ------------------------------------------------------------------ profile
def test_prefill_time_examples():
    p = prof(tp_degree=4)
    assert prefill_time(p, 335) == 10e6 + 335e6 / 4 == 93.75e6
    assert prefill_time(p, 0) == p.prefill_base_ns
    p1, p8 = prof(prefill_base_ns=0.0), prof(prefill_base_ns=0.0, tp_degree=8)
    assert prefill_time(p1, 200) == 8 * prefill_time(p8, 200)


def test_iteration_time_examples():
    assert iteration_time(prof(), 10) == 6e6
    assert iteration_time(prof(tp_degree=8, tp_comm_overhead_ns=1e6), 10) == 13e6
    assert iteration_time(prof(), 10, 100) == 6e6 + 10e6 + 100e6
    with pytest.raises(ValueError):
        iteration_time(prof(), 0)


@pytest.mark.parametrize("bad", [dict(max_batch=0), dict(eos_prob=0.0), dict(eos_prob=1.5),
                                 dict(decode_base_ns=-1.0), dict(tp_degree=0)])
def test_profile_validation(bad):
    with pytest.raises(ValueError):
        prof(**bad)


def test_profile_file_has_exactly_the_fields(tmp_path):
    p = prof()
    p.save(tmp_path / "p.json")
    assert ModelProfile.load(tmp_path / "p.json") == p
    data = json.loads((tmp_path / "p.json").read_text())
    data["extra"] = 1
    with pytest.raises(ValueError):
        ModelProfile.from_dict(data)
    del data["extra"], data["eos_prob"]
    with pytest.raises(ValueError):
        ModelProfile.from_dict(data)


@pytest.mark.parametrize("name", ["A", "B", "C", "D", "E", "probe", "sweep_fp16", "sweep_fp8"])
def test_shipped_profiles_load(name):
    p = load_profile(name)
    assert p.kv_capacity_tokens > 0 and p.max_output_tokens >= 1


def test_shipped_memory_figures():
    a, b, c, d, e = (load_profile(x) for x in "ABCDE")
    assert (a.tp_degree, b.tp_degree, c.tp_degree, d.tp_degree, e.tp_degree) == (8, 8, 4, 1, 1)
    assert a.kv_cache_gb == 347.28 and b.kv_cache_gb == 487.2 and c.kv_cache_gb == 221.2
    assert all(p.max_output_tokens == 1000 for p in (a, b, c, d, e))


def test_output_length_certain_stop():
    rng = np.random.default_rng(0)
    assert {sample_output_length(rng, prof(eos_prob=1.0)) for _ in range(50)} == {1}


def test_output_length_mean_matches_summation_oracle():
    p = prof(eos_prob=0.005)
    rng = np.random.default_rng(1)
    draws = np.array([sample_output_length(rng, p) for _ in range(100_000)])
    q = p.eos_prob
    expected = sum(n * q * (1 - q) ** (n - 1) for n in range(1, 1000)) + 1000 * (1 - q) ** 999
    assert abs(draws.mean() - expected) / expected < 0.05
    assert draws.max() <= 1000 and draws.min() >= 1


def test_output_length_cap_flag():
    rng = np.random.default_rng(2)
    n, capped = draw_output_length(rng, prof(eos_prob=1e-9), cap=7)
    assert (n, capped) == (7, True)


# ------------------------------------------------------------------ engine examples
def test_batch_of_two_leaves_third_queued():
    e = BatchEngine(prof(max_batch=2))
    for i in range(3):
        e.admit(f"r{i}", 5, target_output=10, arrival_ns=0)
    e.step()
    assert [r.id for r in e.running] == ["r0", "r1"]
    assert [q.id for q in e.queue] == ["r2"]


def test_oversized_request_rejected_at_first_boundary():
    e = BatchEngine(prof(kv_tokens_per_gb=100.0))
    e.admit("big", 100, target_output=50)
    ev = e.step()
    assert [(x.kind, x.detail) for x in ev] == [("reject", "kv_overflow")]
    assert not e.has_work


def test_single_arrival_admitted_immediately():
    e = BatchEngine(prof())
    e.admit("a", 3, target_output=2, arrival_ns=500)
    ev = e.step()
    assert ev[0].kind == "admit" and ev[0].t_ns == 500


def test_three_token_request():
    e = BatchEngine(prof())
    e.admit("a", 3, target_output=3)
    steps = [e.step() for _ in range(3)]
    toks = [x for s in steps for x in s if x.kind == "tok"]
    assert [t.token_index for t in toks] == [0, 1, 2]
    assert steps[-1][-1].kind == "end" and steps[-1][-1].detail == "eos" and steps[-1][-1].token_index == 3
    assert not e.has_work


def test_cap_reason_when_clamped():
    e = BatchEngine(prof(max_output_tokens=1000))
    e.admit("a", 3, target_output=5000)
    ev = e.run_until_idle()
    end = ev[-1]
    assert end.kind == "end" and end.detail == "cap" and end.token_index == 1000


def test_duplicate_and_empty():
    e = BatchEngine(prof())
    e.admit("a", 1, target_output=1)
    with pytest.raises(DuplicateId):
        e.admit("a", 1, target_output=1)
    e.run_until_idle()
    with pytest.raises(EmptyEngine):
        e.step()
    e.admit("a", 1, target_output=1)  # id reusable once finished


def test_two_requests_joining_at_different_boundaries_match_replay():
    p = prof()
    trace = [("a", 10, None, 0), ("b", 20, None, 7_000_000)]
    events, bad = drive_engine(p, 3, trace)
    assert not bad
    assert as_tuples(events) == replay_engine(p.to_dict(), 3, trace)
    stamps_a = {x.t_ns for x in events if x.kind == "tok" and x.request_id == "a"}
    stamps_b = {x.t_ns for x in events if x.kind == "tok" and x.request_id == "b"}
    assert stamps_a & stamps_b


# ------------------------------------------------------------------ engine properties
@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_engine_invariants_and_replay(seed):
    rng = np.random.default_rng(seed)
    p = random_profile(rng)
    trace = random_trace(rng)
    events, bad = drive_engine(p, seed, trace)
    assert bad == []
    assert as_tuples(events) == replay_engine(p.to_dict(), seed, trace)


def test_checker_notices_a_broken_engine():
    class Greedy(BatchEngine):
        def step(self):
            # admits one extra request past the batch bound
            if self.queue and self.queue[0].arrival_ns <= self.clock_ns:
                from xrouter.simbackend.engine import ActiveRequest

                q = self.queue.pop(0)
                self.running.append(ActiveRequest(q, self.clock_ns))
                self.kv_reserved_tokens += q.input_tokens + q.target_output
            return super().step()

    p = prof(max_batch=1)
    trace = [(f"r{i}", 1, 5, 0) for i in range(4)]
    _, bad = drive_engine(p, 0, trace, engine_cls=Greedy)
    assert any(kind == "batch bound" for kind, _ in bad)


def test_log_is_determined_by_profile_seed_and_trace():
    rng = np.random.default_rng(9)
    p = random_profile(rng)
    trace = random_trace(rng)
    a, _ = drive_engine(p, 5, trace)
    b, _ = drive_engine(p, 5, list(reversed(trace)))
    assert as_tuples(a) == as_tuples(b)


def test_throughput_non_decreasing_until_batch_binds():
    p = prof(max_batch=8, eos_prob=1e-9, max_output_tokens=50, prefill_base_ns=0.0, prefill_coef_ns_per_token=0.0)
    rates = []
    for n in range(1, 9):
        e = BatchEngine(p)
        for i in range(n):
            e.admit(f"r{i}", 1, target_output=50)
        ev = e.run_until_idle()
        toks = [x.t_ns for x in ev if x.kind == "tok"]
        rates.append(len(toks) / max(toks))
    assert all(b >= a for a, b in zip(rates, rates[1:]))


# ------------------------------------------------------------------ coordinator
class _Stub:
    def __init__(self, b):
        self.b = b

    def next_boundary(self):
        return self.b


def test_coordinator_bookkeeping():
    c = Coordinator()
    c.expect(3, 0)
    assert c.pending == 3 and c.min_pending() == 0
    c.add(50)
    assert c.retire(0) and c.retire(0) and c.retire(0)
    assert not c.retire(0)
    assert c.min_pending() == 50


def test_coordinator_may_step():
    c = Coordinator()
    s0, s1 = _Stub(100), _Stub(100)
    i0, i1 = c.register(s0), c.register(s1)
    assert c.may_step(i0, 100) and not c.may_step(i1, 100)
    c.add(90)
    assert not c.may_step(i0, 100)
    c.retire(90)
    s0.b = None
    assert c.may_step(i1, 100)


# ------------------------------------------------------------------ server
async def _script(profile, time_scale, trace, seed=0, log_path=None):
    """Send ``trace`` (id, n_input, max_tokens, t_ns) to one backend; return per-id frames."""
    srv = BackendServer(profile, seed=seed, time_scale=time_scale, log_path=log_path)
    host, port = await srv.start()
    out = {}

    async def one(rid, n_in, max_tok, t_ns):
        r, w = await asyncio.open_connection(host, port)
        w.write(protocol.encode(protocol.req_frame(rid, " ".join(["w"] * n_in), max_tok, t_ns=t_ns)))
        await w.drain()
        frames = []
        while True:
            line = await r.readline()
            if not line:
                break
            frames.append(protocol.decode(line))
            if protocol.is_terminal(line):
                break
        w.close()
        out[rid] = frames

    await asyncio.gather(*(one(*t) for t in trace))
    await srv.close()
    return out, srv


def test_time_scale_does_not_change_virtual_log():
    p = prof(eos_prob=0.2, max_output_tokens=12)
    trace = [(f"r{i}", 5 + i, 20, 0) for i in range(6)]
    fast, _ = asyncio.run(_script(p, 0.01, trace))
    slow, _ = asyncio.run(_script(p, 1.0, trace))
    assert fast == slow


def test_batch_bound_observable(tmp_path):
    p = prof(max_batch=4, eos_prob=0.1, max_output_tokens=20)
    trace = [(f"r{i}", 3, 20, 0) for i in range(10)]
    out, srv = asyncio.run(_script(p, 0.0001, trace, log_path=tmp_path / "diag.csv"))
    assert srv.max_observed_batch <= 4
    per_t = {}
    for frames in out.values():
        for f in frames:
            if f["type"] == "tok":
                per_t[f["t_ns"]] = per_t.get(f["t_ns"], 0) + 1
    assert max(per_t.values()) <= 4
    rows = list(csv.DictReader(open(tmp_path / "diag.csv")))
    assert max(int(r["batch_size_at_event"]) for r in rows) <= 4


def test_server_log_equals_engine_replay(tmp_path):
    p = prof(max_batch=3, eos_prob=0.15, max_output_tokens=15, kv_tokens_per_gb=120.0)
    trace = [(f"r{i}", 4 + 7 * i, 15, 1_000_000 * (i // 2)) for i in range(8)]
    trace.append(("huge", 200, 15, 0))
    out, _ = asyncio.run(_script(p, 0.0001, trace, seed=4, log_path=tmp_path / "d.csv"))
    expected = replay_engine(p.to_dict(), 4, [(rid, n, m, t) for rid, n, m, t in trace])
    rows = list(csv.DictReader(open(tmp_path / "d.csv")))
    got = [(r["event"], r["request_id"], int(r["token_index"]) if r["token_index"] else -1, int(r["virtual_t_ns"]),
            int(r["batch_size_at_event"])) for r in rows]
    assert got == [e[:5] for e in expected]
    assert out["huge"][-1]["type"] == "err" and out["huge"][-1]["code"] == "kv_overflow"
    for rid, frames in out.items():
        toks = [f for f in frames if f["type"] == "tok"]
        assert [f["i"] for f in toks] == list(range(len(toks)))
        if frames[-1]["type"] == "end":
            assert frames[-1]["n"] == len(toks)


def test_lockstep_network_matches_discrete_event_simulation():
    from xrouter.loadgen import run_load

    profiles = [prof(eos_prob=0.05, max_output_tokens=40, max_batch=3), prof(eos_prob=0.08, max_batch=2)]
    n_users, rpu = 12, 3
    ids = [[(f"u{u}-{k}", 10 + u + k, 40, (u + k) % 2) for k in range(rpu)] for u in range(n_users)]

    async def main():
        coord = Coordinator()
        servers = [BackendServer(p, seed=6, time_scale=0.0, coordinator=coord) for p in profiles]
        eps = [await s.start() for s in servers]

        from xrouter.loadgen.workload import PlannedRequest

        plans = [[PlannedRequest(rid, u, k, 0, n, " ".join(["w"] * n), m) for k, (rid, n, m, _) in enumerate(reqs)]
                 for u, reqs in enumerate(ids)]
        backend_of = {rid: b for reqs in ids for rid, _, _, b in reqs}
        log = await run_load(lambda r: eps[backend_of[r.id]], n_users, None, 0, None, coordinator=coord, plans=plans)
        for s in servers:
            await s.close()
        return log

    log = asyncio.run(main())
    sim = simulate_closed_loop(profiles, [[SimRequest(rid, n, m, b) for rid, n, m, b in reqs] for reqs in ids], seed=6)
    by_id = {r.request_id: r for r in sim}
    assert len(log.records) == n_users * rpu
    for r in log.records:
        s = by_id[r.request_id]
        assert (r.t_send_ns, r.stamps, r.t_end_ns) == (s.t_send_ns, s.stamps, s.t_end_ns)
