"""Closed-loop concurrent users over the line protocol."""
import asyncio
import csv
import json
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import LoadAborted, MalformedFrame
from ..routecore import protocol
from ..routecore.routes import parse_endpoint
from .workload import PromptSource, WorkloadSpec, plan_run

EVENTS_HEADER = ["run_id", "concurrency", "user_id", "request_id", "category", "event", "token_index", "t_ns"]
SESSIONS_HEADER = ["run_id", "user_id", "request_id", "category", "input_tokens", "n_tokens", "tok_frames",
                   "reason", "error_code", "bytes", "crc32", "prompt"]

_TOK = b'{"v":1,"type":"tok"'


@dataclass
class SessionRecord:
    user_id: int
    request_id: str
    category: int
    input_tokens: int
    prompt: str
    t_send_ns: int
    stamps: list = field(default_factory=list)
    t_end_ns: int | None = None
    reason: str = ""
    error_code: str = ""
    wall_send_ns: int = 0
    wall_stamps: list = field(default_factory=list)
    wall_end_ns: int | None = None
    tok_frames: int = 0
    nbytes: int = 0
    crc: int = 0

    @property
    def n_tokens(self) -> int:
        return len(self.stamps)

    @property
    def ok(self) -> bool:
        return self.reason in ("eos", "cap")


@dataclass
class TokenEventLog:
    run_id: str
    concurrency: int
    scenario: str
    seed: int
    records: list
    clock_epoch_ns: int
    wall_duration_s: float
    spec: dict
    aborted: bool = False

    @property
    def errors(self) -> int:
        return sum(1 for r in self.records if not r.ok)


async def _one_request(endpoint, req, t_virtual, rec: SessionRecord, epoch: int):
    host, port = endpoint
    reader, writer = await asyncio.open_connection(host, port, limit=protocol.MAX_FRAME_BYTES)
    try:
        rec.wall_send_ns = time.monotonic_ns() - epoch
        writer.write(protocol.encode(protocol.req_frame(req.id, req.prompt, req.max_tokens, t_ns=t_virtual)))
        await writer.drain()
        crc = 0
        while True:
            line = await reader.readline()
            now = time.monotonic_ns() - epoch
            if not line:
                rec.reason = "error"
                rec.error_code = "eof"
                rec.wall_end_ns = now
                rec.t_end_ns = rec.stamps[-1] if rec.stamps else t_virtual
                break
            crc = zlib.crc32(line, crc)
            rec.nbytes += len(line)
            if line.startswith(_TOK):
                rec.tok_frames += 1
            try:
                f = protocol.decode(line)
            except MalformedFrame:
                rec.reason = "error"
                rec.error_code = "malformed"
                rec.wall_end_ns = now
                rec.t_end_ns = rec.stamps[-1] if rec.stamps else t_virtual
                break
            kind = f["type"]
            if kind == "tok":
                rec.stamps.append(f["t_ns"])
                rec.wall_stamps.append(now)
            elif kind == "end":
                rec.reason = f["reason"]
                rec.wall_end_ns = now
                rec.t_end_ns = rec.stamps[-1] if rec.stamps else t_virtual
                break
            else:
                rec.reason = "error"
                rec.error_code = f["code"]
                rec.wall_end_ns = now
                rec.t_end_ns = f.get("t_ns", rec.stamps[-1] if rec.stamps else t_virtual)
                break
        rec.crc = crc
    finally:
        try:
            writer.close()
            await writer.wait_closed()
        except (ConnectionError, OSError):
            pass


async def run_load(target, n_users: int, spec: WorkloadSpec, seed: int, corpus, run_id: str = "run",
                   scenario: str = "", coordinator=None, out_dir=None, plans=None) -> TokenEventLog:
    """Run ``n_users`` closed-loop users against ``target``.

    ``target`` is an endpoint (``"host:port"`` or a pair) or a callable
    mapping a planned request to an endpoint. Every request carries the
    user's virtual send time: 0 for the first request, then the virtual
    time at which the previous response finished. With a ``coordinator``,
    the users' pending send times are registered with it so lockstep
    backends can advance safely.
    """
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    if plans is None:
        source = corpus if isinstance(corpus, PromptSource) else PromptSource(corpus)
        plans = plan_run(spec, source, seed, n_users, run_id)
    elif len(plans) != n_users:
        raise ValueError(f"got plans for {len(plans)} users, expected {n_users}")
    route = target if callable(target) else (lambda _req, ep=parse_endpoint(target): ep)
    total = sum(len(p) for p in plans)
    state = {"errors": 0, "abort": False}
    records: list[list] = [[] for _ in range(n_users)]
    epoch = time.monotonic_ns()
    if coordinator is not None:
        coordinator.expect(n_users, 0)

    async def user(u: int):
        t_virtual = 0
        try:
            for req in plans[u]:
                if state["abort"]:
                    break
                rec = SessionRecord(u, req.id, req.category, req.input_tokens, req.prompt, t_virtual)
                records[u].append(rec)
                try:
                    await _one_request(route(req), req, t_virtual, rec, epoch)
                except (OSError, asyncio.IncompleteReadError, ValueError) as e:
                    rec.reason = "error"
                    rec.error_code = rec.error_code or type(e).__name__
                    rec.wall_end_ns = time.monotonic_ns() - epoch
                    rec.t_end_ns = rec.stamps[-1] if rec.stamps else t_virtual
                t_virtual = rec.t_end_ns
                if not rec.ok:
                    state["errors"] += 1
                    if state["errors"] * 2 > total:
                        state["abort"] = True
        finally:
            if coordinator is not None:
                coordinator.retire(t_virtual)

    t0 = time.perf_counter()
    await asyncio.gather(*(user(u) for u in range(n_users)))
    wall = time.perf_counter() - t0
    flat = [r for per_user in records for r in per_user]
    log = TokenEventLog(run_id, n_users, scenario, seed, flat, epoch, wall,
                        spec.to_dict() if spec is not None else {}, state["abort"])
    if out_dir is not None:
        write_log(log, out_dir)
    if state["abort"]:
        raise LoadAborted(f"{state['errors']} of {total} requests failed")
    return log


# ---------------------------------------------------------------- files
def _event_rows(log: TokenEventLog, wall: bool):
    for r in log.records:
        base = [log.run_id, log.concurrency, r.user_id, r.request_id, r.category]
        yield base + ["send", "", r.wall_send_ns if wall else r.t_send_ns]
        for i, t in enumerate(r.wall_stamps if wall else r.stamps):
            yield base + ["tok", i, t]
        end_t = r.wall_end_ns if wall else r.t_end_ns
        if r.ok:
            yield base + ["end", r.n_tokens, end_t]
        else:
            yield base + ["err", "", end_t]


def write_log(log: TokenEventLog, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, wall in (("events.csv", False), ("wall_events.csv", True)):
        with open(out / name, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(EVENTS_HEADER)
            w.writerows(_event_rows(log, wall))
    with open(out / "sessions.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SESSIONS_HEADER)
        for r in log.records:
            w.writerow([log.run_id, r.user_id, r.request_id, r.category, r.input_tokens, r.n_tokens, r.tok_frames,
                        r.reason, r.error_code, r.nbytes, f"{r.crc:08x}", r.prompt])
    meta = {
        "run_id": log.run_id,
        "concurrency": log.concurrency,
        "scenario": log.scenario,
        "seed": log.seed,
        "spec": log.spec,
        "clock": "virtual backend clock in events.csv; loadgen monotonic clock in wall_events.csv",
        "clock_epoch_monotonic_ns": log.clock_epoch_ns,
        "wall_duration_s": log.wall_duration_s,
        "requests": len(log.records),
        "errors": log.errors,
        "aborted": log.aborted,
    }
    (out / "run.json").write_text(json.dumps(meta, indent=2) + "\n", "utf-8")
    return out
