"""In-flight batching state machine driven by a virtual clock."""
from bisect import insort
from collections import namedtuple

from ..errors import DuplicateId, EmptyEngine
from .profile import ModelProfile, draw_output_length, iteration_time, request_rng

# kind is one of admit | tok | end | reject; detail carries the end reason
Event = namedtuple("Event", "kind request_id token_index t_ns batch_size detail")


class PendingRequest:
    __slots__ = ("id", "input_tokens", "target_output", "capped", "arrival_ns")

    def __init__(self, id, input_tokens, target_output, capped, arrival_ns):
        self.id = id
        self.input_tokens = input_tokens
        self.target_output = target_output
        self.capped = capped
        self.arrival_ns = arrival_ns

    def _key(self):
        return (self.arrival_ns, self.id)

    def __lt__(self, other):
        return self._key() < other._key()


class ActiveRequest:
    __slots__ = ("id", "input_tokens", "target_output", "emitted", "admitted_at", "capped")

    def __init__(self, pending: PendingRequest, admitted_at: int):
        self.id = pending.id
        self.input_tokens = pending.input_tokens
        self.target_output = pending.target_output
        self.capped = pending.capped
        self.emitted = 0
        self.admitted_at = admitted_at

    @property
    def kv_tokens_held(self) -> int:
        return self.input_tokens + self.emitted

    @property
    def kv_reserved(self) -> int:
        return self.input_tokens + self.target_output


class BatchEngine:
    """Continuous-batching engine.

    Requests enter a queue ordered by ``(arrival_ns, id)`` through
    :meth:`admit`; they join the running batch only inside :meth:`step`, at
    the first iteration boundary at or after their arrival, FIFO, while the
    batch has a free slot and the conservative KV reservation
    (input + target output) fits. A request that could never fit is rejected
    at its first boundary.

    Output lengths are drawn from a per-request stream keyed by
    ``(seed, request id)``, so the event log is a function of the profile,
    the seed and the arrival trace only.
    """

    def __init__(self, profile: ModelProfile, seed: int = 0, emit_tokens: bool = True):
        self.profile = profile
        self.seed = seed
        self.emit_tokens = emit_tokens
        self.clock_ns = 0
        self.running: list[ActiveRequest] = []
        self.queue: list[PendingRequest] = []
        self.kv_capacity_tokens = profile.kv_capacity_tokens
        self.kv_reserved_tokens = 0
        self._ids: set[str] = set()
        self.steps = 0

    # ------------------------------------------------------------ state
    @property
    def kv_used_tokens(self) -> int:
        return sum(r.input_tokens + r.emitted for r in self.running)

    @property
    def has_work(self) -> bool:
        return bool(self.running or self.queue)

    def next_boundary(self):
        """Virtual time of the next step, or None when idle."""
        if self.running:
            return self.clock_ns
        if self.queue:
            return max(self.clock_ns, self.queue[0].arrival_ns)
        return None

    # ------------------------------------------------------------ inputs
    def admit(self, request_id: str, input_tokens: int, max_tokens: int | None = None,
              arrival_ns: int | None = None, target_output: int | None = None) -> PendingRequest:
        """Queue a request. ``arrival_ns`` defaults to the current clock."""
        if request_id in self._ids:
            raise DuplicateId(request_id)
        if input_tokens < 0:
            raise ValueError("input_tokens must be >= 0")
        if target_output is None:
            target_output, capped = draw_output_length(request_rng(self.seed, request_id), self.profile, max_tokens)
        else:
            limit = self.profile.max_output_tokens if max_tokens is None else min(max_tokens, self.profile.max_output_tokens)
            if not 1 <= target_output:
                raise ValueError("target_output must be >= 1")
            capped = target_output > limit
            target_output = min(target_output, limit)
        arrival = self.clock_ns if arrival_ns is None else int(arrival_ns)
        req = PendingRequest(request_id, int(input_tokens), int(target_output), capped, arrival)
        insort(self.queue, req)
        self._ids.add(request_id)
        return req

    # ------------------------------------------------------------ transition
    def step(self) -> list:
        if not self.has_work:
            raise EmptyEngine("step called with nothing running or queued")
        p = self.profile
        events = []
        if not self.running and self.queue[0].arrival_ns > self.clock_ns:
            self.clock_ns = self.queue[0].arrival_ns
        now = self.clock_ns

        # requests that can never fit are rejected at their first boundary
        if any(q.arrival_ns <= now and q.input_tokens + q.target_output > self.kv_capacity_tokens for q in self.queue):
            keep = []
            for q in self.queue:
                if q.arrival_ns <= now and q.input_tokens + q.target_output > self.kv_capacity_tokens:
                    self._ids.discard(q.id)
                    events.append(Event("reject", q.id, -1, now, len(self.running), "kv_overflow"))
                else:
                    keep.append(q)
            self.queue = keep

        joined_tokens = 0
        n_join = 0
        while self.queue and len(self.running) < p.max_batch:
            q = self.queue[0]
            if q.arrival_ns > now:
                break
            need = q.input_tokens + q.target_output
            if self.kv_reserved_tokens + need > self.kv_capacity_tokens:
                break
            self.queue.pop(0)
            self.running.append(ActiveRequest(q, now))
            self.kv_reserved_tokens += need
            joined_tokens += q.input_tokens
            n_join += 1
            events.append(Event("admit", q.id, -1, now, len(self.running), ""))

        if not self.running:
            return events

        b = len(self.running)
        dt = iteration_time(p, b, joined_tokens, joining=n_join > 0)
        self.clock_ns = now + max(1, int(round(dt)))
        t = self.clock_ns
        self.steps += 1
        still = []
        emit = self.emit_tokens
        for r in self.running:
            if emit:
                events.append(Event("tok", r.id, r.emitted, t, b, ""))
            r.emitted += 1
            if r.emitted >= r.target_output:
                events.append(Event("end", r.id, r.emitted, t, b, "cap" if r.capped else "eos"))
                self.kv_reserved_tokens -= r.input_tokens + r.target_output
                self._ids.discard(r.id)
            else:
                still.append(r)
        self.running = still
        return events

    def run_until_idle(self, max_steps: int | None = None) -> list:
        out = []
        n = 0
        while self.has_work:
            out.extend(self.step())
            n += 1
            if max_steps is not None and n >= max_steps:
                break
        return out
