"""Offline closed-loop discrete-event simulation on the batching engine.

Runs the same scheduling as a lockstep networked experiment (see
:mod:`.coordinator`) without sockets: the engine with the smallest next
boundary steps first (ties to the lower index) and a user's next request
arrives at the virtual time its previous one finished.
"""
from dataclasses import dataclass, field

from .engine import BatchEngine


@dataclass
class SimRequest:
    id: str
    input_tokens: int
    max_tokens: int
    backend: int


@dataclass
class SimRecord:
    user_id: int
    request_id: str
    backend: int
    input_tokens: int
    t_send_ns: int
    stamps: list = field(default_factory=list)
    n_tokens: int = 0
    t_end_ns: int | None = None
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.reason in ("eos", "cap")


def simulate_closed_loop(profiles, users, seed: int = 0, record_tokens: bool = True):
    """Simulate closed-loop users against independent engines.

    ``users`` is a list (one entry per user) of lists of :class:`SimRequest`.
    Returns the list of :class:`SimRecord` in completion order.
    """
    engines = [BatchEngine(p, seed=seed, emit_tokens=record_tokens) for p in profiles]
    cursor = [0] * len(users)
    owner = {}
    records = {}
    done = []

    def send(user: int, t: int) -> None:
        k = cursor[user]
        if k >= len(users[user]):
            return
        cursor[user] = k + 1
        r = users[user][k]
        rec = SimRecord(user, r.id, r.backend, r.input_tokens, t)
        records[r.id] = rec
        owner[r.id] = user
        engines[r.backend].admit(r.id, r.input_tokens, r.max_tokens, arrival_ns=t)

    for u in range(len(users)):
        send(u, 0)

    while True:
        best, best_b = None, None
        for i, e in enumerate(engines):
            b = e.next_boundary()
            if b is not None and (best_b is None or b < best_b):
                best, best_b = i, b
        if best is None:
            break
        for ev in engines[best].step():
            kind = ev.kind
            if kind == "tok":
                records[ev.request_id].stamps.append(ev.t_ns)
            elif kind == "end" or kind == "reject":
                rec = records.pop(ev.request_id)
                rec.t_end_ns = ev.t_ns
                if kind == "end":
                    rec.n_tokens = ev.token_index
                    rec.reason = ev.detail
                else:
                    rec.reason = "error"
                done.append(rec)
                send(owner.pop(ev.request_id), ev.t_ns)
    return done


def makespan(records) -> int:
    return max((r.t_end_ns for r in records), default=0)
