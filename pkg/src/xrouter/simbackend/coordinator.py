"""Virtual-clock coordination between closed-loop users and networked backends.

Backends running in lockstep mode advance their virtual clock only when no
request that could still arrive at an earlier virtual time is outstanding.
This makes a networked run produce the same event log as the offline
discrete-event simulation, independent of wall-clock scheduling.

Bookkeeping is a multiset of *pending send times*: the virtual times at
which some user will (or may) send a request that has not reached a backend
queue yet.

* the load generator registers its users' first sends with :meth:`expect`
  and drops a user's entry with :meth:`retire` once the user stops;
* a backend adds the finishing time of every request it ends or rejects
  (the user's next send time) and removes a request's send time when the
  request is queued.

A backend may step at boundary ``c`` when every pending send time is
greater than ``c`` and every other backend holding work is at a later
boundary (equal boundaries go to the lower index).
"""
import asyncio
import heapq
import logging
from collections import Counter

log = logging.getLogger(__name__)


class Coordinator:
    def __init__(self, stall_timeout: float = 30.0):
        self.stall_timeout = stall_timeout
        self._heap: list[int] = []
        self._count: Counter = Counter()
        self._backends: list = []
        self._changed: asyncio.Event | None = None
        self._version = 0
        self._waiting: dict[int, int] = {}
        self._watchdog = None
        self.stalls = 0

    # ------------------------------------------------------------ pending send times
    def expect(self, n: int, t_ns: int = 0) -> None:
        for _ in range(n):
            self._add(t_ns)
        self._notify()

    def add(self, t_ns: int) -> None:
        self._add(t_ns)
        self._notify()

    def _add(self, t_ns: int) -> None:
        t_ns = int(t_ns)
        if self._count[t_ns] == 0:
            heapq.heappush(self._heap, t_ns)
        self._count[t_ns] += 1

    def retire(self, t_ns: int) -> bool:
        t_ns = int(t_ns)
        if self._count[t_ns] <= 0:
            return False
        self._count[t_ns] -= 1
        if self._count[t_ns] == 0:
            del self._count[t_ns]
        self._notify()
        return True

    def min_pending(self):
        while self._heap and self._heap[0] not in self._count:
            heapq.heappop(self._heap)
        return self._heap[0] if self._heap else None

    @property
    def pending(self) -> int:
        return sum(self._count.values())

    # ------------------------------------------------------------ backends
    def register(self, backend) -> int:
        """``backend`` must expose ``next_boundary() -> int | None``."""
        self._backends.append(backend)
        return len(self._backends) - 1

    def may_step(self, index: int, boundary: int) -> bool:
        m = self.min_pending()
        if m is not None and m <= boundary:
            return False
        for j, other in enumerate(self._backends):
            if j == index:
                continue
            b = other.next_boundary()
            if b is None:
                continue
            if b < boundary or (b == boundary and j < index):
                return False
        return True

    def _event(self) -> asyncio.Event:
        if self._changed is None:
            self._changed = asyncio.Event()
        return self._changed

    def _notify(self) -> None:
        self._version += 1
        if self._changed is not None:
            self._changed.set()
            self._changed = None

    def notify(self) -> None:
        self._notify()

    async def wait_turn(self, index: int, backend) -> int:
        """Block until ``backend`` holds work and may step; return its boundary."""
        while True:
            b = backend.next_boundary()
            if b is not None and self.may_step(index, b):
                return b
            if b is not None:
                self._waiting[index] = b
                self._ensure_watchdog()
            try:
                await self._event().wait()
            finally:
                self._waiting.pop(index, None)

    def _ensure_watchdog(self) -> None:
        if self._watchdog is None or self._watchdog.done():
            self._watchdog = asyncio.get_running_loop().create_task(self._watch())

    async def _watch(self) -> None:
        last = self._version
        idle = 0.0
        while self._waiting:
            await asyncio.sleep(0.5)
            if self._version != last:
                last = self._version
                idle = 0.0
                continue
            idle += 0.5
            if idle >= self.stall_timeout and self._waiting:
                self._break_stall(min(self._waiting.values()))
                idle = 0.0

    def _break_stall(self, boundary: int) -> None:
        # a pending send that never arrives (e.g. a client vanished mid-run)
        # would block every backend forever; drop it and carry on
        dropped = []
        while (m := self.min_pending()) is not None and m <= boundary:
            self.retire(m)
            dropped.append(m)
        self.stalls += 1
        log.warning("coordinator stall: dropped %d pending send time(s) <= %d", len(dropped), boundary)
        self._notify()
