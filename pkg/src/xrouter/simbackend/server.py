"""Streaming backend server wrapping a :class:`BatchEngine`."""
import asyncio
import csv
import logging
import zlib

from ..errors import DuplicateId, MalformedFrame
from ..routecore import protocol
from .engine import BatchEngine
from .profile import ModelProfile

log = logging.getLogger(__name__)

DIAG_HEADER = ["request_id", "event", "token_index", "virtual_t_ns", "batch_size_at_event"]
SESSION_HEADER = ["request_id", "cluster", "input_tokens", "n_tokens", "reason", "bytes", "crc32"]


def token_text(i: int) -> str:
    return f" w{i}"


class _Session:
    __slots__ = ("id", "cluster", "input_tokens", "queue", "n", "reason", "crc", "nbytes")

    def __init__(self, id, cluster, input_tokens):
        self.id = id
        self.cluster = cluster
        self.input_tokens = input_tokens
        self.queue: asyncio.Queue = asyncio.Queue()
        self.n = 0
        self.reason = ""
        self.crc = 0
        self.nbytes = 0


class BackendServer:
    """Mock inference server speaking the line protocol.

    Free-running (no coordinator): the driver steps whenever work is queued
    and sleeps ``dt * time_scale`` of wall time per iteration. Lockstep
    (with a :class:`~xrouter.simbackend.coordinator.Coordinator`): steps are
    additionally held back until no earlier arrival is possible, which makes
    the virtual event log independent of wall-clock scheduling.

    Requests carrying ``t_ns`` are queued at that virtual arrival time;
    others arrive at the current engine clock.
    """

    def __init__(self, profile: ModelProfile, seed: int = 0, time_scale: float = 1.0,
                 coordinator=None, log_path=None, sessions_path=None, name: str = "backend"):
        if time_scale < 0:
            raise ValueError("time_scale must be >= 0")
        self.profile = profile
        self.engine = BatchEngine(profile, seed=seed)
        self.time_scale = time_scale
        self.coordinator = coordinator
        self.index = coordinator.register(self) if coordinator is not None else None
        self.name = name
        self.log_path = log_path
        self.sessions_path = sessions_path
        self._sessions: dict[str, _Session] = {}
        self._work = asyncio.Event()
        self._server = None
        self._driver = None
        self._diag_file = None
        self._diag = None
        self._sess_file = None
        self._sess = None
        self.endpoint = None
        self.max_observed_batch = 0
        self.connections = 0

    # ------------------------------------------------------------ lifecycle
    async def start(self, host: str = "127.0.0.1", port: int = 0):
        if self.log_path is not None:
            self._diag_file = open(self.log_path, "w", newline="")
            self._diag = csv.writer(self._diag_file)
            self._diag.writerow(DIAG_HEADER)
        if self.sessions_path is not None:
            self._sess_file = open(self.sessions_path, "w", newline="")
            self._sess = csv.writer(self._sess_file)
            self._sess.writerow(SESSION_HEADER)
        self._server = await asyncio.start_server(self._handle, host, port, limit=protocol.MAX_FRAME_BYTES, backlog=4096)
        sock = self._server.sockets[0].getsockname()
        self.endpoint = (sock[0], sock[1])
        self._driver = asyncio.create_task(self._drive())
        return self.endpoint

    async def close(self):
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        if self._driver is not None:
            self._driver.cancel()
            try:
                await self._driver
            except asyncio.CancelledError:
                pass
        for f in (self._diag_file, self._sess_file):
            if f is not None:
                f.close()
        self._diag_file = self._sess_file = None

    async def __aenter__(self):
        await self.start()
        return self

    async def __aexit__(self, *exc):
        await self.close()

    def next_boundary(self):
        return self.engine.next_boundary()

    # ------------------------------------------------------------ driver
    async def _drive(self):
        eng = self.engine
        coord = self.coordinator
        while True:
            if coord is not None:
                start = await coord.wait_turn(self.index, self)
            else:
                while not eng.has_work:
                    self._work.clear()
                    await self._work.wait()
                start = eng.next_boundary()
            events = eng.step()
            if len(eng.running) > self.max_observed_batch:
                self.max_observed_batch = len(eng.running)
            self._dispatch(events)
            if coord is not None:
                coord.notify()
            delay = (eng.clock_ns - start) * 1e-9 * self.time_scale
            await asyncio.sleep(delay)

    def _dispatch(self, events):
        diag = self._diag
        coord = self.coordinator
        for ev in events:
            kind = ev.kind
            s = self._sessions.get(ev.request_id)
            if diag is not None:
                diag.writerow([ev.request_id, kind, "" if ev.token_index < 0 else ev.token_index, ev.t_ns, ev.batch_size])
            if kind == "tok":
                if s is not None:
                    s.queue.put_nowait(protocol.tok_frame(ev.request_id, ev.token_index, token_text(ev.token_index), ev.t_ns))
            elif kind == "end":
                if coord is not None:
                    coord.add(ev.t_ns)
                if s is not None:
                    s.queue.put_nowait(protocol.end_frame(ev.request_id, ev.token_index, ev.detail))
            elif kind == "reject":
                if coord is not None:
                    coord.add(ev.t_ns)
                if s is not None:
                    s.queue.put_nowait(protocol.err_frame(
                        ev.request_id, "kv_overflow", "request cannot fit in the KV cache", t_ns=ev.t_ns))

    # ------------------------------------------------------------ sessions
    async def _write(self, writer, frame, s=None):
        data = protocol.encode(frame)
        writer.write(data)
        if s is not None:
            s.crc = zlib.crc32(data, s.crc)
            s.nbytes += len(data)
        await writer.drain()

    async def _handle(self, reader, writer):
        self.connections += 1
        s = None
        try:
            line = await reader.readline()
            if not line:
                return
            try:
                frame = protocol.decode(line)
                if frame["type"] != "req":
                    raise MalformedFrame(f"expected req, got {frame['type']}")
            except MalformedFrame as e:
                await self._write(writer, protocol.err_frame("", "bad_request", str(e)))
                return
            rid = frame["id"]
            t_ns = frame.get("t_ns")
            n_input = len(frame["prompt"].split())
            if rid in self._sessions:
                await self._write(writer, protocol.err_frame(rid, "duplicate_id", "request id already active"))
                return
            s = _Session(rid, frame.get("cluster"), n_input)
            try:
                self.engine.admit(rid, n_input, frame["max_tokens"], arrival_ns=t_ns)
            except DuplicateId:
                await self._write(writer, protocol.err_frame(rid, "duplicate_id", "request id already active"))
                s = None
                return
            self._sessions[rid] = s
            if self.coordinator is not None:
                if t_ns is not None:
                    self.coordinator.retire(t_ns)
                self.coordinator.notify()
            self._work.set()
            broken = False
            done = False
            while not done:
                batch = [await s.queue.get()]
                while not s.queue.empty():
                    batch.append(s.queue.get_nowait())
                chunks = []
                for out in batch:
                    kind = out["type"]
                    chunks.append(protocol.encode(out))
                    if kind == "tok":
                        s.n += 1
                    else:
                        s.reason = out["reason"] if kind == "end" else out["code"]
                        done = True
                        break
                data = b"".join(chunks)
                s.crc = zlib.crc32(data, s.crc)
                s.nbytes += len(data)
                if not broken:
                    try:
                        writer.write(data)
                        await writer.drain()
                    except (ConnectionError, OSError):
                        broken = True
        except (ConnectionError, OSError, asyncio.IncompleteReadError):
            pass
        finally:
            if s is not None:
                self._sessions.pop(s.id, None)
                if self._sess is not None:
                    self._sess.writerow([s.id, "" if s.cluster is None else s.cluster, s.input_tokens,
                                         s.n, s.reason, s.nbytes, f"{s.crc:08x}"])
            try:
                writer.close()
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass


async def serve(profile: ModelProfile, host: str, port: int, time_scale: float = 1.0, seed: int = 0,
                log_path=None, sessions_path=None):
    """Run a free-running backend until cancelled."""
    srv = BackendServer(profile, seed=seed, time_scale=time_scale, log_path=log_path, sessions_path=sessions_path)
    h, p = await srv.start(host, port)
    log.info("backend %s listening on %s:%d", profile.name, h, p)
    try:
        await asyncio.Event().wait()
    finally:
        await srv.close()
