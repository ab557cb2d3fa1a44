"""Classifying reverse proxy: one request per connection, streamed relay."""
import asyncio
import csv
import logging
import time

from ..errors import MalformedFrame, UnknownCluster
from . import protocol
from .routes import RouteTable

log = logging.getLogger(__name__)

SESSION_LOG_HEADER = ["request_id", "cluster", "upstream", "route_ns", "frames", "outcome"]


class Gateway:
    """Reads one ``req``, classifies its prompt, dials the cluster's backend,
    forwards the request with ``"cluster"`` added and relays every reply line
    verbatim until ``end`` or ``err``.

    The relay holds at most one frame: the next upstream line is read only
    after the previous one has been drained downstream.

    ``route_ns`` in the session log is the wall time from having the request
    line to having written it upstream (classification plus dial).
    """

    def __init__(self, pipeline, routes: RouteTable, max_sessions: int = 2048, idle_timeout: float = 60.0,
                 name: str = "gateway"):
        if max_sessions < 1:
            raise ValueError("max_sessions must be >= 1")
        self.pipeline = pipeline
        self.routes = routes
        self.max_sessions = max_sessions
        self.idle_timeout = idle_timeout
        self.name = name
        self.active = 0
        self.sessions = []
        self._server = None
        self.endpoint = None

    async def start(self, host: str = "127.0.0.1", port: int = 0):
        self._server = await asyncio.start_server(self.handle_session, host, port,
                                                  limit=protocol.MAX_FRAME_BYTES, backlog=4096)
        sock = self._server.sockets[0].getsockname()
        self.endpoint = (sock[0], sock[1])
        return self.endpoint

    async def close(self):
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    async def __aenter__(self):
        await self.start()
        return self

    async def __aexit__(self, *exc):
        await self.close()

    def write_session_log(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(SESSION_LOG_HEADER)
            w.writerows(self.sessions)

    async def _send_err(self, writer, rid, code, msg):
        try:
            writer.write(protocol.encode(protocol.err_frame(rid, code, msg)))
            await writer.drain()
        except (ConnectionError, OSError):
            pass

    async def handle_session(self, reader, writer):
        if self.active >= self.max_sessions:
            # consume the request first so closing does not reset the
            # connection before the client has read the error
            rid = ""
            try:
                line = await asyncio.wait_for(reader.readline(), 1.0)
                rid = protocol.decode(line)["id"]
            except (asyncio.TimeoutError, ValueError, OSError):
                pass
            await self._send_err(writer, rid, "overloaded", "session limit reached")
            await _close(writer)
            return
        self.active += 1
        rid, cluster, upstream, route_ns, frames, outcome = "", "", "", "", 0, ""
        up_writer = None
        try:
            try:
                line = await asyncio.wait_for(reader.readline(), self.idle_timeout)
            except asyncio.TimeoutError:
                outcome = "idle_timeout"
                return
            except ValueError:
                outcome = "bad_request"
                await self._send_err(writer, "", "bad_request", "frame too large")
                return
            if not line:
                outcome = "closed"
                return
            t0 = time.perf_counter_ns()
            try:
                frame = protocol.decode(line)
                if frame["type"] != "req":
                    raise MalformedFrame(f"expected req, got {frame['type']}")
            except MalformedFrame as e:
                outcome = "bad_request"
                await self._send_err(writer, "", "bad_request", str(e))
                return
            rid = frame["id"]
            cluster = self.pipeline.classify(frame["prompt"])
            try:
                host, port = self.routes.lookup(cluster, rid)
            except UnknownCluster as e:
                outcome = "no_route"
                await self._send_err(writer, rid, "no_route", str(e))
                return
            upstream = f"{host}:{port}"
            try:
                up_reader, up_writer = await asyncio.wait_for(
                    asyncio.open_connection(host, port, limit=protocol.MAX_FRAME_BYTES), self.idle_timeout)
                frame["cluster"] = cluster
                up_writer.write(protocol.encode(frame))
                await up_writer.drain()
            except (OSError, asyncio.TimeoutError) as e:
                outcome = "upstream_unavailable"
                await self._send_err(writer, rid, "upstream_unavailable", f"dial {upstream}: {e}")
                return
            route_ns = time.perf_counter_ns() - t0

            while True:
                try:
                    out = await asyncio.wait_for(up_reader.readline(), self.idle_timeout)
                except (OSError, asyncio.TimeoutError, ValueError):
                    out = b""
                if not out or not out.endswith(b"\n"):
                    outcome = "upstream_unavailable"
                    await self._send_err(writer, rid, "upstream_unavailable", "upstream closed mid-stream")
                    return
                try:
                    writer.write(out)
                    await writer.drain()
                except (ConnectionError, OSError):
                    outcome = "client_gone"
                    return
                frames += 1
                if protocol.is_terminal(out):
                    outcome = "ok"
                    return
        finally:
            self.active -= 1
            self.sessions.append([rid, cluster, upstream, route_ns, frames, outcome])
            if up_writer is not None:
                await _close(up_writer)
            await _close(writer)


async def _close(writer):
    try:
        writer.close()
        await writer.wait_closed()
    except (ConnectionError, OSError):
        pass
