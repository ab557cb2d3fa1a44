"""Connection-level round-robin TCP balancer in front of the gateways."""
import asyncio

from .routes import BalancerState

CHUNK = 1 << 16


async def _pipe(reader, writer):
    try:
        while True:
            data = await reader.read(CHUNK)
            if not data:
                break
            writer.write(data)
            await writer.drain()
    except (ConnectionError, OSError):
        pass
    finally:
        try:
            if writer.can_write_eof():
                writer.write_eof()
        except (ConnectionError, OSError, RuntimeError):
            pass


class Balancer:
    """Each accepted connection is piped, byte for byte, to the next gateway."""

    def __init__(self, upstreams, connect_timeout: float = 10.0):
        self.state = BalancerState(upstreams)
        self.connect_timeout = connect_timeout
        self._server = None
        self.endpoint = None
        self.failed = 0

    @property
    def counts(self):
        return list(self.state.counts)

    async def start(self, host: str = "127.0.0.1", port: int = 0):
        self._server = await asyncio.start_server(self._handle, host, port, backlog=4096)
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

    async def _handle(self, reader, writer):
        host, port = self.state.next()
        up_writer = None
        try:
            try:
                up_reader, up_writer = await asyncio.wait_for(asyncio.open_connection(host, port), self.connect_timeout)
            except (OSError, asyncio.TimeoutError):
                self.failed += 1
                return
            await asyncio.gather(_pipe(reader, up_writer), _pipe(up_reader, writer))
        finally:
            for w in (up_writer, writer):
                if w is None:
                    continue
                try:
                    w.close()
                    await w.wait_closed()
                except (ConnectionError, OSError):
                    pass
