import hashlib
import json
from pathlib import Path

from ..errors import NoUpstreams, UnknownCluster


def parse_endpoint(text) -> tuple[str, int]:
    """``"host:port"`` (or a ``(host, port)`` pair) -> ``(host, port)``."""
    if isinstance(text, (tuple, list)) and len(text) == 2:
        host, port = text
    else:
        host, sep, port = str(text).strip().rpartition(":")
        if not sep or not host:
            raise ValueError(f"endpoint must look like host:port, got {text!r}")
    try:
        port = int(port)
    except (TypeError, ValueError):
        raise ValueError(f"bad port in endpoint {text!r}") from None
    if not 0 < port < 65536:
        raise ValueError(f"port out of range in endpoint {text!r}")
    return str(host), port


def format_endpoint(ep) -> str:
    host, port = parse_endpoint(ep)
    return f"{host}:{port}"


POLICIES = ("round_robin", "request_hash")


def request_slot(request_id: str, n: int) -> int:
    """Stable slot in ``range(n)`` for a request id.

    A keyed digest rather than crc32: crc is linear, so the low bits of
    ids that only differ in a few digits can all coincide.
    """
    d = hashlib.blake2b(request_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(d, "big") % n


class RouteTable:
    """Cluster id -> endpoints.

    With several endpoints per cluster, ``round_robin`` cycles through them in
    arrival order and ``request_hash`` picks ``request_slot(request_id, n)``, which
    does not depend on the order requests happen to reach the gateway.
    """

    def __init__(self, clusters: dict, k: int | None = None, policy: str = "round_robin"):
        if policy not in POLICIES:
            raise ValueError(f"unknown route policy {policy!r}")
        self.policy = policy
        entries = {}
        for key, eps in clusters.items():
            c = int(key)
            if not eps:
                raise ValueError(f"cluster {c} has no endpoints")
            entries[c] = [parse_endpoint(e) for e in eps]
        if k is not None:
            missing = [c for c in range(k) if c not in entries]
            if missing:
                raise ValueError(f"route table lacks clusters {missing}")
        self.entries = entries
        self._next = {c: 0 for c in entries}

    def lookup(self, cluster: int, request_id: str | None = None) -> tuple[str, int]:
        eps = self.entries.get(cluster)
        if eps is None:
            raise UnknownCluster(f"no route for cluster {cluster}")
        if self.policy == "request_hash" and request_id is not None:
            return eps[request_slot(request_id, len(eps))]
        i = self._next[cluster]
        self._next[cluster] = (i + 1) % len(eps)
        return eps[i]

    def endpoints_for(self, cluster: int) -> list:
        return list(self.entries.get(cluster, ()))

    def to_dict(self) -> dict:
        d = {"clusters": {str(c): [format_endpoint(e) for e in eps] for c, eps in sorted(self.entries.items())}}
        if self.policy != "round_robin":
            d["policy"] = self.policy
        return d

    @classmethod
    def from_dict(cls, data: dict, k: int | None = None) -> "RouteTable":
        if "clusters" not in data or not isinstance(data["clusters"], dict):
            raise ValueError('route table must be {"clusters": {...}}')
        return cls(data["clusters"], k=k, policy=data.get("policy", "round_robin"))

    @classmethod
    def load(cls, path, k: int | None = None) -> "RouteTable":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")), k=k)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", "utf-8")


def route_lookup(table: RouteTable, cluster: int, request_id: str | None = None):
    return table.lookup(cluster, request_id)


class BalancerState:
    def __init__(self, upstreams):
        self.upstreams = [parse_endpoint(u) for u in upstreams]
        self.counter = 0
        self.counts = [0] * len(self.upstreams)

    def next(self):
        if not self.upstreams:
            raise NoUpstreams("balancer has no upstream gateways")
        i = self.counter % len(self.upstreams)
        self.counter += 1
        self.counts[i] += 1
        return self.upstreams[i]


def round_robin_next(b: BalancerState):
    return b.next()
