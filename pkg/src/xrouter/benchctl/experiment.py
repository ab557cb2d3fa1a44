"""In-process experiment topology: backends -> gateways -> balancer -> load generator."""
import asyncio
import csv
import hashlib
import json
import logging
import shutil
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from ..clusterkit import ClusterPipeline
from ..errors import CorruptFile, LaunchFailure, LoadAborted, VersionMismatch
from ..loadgen import PromptSource, plan_run, run_load
from ..metricspipe import summarize
from ..routecore import Balancer, Gateway, RouteTable, request_slot
from ..simbackend import BackendServer, Coordinator, builtin_profile_path, load_profile
from .config import ExperimentConfig
from .corpus import bundled_corpus_path, ingest_corpus
from .train import train

log = logging.getLogger(__name__)

_trained: dict = {}


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def profile_file(spec) -> Path:
    p = Path(spec)
    if p.suffix == ".json" or p.exists():
        return p
    return builtin_profile_path(str(spec))


def load_pipeline(cfg: ExperimentConfig, corpus) -> ClusterPipeline:
    """The configured artifact, or a classifier trained on the corpus with the config seed."""
    if cfg.artifact is not None:
        try:
            pipe = ClusterPipeline.load(cfg.artifact)
        except (OSError, CorruptFile, VersionMismatch) as e:
            raise LaunchFailure(f"cannot load classifier artifact {cfg.artifact}: {e}") from e
    else:
        key = (str(cfg.corpus or bundled_corpus_path()), cfg.k, cfg.seed)
        if key not in _trained:
            _trained[key] = train(corpus, k=cfg.k, seed=cfg.seed)[0]
        pipe = _trained[key]
    k = len(pipe.cluster_centers_)
    if k != cfg.k:
        raise LaunchFailure(f"classifier has {k} clusters but the topology covers {cfg.k}")
    return pipe


@dataclass
class Topology:
    """A running set of components for one round."""

    backends: dict = field(default_factory=dict)
    gateways: list = field(default_factory=list)
    balancer: Balancer | None = None
    coordinator: Coordinator | None = None
    routes: RouteTable | None = None

    def endpoints(self) -> list:
        eps = [b.endpoint for b in self.backends.values()] + [g.endpoint for g in self.gateways]
        if self.balancer is not None:
            eps.append(self.balancer.endpoint)
        return [e for e in eps if e is not None]

    async def close(self):
        if self.balancer is not None:
            await self.balancer.close()
        for g in self.gateways:
            await g.close()
        for b in self.backends.values():
            await b.close()


class _Ports:
    def __init__(self, host, base):
        self.host = host
        self.next = base

    def take(self) -> int:
        if not self.next:
            return 0
        p = self.next
        self.next += 1
        return p


async def _start(component, ports: _Ports, what: str):
    port = ports.take()
    try:
        return await component.start(ports.host, port)
    except OSError as e:
        raise LaunchFailure(f"cannot listen for {what} on {ports.host}:{port}: {e}") from e


async def launch(cfg: ExperimentConfig, profiles: dict, pipeline, seed: int, log_dir=None,
                 with_gateways: bool = True) -> Topology:
    """Start backends, then (optionally) gateways and the balancer."""
    topo = Topology()
    if cfg.mode == "lockstep":
        topo.coordinator = Coordinator()
    ports = _Ports(cfg.host, cfg.base_port)
    try:
        for name in sorted(profiles):
            diag = sess = None
            if log_dir is not None:
                diag = log_dir / f"backend_{name}_diag.csv"
                sess = log_dir / f"backend_{name}_sessions.csv"
            b = BackendServer(profiles[name], seed=seed, time_scale=cfg.time_scale, coordinator=topo.coordinator,
                              log_path=diag, sessions_path=sess, name=name)
            topo.backends[name] = b
            await _start(b, ports, f"backend {name}")
        clusters = {c: [f"{topo.backends[n].endpoint[0]}:{topo.backends[n].endpoint[1]}" for n in names]
                    for c, names in cfg.routes.items()}
        topo.routes = RouteTable(clusters, k=cfg.k, policy=cfg.effective_route_policy)
        if with_gateways:
            for i in range(cfg.gateway_instances):
                g = Gateway(pipeline, RouteTable(clusters, k=cfg.k, policy=cfg.effective_route_policy), name=f"g{i}")
                topo.gateways.append(g)
                await _start(g, ports, f"gateway {i}")
            topo.balancer = Balancer([g.endpoint for g in topo.gateways])
            await _start(topo.balancer, ports, "balancer")
    except BaseException:
        await topo.close()
        raise
    return topo


async def probe_ports(endpoints) -> list:
    """Endpoints that still accept connections."""
    alive = []
    for host, port in endpoints:
        try:
            _, w = await asyncio.wait_for(asyncio.open_connection(host, port), 1.0)
        except (OSError, asyncio.TimeoutError):
            continue
        alive.append(f"{host}:{port}")
        w.close()
    return alive


def write_gateway_sessions(gateways, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["gateway", "request_id", "cluster", "upstream", "route_ns", "frames", "outcome"])
        for g in gateways:
            for row in g.sessions:
                w.writerow([g.name] + list(row))


def read_csv(path) -> list:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def check_routing(run_dir, cfg: ExperimentConfig, pipeline) -> dict:
    """Cross-check the load generator's sessions against the backends' own logs.

    A session is routed correctly when the backend that served it is one the
    route table assigns to ``classify(prompt)`` (with ``request_hash``, the
    exact one), and its relay is intact when the bytes and CRC-32 the
    backend sent equal what the client received.
    """
    run_dir = Path(run_dir)
    served = {}
    for name in cfg.profiles:
        for row in read_csv(run_dir / f"backend_{name}_sessions.csv"):
            served[row["request_id"]] = (name, row)
    out = {"sessions": 0, "routed_ok": 0, "checksum_ok": 0, "mismatches": []}
    for row in read_csv(run_dir / "sessions.csv"):
        out["sessions"] += 1
        rid = row["request_id"]
        cluster = pipeline.classify(row["prompt"])
        allowed = cfg.routes[str(cluster)]
        if cfg.effective_route_policy == "request_hash":
            allowed = [allowed[request_slot(rid, len(allowed))]]
        got = served.get(rid)
        if got is None:
            out["mismatches"].append({"request_id": rid, "problem": "no backend served it"})
            continue
        name, brow = got
        if name in allowed:
            out["routed_ok"] += 1
        else:
            out["mismatches"].append({"request_id": rid, "problem": f"served by {name}, expected {allowed}"})
        if brow["crc32"] == row["crc32"] and brow["bytes"] == row["bytes"]:
            out["checksum_ok"] += 1
        else:
            out["mismatches"].append({"request_id": rid, "problem": "relay checksum differs"})
    return out


def _median_wall_ttft(log) -> float | None:
    vals = [r.wall_stamps[0] - r.wall_send_ns for r in log.records if r.ok and r.wall_stamps]
    return statistics.median(vals) if vals else None


async def _round(cfg, profiles, pipeline, source, n, rep, run_dir: Path) -> dict:
    seed = cfg.seed + rep
    run_id = f"n{n}-r{rep}"
    plans = plan_run(cfg.workload, source, seed, n, run_id)
    run_dir.mkdir(parents=True, exist_ok=True)

    topo = await launch(cfg, profiles, pipeline, seed, log_dir=run_dir)
    try:
        lg = await run_load(topo.balancer.endpoint, n, cfg.workload, seed, source, run_id=run_id,
                            scenario=cfg.scenario, coordinator=topo.coordinator, out_dir=run_dir, plans=plans)
    finally:
        await topo.close()
        write_gateway_sessions(topo.gateways, run_dir / "gateway_sessions.csv")
    orphans = await probe_ports(topo.endpoints())
    route_ns = [row[3] for g in topo.gateways for row in g.sessions if row[5] == "ok"]
    info = {
        "concurrency": n,
        "repeat": rep,
        "run_dir": run_dir.name,
        "balancer_counts": topo.balancer.counts,
        "max_observed_batch": {k: b.max_observed_batch for k, b in topo.backends.items()},
        "coordinator_stalls": topo.coordinator.stalls if topo.coordinator else 0,
        "route_ns_median": statistics.median(route_ns) if route_ns else None,
        "wall_ttft_median_ns": _median_wall_ttft(lg),
        "orphaned_listeners": orphans,
    }

    if cfg.control_round:
        # same plan straight to the backends the route table would pick
        ctl_dir = run_dir / "control"
        ctl_dir.mkdir(exist_ok=True)
        ctl = await launch(cfg, profiles, pipeline, seed, with_gateways=False)
        clusters = {req.id: pipeline.classify(req.prompt) for p in plans for req in p}
        try:
            ctl_log = await run_load(lambda req: ctl.routes.lookup(clusters[req.id], req.id), n, cfg.workload, seed,
                                     source, run_id=run_id, scenario=cfg.scenario, coordinator=ctl.coordinator,
                                     out_dir=ctl_dir, plans=plans)
        finally:
            await ctl.close()
        orphans = await probe_ports(ctl.endpoints())
        info["orphaned_listeners"] += orphans
        direct = _median_wall_ttft(ctl_log)
        info["direct_wall_ttft_median_ns"] = direct
        if direct is not None and info["wall_ttft_median_ns"] is not None:
            info["added_median_latency_ns"] = info["wall_ttft_median_ns"] - direct
    if info["orphaned_listeners"]:
        log.warning("listeners still open after teardown: %s", info["orphaned_listeners"])
    return info


async def run_experiment_async(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    profiles = {}
    for name, spec in cfg.profiles.items():
        path = profile_file(spec)
        if not path.exists():
            raise LaunchFailure(f"profile for backend {name} not found: {spec}")
        profiles[name] = load_profile(path)
    if cfg.artifact is not None and not Path(cfg.artifact).exists():
        raise LaunchFailure(f"classifier artifact not found: {cfg.artifact}")
    corpus = ingest_corpus(cfg.corpus)
    pipeline = load_pipeline(cfg, corpus)
    source = PromptSource(corpus.documents)

    # self-describing output: config, artifact, route table and checksums
    cfg.save(out / "config.json")
    artifact = out / "artifact.bin"
    if cfg.artifact is not None:
        shutil.copyfile(cfg.artifact, artifact)
    else:
        pipeline.save(artifact)
    checksums = {"artifact.bin": sha256_file(artifact),
                 "corpus": sha256_file(cfg.corpus or bundled_corpus_path())}
    for name, spec in sorted(cfg.profiles.items()):
        checksums[f"profile:{name}"] = sha256_file(profile_file(spec))
    (out / "checksums.json").write_text(json.dumps(checksums, indent=2, sort_keys=True) + "\n", "utf-8")

    rounds, failures, run_dirs = [], [], []
    for n in cfg.concurrency_levels:
        for rep in range(cfg.repeats):
            run_dir = out / "runs" / f"n{n:05d}-r{rep:02d}"
            try:
                info = await _round(cfg, profiles, pipeline, source, n, rep, run_dir)
            except (LoadAborted, LaunchFailure, OSError) as e:
                log.error("round n=%d repeat=%d failed: %s", n, rep, e)
                failures.append({"concurrency": n, "repeat": rep, "error": f"{type(e).__name__}: {e}"})
                continue
            info["routing"] = check_routing(run_dir, cfg, pipeline)
            (run_dir / "routing_check.json").write_text(json.dumps(info["routing"], indent=2) + "\n", "utf-8")
            rounds.append(info)
            run_dirs.append(run_dir)

    (out / "rounds.json").write_text(json.dumps(rounds, indent=2) + "\n", "utf-8")
    if failures:
        (out / "failures.json").write_text(json.dumps(failures, indent=2) + "\n", "utf-8")
    if run_dirs:
        summarize(run_dirs, cfg.window_s, out_dir=out)
    else:
        raise LaunchFailure(f"every round failed: {failures}")
    return out


def run_experiment(cfg: ExperimentConfig) -> Path:
    """Run every concurrency level x repeat of ``cfg`` and summarize into ``cfg.output_dir``.

    Failed rounds are listed in ``failures.json``; the completed ones are
    still summarized.
    """
    return asyncio.run(run_experiment_async(cfg))
