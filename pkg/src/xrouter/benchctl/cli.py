"""``xr`` command line."""
import argparse
import asyncio
import json
import logging
import signal
import sys
from pathlib import Path

from ..errors import XRouterError
from .config import ExperimentConfig, SweepConfig, env_overrides

log = logging.getLogger("xrouter")


def _seed_default():
    return env_overrides().get("seed", 0)


def _ts_default(fallback):
    return env_overrides().get("time_scale", fallback)


async def _until_cancelled(*components, on_exit=None):
    stop = asyncio.Event()
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            loop.add_signal_handler(sig, stop.set)
        except (NotImplementedError, RuntimeError):
            pass
    try:
        await stop.wait()
    finally:
        for c in components:
            await c.close()
        if on_exit is not None:
            on_exit()


# ---------------------------------------------------------------- subcommands
def cmd_ingest(args):
    from .corpus import ingest_corpus

    bundle = ingest_corpus(args.path)
    print(f"{len(bundle.documents)} documents")
    for c, n in enumerate(bundle.counts()):
        print(f"category {c}: {n}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            for d in bundle.documents:
                f.write(json.dumps(d) + "\n")


def cmd_train(args):
    import numpy as np

    from .corpus import ingest_corpus
    from .train import format_confusion, train

    bundle = ingest_corpus(args.corpus)
    _, report = train(bundle, k=args.k, seed=args.seed, out_path=args.out)
    print(format_confusion(np.array(report["confusion"])))
    print(f"overall purity {report['purity']['overall']:.4f}")
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n", "utf-8")
    print(f"artifact written to {args.out}")


def cmd_classify(args):
    from ..clusterkit import ClusterPipeline

    pipe = ClusterPipeline.load(args.pipeline)
    texts = args.prompt or [sys.stdin.read()]
    for t in texts:
        print(pipe.classify(t))


def cmd_backend(args):
    from ..simbackend import BackendServer, load_profile

    async def main():
        srv = BackendServer(load_profile(args.profile), seed=args.seed, time_scale=args.time_scale,
                            log_path=args.log, sessions_path=args.sessions)
        host, port = await srv.start(*args.listen)
        print(f"backend {srv.profile.name} listening on {host}:{port}", flush=True)
        await _until_cancelled(srv)

    asyncio.run(main())


def cmd_gateway(args):
    from ..clusterkit import ClusterPipeline
    from ..routecore import Gateway, RouteTable

    async def main():
        pipe = ClusterPipeline.load(args.pipeline)
        routes = RouteTable.load(args.routes, k=len(pipe.cluster_centers_))
        gw = Gateway(pipe, routes, max_sessions=args.max_sessions)
        host, port = await gw.start(*args.listen)
        print(f"gateway listening on {host}:{port}", flush=True)
        on_exit = (lambda: gw.write_session_log(args.session_log)) if args.session_log else None
        await _until_cancelled(gw, on_exit=on_exit)

    asyncio.run(main())


def cmd_balance(args):
    from ..routecore import Balancer

    async def main():
        bal = Balancer(args.upstreams)
        host, port = await bal.start(*args.listen)
        print(f"balancer listening on {host}:{port} -> {len(args.upstreams)} upstreams", flush=True)
        await _until_cancelled(bal)

    asyncio.run(main())


def cmd_loadgen(args):
    from ..loadgen import WorkloadSpec, run_load
    from .corpus import ingest_corpus

    if args.spec:
        spec = WorkloadSpec.load(args.spec)
    elif args.scenario == "normal":
        spec = WorkloadSpec.normal(requests_per_user=args.rpu, max_tokens=args.max_tokens)
    else:
        spec = WorkloadSpec.uniform(requests_per_user=args.rpu, max_tokens=args.max_tokens)
    bundle = ingest_corpus(args.corpus)
    result = asyncio.run(run_load(args.target, args.users, spec, args.seed, bundle.documents, run_id=args.run_id,
                                  scenario=args.scenario, out_dir=args.out))
    print(f"{len(result.records)} requests, {result.errors} errors, {result.wall_duration_s:.2f} s; logs in {args.out}")


def cmd_run(args):
    from .experiment import run_experiment

    cfg = ExperimentConfig.load(args.config)
    if args.out:
        cfg.output_dir = args.out
    out = run_experiment(cfg)
    print(f"results in {out}")


def cmd_sweep(args):
    from .sweep import run_sweep

    cfg = SweepConfig.load(args.config) if args.config else SweepConfig(seed=_seed_default())
    if args.out:
        cfg.output_dir = args.out
    out = run_sweep(cfg)
    print(f"heatmap in {out / 'heatmap.csv'}")


def cmd_report(args):
    from ..metricspipe import summarize

    runs = [r for item in (args.runs or []) + args.run_dirs for r in item.split(",") if r]
    if not runs:
        raise ValueError("no run directories given")
    summary = summarize(runs, window=args.window, out_dir=args.out)
    for e in summary["runs"]:
        print(f"N={e['concurrency']:<5} {e['scenario'] or '-':<12} ttft_median={e['ttft']['median']:.4f}s "
              f"user_thr={e['user_throughput']['mean']:.2f} tok/s p99={e['p99_response_s']:.3f}s")


# ---------------------------------------------------------------- parser
def _listen(text):
    from ..routecore import parse_endpoint

    host, _, port = text.rpartition(":")
    if port == "0" and host:
        return host, 0
    return parse_endpoint(text)


def _endpoints(text):
    from ..routecore import parse_endpoint

    return [parse_endpoint(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xr", description="Prompt-routing inference testbed.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a JSONL corpus")
    p.add_argument("path", nargs="?", help="corpus file (default: bundled sample)")
    p.add_argument("--out", help="write the validated corpus here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train the prompt classifier")
    p.add_argument("--corpus", help="corpus file (default: bundled sample)")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--seed", type=int, default=_seed_default())
    p.add_argument("--out", required=True, help="artifact path")
    p.add_argument("--report", help="write the confusion matrix and purity as JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="print the cluster of each prompt (stdin if none given)")
    p.add_argument("--pipeline", "--artifact", dest="pipeline", required=True)
    p.add_argument("prompt", nargs="*")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("backend", help="run a simulated backend")
    p.add_argument("--profile", required=True, help="profile JSON or shipped name (A..E, probe, ...)")
    p.add_argument("--listen", type=_listen, default=("127.0.0.1", 0), help="H:P (port 0 picks a free one)")
    p.add_argument("--time-scale", type=float, default=_ts_default(1.0))
    p.add_argument("--seed", type=int, default=_seed_default())
    p.add_argument("--log", help="per-event diagnostic CSV")
    p.add_argument("--sessions", help="per-session CSV")
    p.set_defaults(func=cmd_backend)

    p = sub.add_parser("gateway", help="run a classifying gateway")
    p.add_argument("--pipeline", "--artifact", dest="pipeline", required=True, help="classifier artifact")
    p.add_argument("--routes", required=True, help='route table JSON {"clusters": {...}}')
    p.add_argument("--listen", type=_listen, default=("127.0.0.1", 0), help="H:P")
    p.add_argument("--max-sessions", type=int, default=2048)
    p.add_argument("--session-log", help="write the per-session CSV on exit")
    p.set_defaults(func=cmd_gateway)

    p = sub.add_parser("balance", help="run the round-robin balancer")
    p.add_argument("--upstreams", type=_endpoints, required=True, help="gateways as H:P,H:P,...")
    p.add_argument("--listen", type=_listen, default=("127.0.0.1", 0), help="H:P")
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("loadgen", help="run closed-loop users against an endpoint")
    p.add_argument("--target", required=True, help="host:port")
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--scenario", choices=("uniform", "normal"), default="uniform")
    p.add_argument("--spec", help="WorkloadSpec JSON (overrides --scenario/--rpu)")
    p.add_argument("--rpu", type=int, default=1, help="requests per user")
    p.add_argument("--max-tokens", type=int, default=1000)
    p.add_argument("--seed", type=int, default=_seed_default())
    p.add_argument("--corpus")
    p.add_argument("--run-id", default="run")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_loadgen)

    p = sub.add_parser("run", help="run a full experiment from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", help="override output_dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="batch size x variant x tp sweep")
    p.add_argument("config", nargs="?")
    p.add_argument("--out", help="override output_dir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarize run directories")
    p.add_argument("--runs", action="append", help="run directories, comma-separated (repeatable)")
    p.add_argument("run_dirs", nargs="*", help="more run directories")
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=float, default=2.0)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        args.func(args)
    except KeyboardInterrupt:
        return 130
    except (XRouterError, OSError, ValueError) as e:
        print(f"xr {args.command}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
