"""Batch size x variant x tensor-parallel sweep in virtual time.

Every cell is a closed-loop run of the discrete-event simulation (the same
engine and scheduling as a lockstep networked run) and reports the virtual
total time until the last response finishes.
"""
import csv
import json
import logging
from pathlib import Path

from ..loadgen import PromptSource, plan_run
from ..metricspipe import mean_std
from ..metricspipe.svg import heatmap_chart
from ..simbackend import ModelProfile, SimRequest, load_profile, makespan, simulate_closed_loop
from .config import SweepConfig
from .corpus import ingest_corpus

log = logging.getLogger(__name__)

RAW_HEADER = ["request_id", "user_id", "input_tokens", "t_send_ns", "t_end_ns", "n_tokens", "reason"]


def sweep_profile(base: ModelProfile, tp: int, batch_size: int, usable_gb_per_gpu: float) -> ModelProfile:
    kv = tp * usable_gb_per_gpu - base.weights_gb
    if kv <= 0:
        raise ValueError(f"{base.name}: weights do not fit on {tp} GPUs")
    return base.with_(name=f"{base.name}-tp{tp}-bs{batch_size}", tp_degree=tp, max_batch=batch_size,
                      kv_cache_gb=round(kv, 6))


def config_name(variant: str, tp: int, batch_size: int) -> str:
    return f"{variant}-tp{tp}-bs{batch_size}"


def write_raw(records, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(RAW_HEADER)
        for r in sorted(records, key=lambda r: r.request_id):
            w.writerow([r.request_id, r.user_id, r.input_tokens, r.t_send_ns, r.t_end_ns, r.n_tokens, r.reason])


def raw_total_ns(path) -> int:
    """Total time of one repeat as recorded in its raw file."""
    with open(path, newline="") as f:
        return max((int(row["t_end_ns"]) for row in csv.DictReader(f)), default=0)


def run_sweep(cfg: SweepConfig, corpus=None) -> Path:
    out = Path(cfg.output_dir)
    (out / "raw").mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8")
    bundle = corpus if corpus is not None else ingest_corpus()
    source = PromptSource(bundle.documents)
    workload = cfg.workload()
    bases = {v: load_profile(spec) for v, spec in cfg.variants.items()}

    # users' requests depend on (seed, repeat, user) only, so level N+100 extends level N
    plans = {}
    top = cfg.concurrency_levels[-1]
    for rep in range(cfg.repeats):
        plans[rep] = plan_run(workload, source, cfg.seed + rep, top, f"r{rep:02d}")

    cells = []
    for tp in cfg.tp_degrees:
        for variant in cfg.variants:
            for bs in cfg.batch_sizes:
                name = config_name(variant, tp, bs)
                prof = sweep_profile(bases[variant], tp, bs, cfg.usable_gb_per_gpu)
                cdir = out / "raw" / name
                cdir.mkdir(exist_ok=True)
                for n in cfg.concurrency_levels:
                    totals = []
                    for rep in range(cfg.repeats):
                        users = [[SimRequest(r.id, r.input_tokens, r.max_tokens, 0) for r in p] for p in plans[rep][:n]]
                        recs = simulate_closed_loop([prof], users, seed=cfg.seed + rep, record_tokens=False)
                        write_raw(recs, cdir / f"n{n:05d}-r{rep:02d}.csv")
                        totals.append(makespan(recs) / 1e9)
                    m, sd = mean_std(totals)
                    cells.append({"config": name, "variant": variant, "tp": tp, "batch_size": bs, "concurrency": n,
                                  "mean_s": m, "std_s": sd, "repeats": cfg.repeats, "totals_s": totals})
                log.info("sweep %s done", name)

    write_heatmap(cells, cfg.concurrency_levels, out)
    return out


def write_heatmap(cells, levels, out) -> None:
    out = Path(out)
    (out / "cells.json").write_text(json.dumps(cells, indent=2) + "\n", "utf-8")
    rows = []
    for c in cells:
        if c["config"] not in rows:
            rows.append(c["config"])
    by = {(c["config"], c["concurrency"]): c for c in cells}
    with open(out / "heatmap.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["config"] + [f"n{n}_{k}" for n in levels for k in ("mean_s", "std_s")])
        for r in rows:
            w.writerow([r] + [repr(by[r, n][k]) for n in levels for k in ("mean_s", "std_s")])
    for tp in sorted({c["tp"] for c in cells}):
        sel = [r for r in rows if by[r, levels[0]]["tp"] == tp]
        values = [[by[r, n]["mean_s"] for n in levels] for r in sel]
        (out / f"heatmap_tp{tp}.svg").write_text(
            heatmap_chart(f"Total time, TP {tp}", sel, [str(n) for n in levels], values), "utf-8")
