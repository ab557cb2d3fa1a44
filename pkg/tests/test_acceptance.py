"""Acceptance criteria 1-9, each reported as one PASS/FAIL line."""
import asyncio
import csv
import json
import random
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from helpers import as_tuples, drive_engine, profile_dict, random_profile, random_trace
from oracles import (
    exact_mean_pstd,
    exact_singular_values,
    gram_pipeline,
    histogram_windows,
    nearest_rank,
    pairwise_tpot,
    replay_engine,
    scan_ttft,
    two_pass_mean_std,
)
from xrouter.benchctl import ExperimentConfig, SweepConfig, ingest_corpus, run_experiment, train
from xrouter.benchctl.sweep import run_sweep
from xrouter.clusterkit import ClusterPipeline, randomized_svd
from xrouter.loadgen import PromptSource, WorkloadSpec, plan_run
from xrouter.metricspipe import mean_std, percentile, tpot, ttft, user_throughput, windowed_throughput
from xrouter.routecore import Balancer, Gateway, RouteTable, protocol


def report(n, title, ok, detail):
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    print(line)
    ACCEPTANCE.append(line)
    assert ok, line


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


# ------------------------------------------------------------------ 1
def test_criterion_1_classifier_oracle():
    t0 = time.perf_counter()
    corpus = ingest_corpus()
    pipe, _ = train(corpus, k=8, seed=0)
    classify, oracle_sv = gram_pipeline(corpus.texts, pipe.labels_, pipe.stopwords_, pipe.dim_)
    plans = plan_run(WorkloadSpec.uniform(), PromptSource(corpus.documents), 1, 1000, "acc1")
    prompts = [p[0].prompt for p in plans]
    agree = sum(pipe.classify(t) == classify(t) for t in prompts)

    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(40):
        n, m = int(rng.integers(1, 51)), int(rng.integers(1, 51))
        A = rng.standard_normal((n, m))
        d = min(n, m)
        s, _ = randomized_svd(A, d, seed=int(rng.integers(1 << 31)))
        exact = exact_singular_values(A)[:d]
        rel = np.abs(s - exact) / np.maximum(exact, 1e-300)
        worst = max(worst, float(rel[exact > 1e-9 * exact[0]].max()))
    elapsed = time.perf_counter() - t0
    report(1, "classifier matches independent Gram-matrix pipeline",
           agree == 1000 and worst <= 1e-6 and elapsed < 60,
           f"{agree}/1000 agree, worst small-SVD rel err {worst:.1e}, {elapsed:.1f} s")


# ------------------------------------------------------------------ 2
def test_criterion_2_routing_end_to_end(tmp_path):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(scenario="normal", topology="expert_E", concurrency_levels=[50], time_scale=0.001,
                           workload=WorkloadSpec.normal(requests_per_user=1), control_round=False,
                           output_dir=str(tmp_path / "e"))
    out = run_experiment(cfg)
    run = out / "runs" / "n00050-r00"
    pipe = ClusterPipeline.load(out / "artifact.bin")
    client = {r["request_id"]: r for r in read_csv(run / "sessions.csv")}
    served, checksum_ok, routed_ok = {}, 0, 0
    for c in range(8):
        for row in read_csv(run / f"backend_b{c}_sessions.csv"):
            served[row["request_id"]] = (c, row)
    for rid, r in client.items():
        if rid not in served:
            continue
        backend, row = served[rid]
        routed_ok += backend == pipe.classify(r["prompt"])
        checksum_ok += (row["crc32"], row["bytes"]) == (r["crc32"], r["bytes"]) and r["reason"] in ("eos", "cap")
    elapsed = time.perf_counter() - t0
    n = len(client)
    report(2, "every session served by its cluster's backend, relay byte-identical",
           n == 50 and routed_ok == n and checksum_ok == n and elapsed < 120,
           f"{routed_ok}/{n} routed, {checksum_ok}/{n} checksums, {elapsed:.1f} s")


# ------------------------------------------------------------------ 3
def test_criterion_3_balancer_fairness(trained_pipeline):
    async def main():
        async def backend(reader, writer):
            f = protocol.decode(await reader.readline())
            writer.write(protocol.encode(protocol.end_frame(f["id"], 0, "eos")))
            await writer.drain()
            writer.close()

        be = await asyncio.start_server(backend, "127.0.0.1", 0, backlog=1024)
        ep = be.sockets[0].getsockname()[:2]
        routes = RouteTable({c: [ep] for c in range(8)}, k=8)
        gateways = [Gateway(trained_pipeline, routes) for _ in range(16)]
        for g in gateways:
            await g.start()
        bal = Balancer([g.endpoint for g in gateways])
        await bal.start()

        async def client(i):
            r, w = await asyncio.open_connection(*bal.endpoint)
            w.write(protocol.encode(protocol.req_frame(f"c{i}", "some prompt text", 1)))
            await w.drain()
            data = await r.read()
            w.close()
            return protocol.decode(data)["type"] == "end"

        ok = []
        for start in range(0, 1600, 100):
            ok += await asyncio.gather(*(client(i) for i in range(start, start + 100)))
        await bal.close()
        for g in gateways:
            await g.close()
        be.close()
        return sum(ok), [len(g.sessions) for g in gateways], bal.counts

    done, per_gateway, counts = asyncio.run(main())
    report(3, "1600 connections over 16 gateways",
           per_gateway == [100] * 16 and counts == [100] * 16 and done == 1600,
           f"per-gateway sessions min {min(per_gateway)} max {max(per_gateway)}, {done} completed")


# ------------------------------------------------------------------ 4
def test_criterion_4_engine_invariants():
    rng = np.random.default_rng(2024)
    violations = mismatches = 0
    first = None
    n_traces = 10_000
    for _ in range(n_traces):
        p = random_profile(rng)
        trace = random_trace(rng)
        seed = int(rng.integers(1 << 31))
        events, bad = drive_engine(p, seed, trace)
        if bad:
            violations += len(bad)
            first = first or bad[0]
        if as_tuples(events) != replay_engine(profile_dict(p), seed, trace):
            mismatches += 1
    report(4, "batching engine invariants and replay oracle",
           violations == 0 and mismatches == 0,
           f"{n_traces} traces, {violations} violations, {mismatches} replay mismatches"
           + (f", first: {first}" if first else ""))


# ------------------------------------------------------------------ 5
def _random_log(g):
    recs = []
    for i in range(g.randrange(1, 40)):
        send = g.randrange(0, 30 * 10**9)
        t = send + g.randrange(0, 2 * 10**9)
        stamps = []
        for _ in range(g.randrange(1, 80)):
            stamps.append(t)
            t += g.randrange(1, 10**8)
        recs.append((send, stamps, stamps[-1] + g.randrange(0, 10**4)))
    return recs


def test_criterion_5_metrics_oracles():
    from types import SimpleNamespace

    g = random.Random(77)
    bad = {"ttft": 0, "tpot": 0, "user_throughput": 0, "p99": 0, "window": 0}
    for _ in range(1000):
        log = _random_log(g)
        recs = [SimpleNamespace(request_id="r", t_send_ns=s, stamps=st, t_end_ns=e) for s, st, e in log]
        for r in recs:
            bad["ttft"] += ttft(r) != scan_ttft(r.t_send_ns, r.stamps)
            if len(r.stamps) >= 2:
                want = pairwise_tpot(r.stamps)
                bad["tpot"] += abs(tpot(r) - want) > 1e-9 * abs(want)
        thr = [user_throughput(r) for r in recs]
        m, sd = mean_std(thr)
        om, osd = two_pass_mean_std(thr)
        bad["user_throughput"] += abs(m - om) > 1e-9 * abs(om) or abs(sd - osd) > 1e-9 * max(abs(osd), 1e-300)
        resp = [(r.t_end_ns - r.t_send_ns) / 1e9 for r in recs]
        bad["p99"] += percentile(resp, 99) != nearest_rank(resp, 99)
        toks = [t for r in recs for t in r.stamps]
        sends = [r.t_send_ns for r in recs]
        w = windowed_throughput(sends, toks, 2.0)
        want = histogram_windows(sends, toks, 2.0)
        bad["window"] += w.counts != want or w.series != [c / 2.0 for c in want]
    report(5, "metrics equal brute-force recomputation on 1000 random logs", not any(bad.values()),
           ", ".join(f"{k} {v} mismatches" for k, v in bad.items()))


# ------------------------------------------------------------------ 6
def test_criterion_6_gateway_latency_stable(tmp_path):
    cfg = ExperimentConfig(scenario="latency", topology="custom", profiles={"b0": "probe"},
                           routes={str(c): ["b0"] for c in range(8)}, concurrency_levels=[10, 200],
                           workload=WorkloadSpec.normal(requests_per_user=5), time_scale=0.01, mode="free",
                           control_round=False, output_dir=str(tmp_path / "lat"))
    out = run_experiment(cfg)
    rounds = {r["concurrency"]: r for r in json.loads((out / "rounds.json").read_text())}
    lo, hi = rounds[10]["route_ns_median"], rounds[200]["route_ns_median"]
    ratio = hi / lo
    report(6, "median added gateway latency at N=200 vs N=10", ratio <= 2.0,
           f"{lo / 1e6:.2f} ms -> {hi / 1e6:.2f} ms, ratio {ratio:.2f}")


# ------------------------------------------------------------------ 7
def test_criterion_7_qualitative_orderings(tmp_path):
    t0 = time.perf_counter()
    levels = [50, 100, 200]
    runs = [("A", "normal"), ("B", "normal"), ("C", "normal"),
            ("D", "normal"), ("D", "uniform"), ("E", "normal"), ("E", "uniform")]
    topo = {"A": "baseline_A", "B": "baseline_B", "C": "baseline_C", "D": "expert_D", "E": "expert_E"}
    res = {}
    for cfg_name, wl in runs:
        spec = WorkloadSpec.normal(requests_per_user=2) if wl == "normal" else WorkloadSpec.uniform(requests_per_user=2)
        cfg = ExperimentConfig(scenario=wl, topology=topo[cfg_name], concurrency_levels=levels, workload=spec,
                               control_round=False, output_dir=str(tmp_path / f"{cfg_name}_{wl}"))
        summary = json.loads((run_experiment(cfg) / "summary.json").read_text())
        for e in summary["runs"]:
            res[cfg_name, wl, e["concurrency"]] = e
    elapsed = time.perf_counter() - t0

    failures = []
    for n in levels:
        base_min = max(res[c, "normal", n]["ttft"]["min"] for c in "ABC")
        exp_min = min(res[c, w, n]["ttft"]["min"] for c in "DE" for w in ("normal", "uniform"))
        if not base_min < exp_min:
            failures.append(f"a@{n}: {base_min:.4f} !< {exp_min:.4f}")
        e_tpot = max(res["E", w, n]["tpot"]["median"] for w in ("normal", "uniform"))
        other_tpot = min(res[k]["tpot"]["median"] for k in res if k[2] == n and k[0] != "E")
        if not e_tpot < other_tpot:
            failures.append(f"b@{n}: E {e_tpot:.4f} !< {other_tpot:.4f}")
        for c in "DE":
            u = res[c, "uniform", n]["user_throughput"]["mean"]
            v = res[c, "normal", n]["user_throughput"]["mean"]
            if abs(u - v) / max(u, v) > 0.10:
                failures.append(f"c@{n}: {c} differs {abs(u - v) / max(u, v):.3f}")
        d_peak = max(res["D", w, n]["system_throughput"]["peak"] for w in ("normal", "uniform"))
        other_peak = min(res[k]["system_throughput"]["peak"] for k in res if k[2] == n and k[0] != "D")
        if not d_peak < other_peak:
            failures.append(f"d@{n}: D {d_peak:.0f} !< {other_peak:.0f}")
    if elapsed >= 600:
        failures.append(f"runtime {elapsed:.0f} s")
    report(7, "orderings a-d at N=50,100,200", not failures,
           "; ".join(failures) if failures else f"all hold, {elapsed:.0f} s")


# ------------------------------------------------------------------ 8
def test_criterion_8_sweep(tmp_path):
    cfg = SweepConfig(output_dir=str(tmp_path / "sweep"))
    out = run_sweep(cfg)
    cells = json.loads((out / "cells.json").read_text())
    with open(out / "heatmap.csv", newline="") as f:
        heat = {row["config"]: row for row in csv.DictReader(f)}
    wrong = 0
    for c in cells:
        totals = []
        for rep in range(5):
            rows = read_csv(out / "raw" / c["config"] / f"n{c['concurrency']:05d}-r{rep:02d}.csv")
            if len(rows) != c["concurrency"]:
                wrong += 1
            totals.append(max(int(r["t_end_ns"]) for r in rows) / 1e9)
        m, sd = exact_mean_pstd(totals)
        row = heat[c["config"]]
        n = c["concurrency"]
        if (c["mean_s"], c["std_s"]) != (m, sd) or (float(row[f"n{n}_mean_s"]), float(row[f"n{n}_std_s"])) != (m, sd):
            wrong += 1
    complete = len(cells) == 100 and len(heat) == 20 and all(c["repeats"] == 5 for c in cells)
    report(8, "100-cell sweep heatmap equals raw-file recomputation", complete and wrong == 0,
           f"{len(cells)} cells, {len(heat)} rows, {wrong} mismatches")


# ------------------------------------------------------------------ 9
@pytest.mark.parametrize("topology", ["expert_E", "baseline_C"])
def test_criterion_9_determinism(tmp_path, topology):
    def once(name):
        cfg = ExperimentConfig(scenario="normal", topology=topology, concurrency_levels=[20, 60], repeats=2,
                               workload=WorkloadSpec.normal(requests_per_user=2), time_scale=0.0, seed=5,
                               control_round=False, output_dir=str(tmp_path / name))
        return (run_experiment(cfg) / "summary.json").read_bytes()

    a, b = once("a"), once("b")
    report(9, f"summary.json bit-identical on repeat ({topology})", a == b, f"{len(a)} bytes")
