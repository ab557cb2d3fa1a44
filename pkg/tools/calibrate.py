"""Check the shipped A-E profiles against the qualitative orderings offline.

Runs the closed-loop discrete-event simulation (the same scheduling as a
lockstep networked run, with prompts routed by their category) and prints
the metrics the orderings are stated on.

    python tools/calibrate.py [--seeds 0 1 2] [--rpu 2]
"""
import argparse
import json
from importlib import resources

from xrouter.loadgen import PromptSource, WorkloadSpec, plan_run
from xrouter.metricspipe import summarize_sessions
from xrouter.routecore import request_slot
from xrouter.simbackend import SimRequest, load_profile, simulate_closed_loop

CONFIGS = {
    "A": ("A", 1),
    "B": ("B", 1),
    "C": ("C", 2),
    "D": ("D", 8),
    "E": ("E", 8),
}


def route(cfg, req):
    n = CONFIGS[cfg][1]
    if n == 8:
        return req.category
    if n == 2:
        return request_slot(req.id, 2)
    return 0


def run(cfg, workload, n_users, seed, rpu, source):
    prof = load_profile(CONFIGS[cfg][0])
    spec = WorkloadSpec.normal(requests_per_user=rpu) if workload == "normal" else WorkloadSpec.uniform(requests_per_user=rpu)
    plans = plan_run(spec, source, seed, n_users, f"n{n_users}")
    users = [[SimRequest(r.id, r.input_tokens, r.max_tokens, route(cfg, r)) for r in p] for p in plans]
    recs = simulate_closed_loop([prof] * CONFIGS[cfg][1], users, seed=seed)
    return summarize_sessions([recs], 2.0)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--levels", type=int, nargs="+", default=[50, 100, 200])
    ap.add_argument("--rpu", type=int, default=2)
    args = ap.parse_args()
    docs = [json.loads(x) for x in resources.files("xrouter.data").joinpath("corpus.jsonl").read_text().splitlines()]
    source = PromptSource(docs)
    ok_all = True
    for seed in args.seeds:
        for n in args.levels:
            res = {}
            for cfg in "ABCDE":
                for wl in ("normal", "uniform") if cfg in "DE" else ("normal",):
                    res[cfg, wl] = run(cfg, wl, n, seed, args.rpu, source)
            line = []
            for (cfg, wl), s in res.items():
                line.append(f"{cfg}{wl[0]} ttftmin={s['ttft']['min']*1e3:6.1f}ms tpot={s['tpot']['median']*1e3:5.1f}ms "
                            f"uthr={s['user_throughput']['mean']:6.1f} peak={s['system_throughput']['peak']:7.0f} "
                            f"mean={s['system_throughput']['mean']:7.0f}")
            print(f"--- seed {seed} N={n}")
            print("\n".join(line))
            base_min = max(res[c, "normal"]["ttft"]["min"] for c in "ABC")
            exp_min = min(res[c, w]["ttft"]["min"] for c in "DE" for w in ("normal", "uniform"))
            a = base_min < exp_min
            e_tpot = min(res["E", w]["tpot"]["median"] for w in ("normal", "uniform"))
            others = min(res[k]["tpot"]["median"] for k in res if k[0] != "E")
            b = max(res["E", w]["tpot"]["median"] for w in ("normal", "uniform")) < others
            c_vals = []
            for cfg in "DE":
                u = res[cfg, "uniform"]["user_throughput"]["mean"]
                v = res[cfg, "normal"]["user_throughput"]["mean"]
                c_vals.append(abs(u - v) / max(u, v))
            c = max(c_vals) <= 0.10
            print("c per cfg", [round(x, 3) for x in c_vals])
            d_peak = max(res["D", w]["system_throughput"]["peak"] for w in ("normal", "uniform"))
            d = d_peak < min(res[k]["system_throughput"]["peak"] for k in res if k[0] != "D")
            print(f"a={a} ({base_min*1e3:.1f} < {exp_min*1e3:.1f})  b={b} ({e_tpot*1e3:.2f} vs {others*1e3:.2f})  "
                  f"c={c} ({max(c_vals):.3f})  d={d}")
            ok_all &= a and b and c and d
    print("ALL OK" if ok_all else "SOME ORDERING FAILED")


if __name__ == "__main__":
    main()
