"""Aggregate run directories into summary.json / summary.csv / SVG charts."""
import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import EmptyInput
from . import svg
from .metrics import mean_std, percentile, quantiles, response_time, tpot, ttft, user_throughput, windowed_throughput

log = logging.getLogger(__name__)


@dataclass
class LoggedSession:
    request_id: str
    user_id: int
    category: int
    t_send_ns: int = 0
    stamps: list = field(default_factory=list)
    t_end_ns: int | None = None
    ok: bool = False


@dataclass
class LoadedRun:
    path: Path
    run_id: str
    concurrency: int
    scenario: str
    sessions: list


def read_events(path) -> list:
    """Parse an ``events.csv`` into per-request sessions (in first-seen order)."""
    sessions: dict[str, LoggedSession] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            rid = row["request_id"]
            s = sessions.get(rid)
            if s is None:
                s = sessions[rid] = LoggedSession(rid, int(row["user_id"]), int(row["category"]))
            ev = row["event"]
            t = int(row["t_ns"])
            if ev == "send":
                s.t_send_ns = t
            elif ev == "tok":
                s.stamps.append(t)
            elif ev == "end":
                s.t_end_ns = t
                s.ok = True
            elif ev == "err":
                s.t_end_ns = t
            else:
                raise ValueError(f"unknown event {ev!r}")
    return list(sessions.values())


def load_run(run_dir) -> LoadedRun:
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "run.json").read_text("utf-8"))
    sessions = read_events(run_dir / "events.csv")
    return LoadedRun(run_dir, meta["run_id"], int(meta["concurrency"]), meta.get("scenario", ""), sessions)


def summarize_sessions(runs, window_s: float = 2.0) -> dict:
    """Metrics for one (concurrency, scenario) group; ``runs`` is a list of
    session lists (one per repeat). Sessions of all repeats are pooled for
    the per-session metrics; windowed throughput is computed per repeat."""
    pooled = [s for run in runs for s in run]
    ok = [s for s in pooled if s.ok and s.stamps]
    if not ok:
        raise EmptyInput("no completed sessions")
    ttfts = [ttft(s) for s in ok]
    tpots = [tpot(s) for s in ok if len(s.stamps) >= 2]
    uthr = [user_throughput(s) for s in ok if s.t_end_ns > s.t_send_ns]
    resp = [response_time(s) for s in ok]
    m, sd = mean_std(uthr)
    windows = []
    for run in runs:
        toks = [t for s in run for t in s.stamps]
        if toks:
            windows.append(windowed_throughput([s.t_send_ns for s in run], toks, window_s))
    width = max(len(w.series) for w in windows)
    series = []
    for i in range(width):
        vals = [w.series[i] for w in windows if i < len(w.series)]
        series.append(sum(vals) / len(vals))
    return {
        "n_sessions": len(pooled),
        "n_errors": len(pooled) - len([s for s in pooled if s.ok]),
        "repeats": len(runs),
        "ttft": quantiles(ttfts),
        "tpot": quantiles(tpots) if tpots else None,
        "user_throughput": {"mean": m, "std": sd},
        "p99_response_s": percentile(resp, 99),
        "system_throughput": {
            "window_s": window_s,
            "series": series,
            "mean": sum(w.mean for w in windows) / len(windows),
            "peak": max(w.peak for w in windows),
        },
    }


def summarize(run_dirs, window: float = 2.0, out_dir=None) -> dict:
    """Summarize run directories grouped by (concurrency, scenario).

    Unreadable runs are logged and skipped; no readable run is an error.
    """
    groups: dict = {}
    skipped = []
    for d in run_dirs:
        try:
            run = load_run(d)
        except (OSError, ValueError, KeyError) as e:
            log.warning("skipping run %s: %s", d, e)
            skipped.append({"run": str(d), "error": str(e)})
            continue
        groups.setdefault((run.concurrency, run.scenario), []).append(run)
    if not groups:
        raise EmptyInput("no readable runs")
    out = []
    for (conc, scen) in sorted(groups):
        runs = sorted(groups[(conc, scen)], key=lambda r: r.run_id)
        try:
            entry = {"concurrency": conc, "scenario": scen}
            entry.update(summarize_sessions([r.sessions for r in runs], window))
        except EmptyInput as e:
            skipped.extend({"run": str(r.path), "error": str(e)} for r in runs)
            continue
        out.append(entry)
    if not out:
        raise EmptyInput("no run produced completed sessions")
    summary = {"runs": out}
    if out_dir is not None:
        write_report(summary, out_dir, skipped)
    return summary


CSV_HEADER = [
    "concurrency", "scenario", "n_sessions", "n_errors",
    "ttft_min", "ttft_p25", "ttft_median", "ttft_p75", "ttft_max",
    "tpot_min", "tpot_p25", "tpot_median", "tpot_p75", "tpot_max",
    "user_throughput_mean", "user_throughput_std", "p99_response_s",
    "system_throughput_mean", "system_throughput_peak", "window_s",
]


def _csv_row(e: dict) -> list:
    q = ("min", "p25", "median", "p75", "max")
    tp = e["tpot"] or {k: "" for k in q}
    st = e["system_throughput"]
    return ([e["concurrency"], e["scenario"], e["n_sessions"], e["n_errors"]]
            + [e["ttft"][k] for k in q] + [tp[k] for k in q]
            + [e["user_throughput"]["mean"], e["user_throughput"]["std"], e["p99_response_s"],
               st["mean"], st["peak"], st["window_s"]])


def write_report(summary: dict, out_dir, skipped=()) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", "utf-8")
    with open(out / "summary.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for e in summary["runs"]:
            w.writerow(_csv_row(e))
    if skipped:
        (out / "skipped.json").write_text(json.dumps(list(skipped), indent=2) + "\n", "utf-8")
    svg.write_charts(summary, out / "charts")
    return out
