"""Minimal self-contained SVG charts (no plotting dependency).

Every chart embeds its data as JSON in a ``<metadata>`` element.
"""
import json
from pathlib import Path
from xml.sax.saxutils import escape

W, H = 640, 400
ML, MR, MT, MB = 70, 150, 40, 50
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _scale(lo, hi, a, b):
    if hi <= lo:
        hi = lo + 1.0
    return lambda v: a + (v - lo) / (hi - lo) * (b - a)


def _frame(title, xlabel, ylabel, x0, x1, y0, y1):
    sx = _scale(x0, x1, ML, W - MR)
    sy = _scale(y0, y1, H - MB, MT)
    parts = [
        f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" fill="none" stroke="#444"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<text x="{(ML + W - MR) / 2}" y="{H - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="16" y="{H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {H / 2})">{escape(ylabel)}</text>',
    ]
    for i in range(5):
        yv = y0 + (y1 - y0) * i / 4
        y = sy(yv)
        parts.append(f'<line x1="{ML - 4}" y1="{y:.1f}" x2="{W - MR}" y2="{y:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{ML - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="10">{_fmt(yv)}</text>')
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        x = sx(xv)
        parts.append(f'<text x="{x:.1f}" y="{H - MB + 14}" text-anchor="middle" font-size="10">{_fmt(xv)}</text>')
    return sx, sy, parts


def _doc(parts, data) -> str:
    meta = escape(json.dumps(data, sort_keys=True))
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">'
            f"<metadata>{meta}</metadata>" + "".join(parts) + "</svg>\n")


def line_chart(title, xlabel, ylabel, series: dict) -> str:
    """``series``: name -> list of (x, y)."""
    pts = [p for s in series.values() for p in s]
    xs = [p[0] for p in pts] or [0.0]
    ys = [p[1] for p in pts] or [0.0]
    x0, x1 = min(xs), max(xs)
    if x0 == x1:
        x0, x1 = x0 - 1, x1 + 1
    sx, sy, parts = _frame(title, xlabel, ylabel, x0, x1, 0.0, max(ys) * 1.1 or 1.0)
    for i, (name, s) in enumerate(sorted(series.items())):
        color = PALETTE[i % len(PALETTE)]
        s = sorted(s)
        if len(s) > 1:
            path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in s)
            parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in s:
            parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="{color}"/>')
        ly = MT + 16 * i + 8
        parts.append(f'<rect x="{W - MR + 10}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{W - MR + 24}" y="{ly + 1}" font-size="11">{escape(str(name))}</text>')
    return _doc(parts, {"title": title, "series": {k: sorted(v) for k, v in series.items()}})


def timeseries_chart(title, window_s: float, series: dict, means: dict) -> str:
    """Per-window throughput curves with an arrow marking each mean on the right axis."""
    ys = [v for s in series.values() for v in s] or [0.0]
    n = max((len(s) for s in series.values()), default=1)
    sx, sy, parts = _frame(title, "time (s)", "tokens/s", 0.0, n * window_s, 0.0, max(ys) * 1.1 or 1.0)
    for i, (name, s) in enumerate(sorted(series.items())):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx((k + 0.5) * window_s):.1f},{sy(v):.1f}" for k, v in enumerate(s))
        if len(s) > 1:
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        else:
            parts.append(f'<circle cx="{sx(0.5 * window_s):.1f}" cy="{sy(s[0]):.1f}" r="3" fill="{color}"/>')
        my = sy(means[name])
        ax = W - MR
        parts.append(f'<polygon points="{ax + 2},{my:.1f} {ax + 12},{my - 5:.1f} {ax + 12},{my + 5:.1f}" fill="{color}"/>')
        ly = MT + 16 * i + 8
        parts.append(f'<text x="{W - MR + 24}" y="{ly + 1}" font-size="11" fill="{color}">'
                     f'{escape(str(name))} (mean {_fmt(means[name])})</text>')
    return _doc(parts, {"title": title, "window_s": window_s, "series": series, "means": means})


def write_charts(summary: dict, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = summary["runs"]
    written = []
    metrics = [
        ("ttft_median", "Median TTFT", "s", lambda e: e["ttft"]["median"]),
        ("tpot_median", "Median TPOT", "s", lambda e: e["tpot"]["median"] if e["tpot"] else 0.0),
        ("user_throughput", "User throughput (mean)", "tokens/s", lambda e: e["user_throughput"]["mean"]),
        ("p99_response", "p99 response time", "s", lambda e: e["p99_response_s"]),
        ("system_throughput_mean", "Mean system throughput", "tokens/s", lambda e: e["system_throughput"]["mean"]),
    ]
    for fname, title, unit, get in metrics:
        series: dict = {}
        for e in runs:
            series.setdefault(e["scenario"] or "run", []).append((e["concurrency"], get(e)))
        path = out / f"{fname}.svg"
        path.write_text(line_chart(title, "concurrent users", unit, series), "utf-8")
        written.append(path)
    for conc in sorted({e["concurrency"] for e in runs}):
        sel = [e for e in runs if e["concurrency"] == conc]
        series = {e["scenario"] or "run": e["system_throughput"]["series"] for e in sel}
        means = {e["scenario"] or "run": e["system_throughput"]["mean"] for e in sel}
        window = sel[0]["system_throughput"]["window_s"]
        path = out / f"system_throughput_n{conc}.svg"
        path.write_text(timeseries_chart(f"System throughput, {conc} users", window, series, means), "utf-8")
        written.append(path)
    return written


def heatmap_chart(title, row_labels, col_labels, values, unit="s") -> str:
    """``values[i][j]`` for row i, column j; colour runs light to dark with the value."""
    flat = [v for row in values for v in row if v is not None] or [0.0]
    lo, hi = min(flat), max(flat)
    left, top, cw, ch = 130, 40, 70, 24
    w = left + cw * len(col_labels) + 20
    h = top + ch * len(row_labels) + 40
    parts = [f'<text x="{w / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>']
    for j, c in enumerate(col_labels):
        parts.append(f'<text x="{left + cw * j + cw / 2}" y="{top - 6}" text-anchor="middle" font-size="11">'
                     f'{escape(str(c))}</text>')
    for i, r in enumerate(row_labels):
        y = top + ch * i
        parts.append(f'<text x="{left - 6}" y="{y + ch / 2 + 4}" text-anchor="end" font-size="11">{escape(str(r))}</text>')
        for j, v in enumerate(values[i]):
            x = left + cw * j
            if v is None:
                fill, label = "#eee", "-"
            else:
                f = 0.0 if hi <= lo else (v - lo) / (hi - lo)
                g = int(round(235 - 190 * f))
                fill, label = f"rgb({g},{g},255)", _fmt(v)
            ink = "#fff" if v is not None and hi > lo and (v - lo) / (hi - lo) > 0.6 else "#000"
            parts.append(f'<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{fill}" stroke="#fff"/>')
            parts.append(f'<text x="{x + cw / 2}" y="{y + ch / 2 + 4}" text-anchor="middle" font-size="10" '
                         f'fill="{ink}">{label}</text>')
    parts.append(f'<text x="{left}" y="{h - 12}" font-size="11">cells: mean total time ({escape(unit)}); '
                 f'columns: concurrent users</text>')
    meta = escape(json.dumps({"title": title, "rows": row_labels, "columns": col_labels, "values": values},
                             sort_keys=True))
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">'
            f"<metadata>{meta}</metadata>" + "".join(parts) + "</svg>\n")
