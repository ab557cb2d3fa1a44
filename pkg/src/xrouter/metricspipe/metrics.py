"""User- and system-centric metrics over token event logs.

Records only need ``t_send_ns``, ``stamps`` (token receive times) and
``t_end_ns``; all times are integer nanoseconds, results are seconds.
"""
import math
import statistics
from dataclasses import dataclass

from ..errors import EmptyInput, EmptyLog, NoTokens, TooFewTokens, ZeroDuration

NS = 1e9


def ttft(r) -> float:
    if not r.stamps:
        raise NoTokens(f"{getattr(r, 'request_id', '?')}: no tokens")
    return (r.stamps[0] - r.t_send_ns) / NS


def tpot(r) -> float:
    n = len(r.stamps)
    if n < 2:
        raise TooFewTokens(f"{getattr(r, 'request_id', '?')}: tpot needs >= 2 tokens")
    return (r.stamps[-1] - r.stamps[0]) / (n - 1) / NS


def response_time(r) -> float:
    return (r.t_end_ns - r.t_send_ns) / NS


def user_throughput(r) -> float:
    dur = r.t_end_ns - r.t_send_ns
    if dur <= 0:
        raise ZeroDuration(f"{getattr(r, 'request_id', '?')}: t_end <= t_send")
    return len(r.stamps) / (dur / NS)


def percentile(values, p: float):
    """Nearest-rank percentile: the ``ceil(p/100 * n)``-th smallest value."""
    if not 0 < p <= 100:
        raise ValueError("p must lie in (0, 100]")
    s = sorted(values)
    if not s:
        raise EmptyInput("percentile of an empty sequence")
    rank = math.ceil(p / 100.0 * len(s))
    return s[max(rank, 1) - 1]


def quantiles(values) -> dict:
    return {
        "min": min(values),
        "p25": percentile(values, 25),
        "median": percentile(values, 50),
        "p75": percentile(values, 75),
        "max": max(values),
    }


def mean_std(values) -> tuple[float, float]:
    """Mean and population standard deviation, both correctly rounded."""
    values = [float(v) for v in values]
    if not values:
        raise EmptyInput("mean of an empty sequence")
    m = statistics.mean(values)
    return m, statistics.pstdev(values)


@dataclass
class WindowedThroughput:
    window_s: float
    start_ns: int
    counts: list
    series: list
    mean: float

    @property
    def peak(self) -> float:
        return max(self.series)


def windowed_throughput(send_times, token_times, window_seconds: float = 2.0) -> WindowedThroughput:
    """Token counts in fixed windows over ``[first send, last token)``.

    ``K = ceil(span / window)`` (at least one window); a token stamped
    exactly at the end of the span is counted in the last window.
    """
    if window_seconds <= 0:
        raise ValueError("window_seconds must be > 0")
    token_times = list(token_times)
    send_times = list(send_times)
    if not token_times and not send_times:
        raise EmptyLog("no events")
    start = min(send_times) if send_times else min(token_times)
    end = max(token_times) if token_times else start
    w = int(round(window_seconds * NS))
    span = max(0, end - start)
    k = max(1, -(-span // w))
    counts = [0] * k
    for t in token_times:
        i = (t - start) // w
        if i >= k:
            i = k - 1
        elif i < 0:
            i = 0
        counts[i] += 1
    series = [c / window_seconds for c in counts]
    return WindowedThroughput(window_seconds, start, counts, series, math.fsum(series) / k)
