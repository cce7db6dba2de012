"""Hand-built tick sequences and brute-force metric oracles for tests."""

import datetime
import math

import numpy as np

from ofilab import TickRecord, TickSeries

BASE_MS = 1_000_000

_DEFAULTS = dict(last=100.2, bid=100.0, bq=5, ask=100.4, aq=5, sid="A")


def tick(i, **over):
    """One snapshot with defaults; timestamp/volume advance with the index."""
    r = dict(_DEFAULTS, **over)
    return TickRecord(
        timestamp_ms=r.get("ts", BASE_MS + 500 * i),
        last_price=r["last"],
        cum_volume=r.get("vol", i),
        bid_price=r["bid"],
        bid_qty=r["bq"],
        ask_price=r["ask"],
        ask_qty=r["aq"],
        session_id=r["sid"],
    )


def build(rows):
    """TickSeries from a list of per-row override dicts."""
    return TickSeries.from_records(tick(i, **over) for i, over in enumerate(rows))


def flat_session(n, sid="A", start=0, **over):
    """n identical-book ticks (e_n = 0 throughout after the first)."""
    return [dict(sid=sid, ts=BASE_MS + 500 * (start + j), vol=j, **over) for j in range(n)]


def month_start_ms(year, month):
    dt = datetime.datetime(year, month, 1, tzinfo=datetime.timezone.utc)
    return int(dt.timestamp() * 1000)


def concat_synthetic(configs):
    """One TickSeries from several generator runs (columnwise concat)."""
    from ofilab import generate_synthetic

    parts = [generate_synthetic(c) for c in configs]
    cols = {}
    for name in ("timestamp_ms", "last_price", "cum_volume", "bid_price",
                 "bid_qty", "ask_price", "ask_qty", "session_id"):
        cols[name] = np.concatenate([getattr(p, name) for p in parts])
    return TickSeries(**cols)


# ---------------------------------------------------------------------------
# brute-force recomputation, sharing no code with the streaming implementation


def brute_e(prev, cur, convention="canonical"):
    e = 0.0
    if cur.bid_price >= prev.bid_price:
        e += cur.bid_qty
    if cur.bid_price <= prev.bid_price:
        e -= prev.bid_qty
    drop_qty = cur.ask_qty if convention == "canonical" else prev.ask_qty
    if cur.ask_price <= prev.ask_price:
        e -= drop_qty
    if cur.ask_price >= prev.ask_price:
        e += prev.ask_qty
    return e


def brute_omega(prev, cur):
    v = cur.cum_volume - prev.cum_volume
    mid = (cur.bid_price + cur.ask_price) / 2
    if cur.last_price > mid:
        sign = 1.0
    elif cur.last_price < mid:
        sign = -1.0
    else:
        sign = 1.0 if cur.last_price >= prev.last_price else -1.0
    return sign * v


def brute_contributions(ticks, convention="canonical"):
    """Per-tick (e, omega, running session mean of e) via a plain row loop."""
    rows = [ticks.row(i) for i in range(len(ticks))]
    n = len(rows)
    e = [math.nan] * n
    omega = [math.nan] * n
    run_mean = [math.nan] * n
    sum_e, count = 0.0, 0
    for i in range(n):
        if i == 0 or rows[i - 1].session_id != rows[i].session_id:
            sum_e, count = 0.0, 0
            continue
        e[i] = brute_e(rows[i - 1], rows[i], convention)
        omega[i] = brute_omega(rows[i - 1], rows[i])
        sum_e += e[i]
        count += 1
        run_mean[i] = sum_e / count
    return rows, e, omega, run_mean


def brute_window_metrics(ticks, windows, convention="canonical"):
    """Recompute all five metrics per window from scratch."""
    rows, e, omega, run_mean = brute_contributions(ticks, convention)
    out = {k: [] for k in ("OFI", "TI", "Lambda", "AvgEn", "DP")}
    for w in windows:
        span = range(w.start_idx, w.end_idx + 1)
        out["OFI"].append(sum(e[i] for i in span))
        out["TI"].append(sum(omega[i] for i in span))
        if w.n_events:
            lasts = [rows[i].last_price for i in span]
            out["Lambda"].append((max(lasts) - min(lasts)) / w.n_events)
        else:
            out["Lambda"].append(math.nan)
        rm_end = run_mean[w.end_idx]
        rm_start = run_mean[w.boundary_idx]
        if w.n_events == 0:
            out["AvgEn"].append(0.0 if not math.isnan(rm_end) else math.nan)
        elif math.isnan(rm_start):
            out["AvgEn"].append(math.nan)
        else:
            out["AvgEn"].append(rm_end - rm_start)
        mid_b = (rows[w.end_idx].bid_price + rows[w.end_idx].ask_price) / 2
        mid_a = (rows[w.boundary_idx].bid_price + rows[w.boundary_idx].ask_price) / 2
        out["DP"].append(mid_b - mid_a)
    return out
