"""Per-event order-flow and trade contributions, and windowed metrics.

Per adjacent in-session tick pair (n-1, n):

* e_n: signed best-quote imbalance, bid-side quantity gains minus
  ask-side quantity gains, with price-move indicator gating.
* omega_n: signed incremental volume, classified against the current
  snapshot's mid price (ties broken by comparison with the previous last
  price).

Windowed metrics over an event span (N(t_{k-1}), N(t_k)]:

* OFI_k: sum of e_n.
* TI_k: sum of omega_n.
* Lambda_k: (max - min of last_price over the span) / event count.
* AvgEn_k: running session mean of e_n at the window end minus the same
  at the window start boundary (counters restart at session starts).
* DP_k: mid price at the window end minus mid at the start boundary.

Everything is computed in one pass over cumulative arrays; the test suite
re-derives each window from scratch and demands exact equality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError
from .ticks import TickRecord, TickSeries

CANONICAL = "canonical"
# The lagged-ask variant evaluates both ask-side terms at the previous ask
# quantity, which makes them cancel whenever the ask price is unchanged.
LAGGED_ASK = "lagged-ask"
CONVENTIONS = (CANONICAL, LAGGED_ASK)

METRIC_KINDS = ("OFI", "TI", "Lambda", "AvgEn", "DP")


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ConfigError(f"unknown e_n convention {convention!r}; expected one of {CONVENTIONS}")


def mid_price(tick: TickRecord) -> float:
    """Bid-ask midpoint of one snapshot."""
    return 0.5 * (tick.bid_price + tick.ask_price)


def event_contribution(prev: TickRecord, cur: TickRecord, convention: str = CANONICAL) -> float:
    """Order-flow contribution e_n for one adjacent in-session tick pair."""
    _check_convention(convention)
    e = 0.0
    if cur.bid_price >= prev.bid_price:
        e += cur.bid_qty
    if cur.bid_price <= prev.bid_price:
        e -= prev.bid_qty
    ask_qty_drop = cur.ask_qty if convention == CANONICAL else prev.ask_qty
    if cur.ask_price <= prev.ask_price:
        e -= ask_qty_drop
    if cur.ask_price >= prev.ask_price:
        e += prev.ask_qty
    return e


def trade_contribution(prev: TickRecord, cur: TickRecord) -> float:
    """Signed incremental volume omega_n for one adjacent in-session pair."""
    v = cur.cum_volume - prev.cum_volume
    if v < 0:
        raise DataError(
            f"cum_volume decreased ({prev.cum_volume} -> {cur.cum_volume}) within a session"
        )
    mid = mid_price(cur)
    if cur.last_price > mid:
        sign = 1.0
    elif cur.last_price < mid:
        sign = -1.0
    else:
        sign = 1.0 if cur.last_price >= prev.last_price else -1.0
    return sign * v


@dataclass(frozen=True)
class EventContribution:
    """Per-tick contribution pair; valid=False on session-start ticks."""

    index: int
    e: Optional[float]
    omega: Optional[float]
    valid: bool


class ContributionSeries:
    """Columnar e_n / omega_n over a TickSeries (NaN where invalid)."""

    __slots__ = ("e", "omega", "valid", "convention")

    def __init__(self, e: np.ndarray, omega: np.ndarray, valid: np.ndarray, convention: str):
        self.e = e
        self.omega = omega
        self.valid = valid
        self.convention = convention

    def __len__(self) -> int:
        return len(self.e)

    def row(self, i: int) -> EventContribution:
        if self.valid[i]:
            return EventContribution(i, float(self.e[i]), float(self.omega[i]), True)
        return EventContribution(i, None, None, False)


def contributions(ticks: TickSeries, convention: str = CANONICAL) -> ContributionSeries:
    """Vectorized e_n and omega_n; session-start ticks are invalid (NaN)."""
    _check_convention(convention)
    n = len(ticks)
    e = np.full(n, np.nan)
    omega = np.full(n, np.nan)
    valid = ticks.in_session.copy()
    if n > 1:
        bp, ap = ticks.bid_price, ticks.ask_price
        bq = ticks.bid_qty.astype(np.float64)
        aq = ticks.ask_qty.astype(np.float64)
        up_b = bp[1:] >= bp[:-1]
        dn_b = bp[1:] <= bp[:-1]
        dn_a = ap[1:] <= ap[:-1]
        up_a = ap[1:] >= ap[:-1]
        ask_qty_drop = aq[1:] if convention == CANONICAL else aq[:-1]
        e_all = up_b * bq[1:] - dn_b * bq[:-1] - dn_a * ask_qty_drop + up_a * aq[:-1]

        v = (ticks.cum_volume[1:] - ticks.cum_volume[:-1]).astype(np.float64)
        neg = (v < 0) & valid[1:]
        if neg.any():
            i = int(np.flatnonzero(neg)[0]) + 1
            raise DataError(f"cum_volume decreased within a session at tick index {i}")
        mid = ticks.mid_price()
        last = ticks.last_price
        above = last[1:] > mid[1:]
        below = last[1:] < mid[1:]
        tie_up = last[1:] >= last[:-1]
        sign = np.where(above, 1.0, np.where(below, -1.0, np.where(tie_up, 1.0, -1.0)))
        omega_all = sign * v

        e[1:][valid[1:]] = e_all[valid[1:]]
        omega[1:][valid[1:]] = omega_all[valid[1:]]
    return ContributionSeries(e=e, omega=omega, valid=valid, convention=convention)


@dataclass(frozen=True)
class MetricWindow:
    """Event span (start_idx .. end_idx inclusive) with wall-clock labels.

    start_idx is the first event tick N(t_{k-1})+1 and end_idx the last,
    N(t_k).  A zero-event window (possible under wall-clock bucketing) is
    encoded as start_idx == end_idx + 1; end_idx is then still the
    boundary tick shared with the neighbouring window.
    """

    start_idx: int
    end_idx: int
    start_ms: int
    end_ms: int

    def __post_init__(self):
        if self.start_idx < 1 or self.start_idx > self.end_idx + 1:
            raise ConfigError(
                f"invalid window indices [{self.start_idx}, {self.end_idx}]"
            )

    @property
    def n_events(self) -> int:
        return self.end_idx - self.start_idx + 1

    @property
    def boundary_idx(self) -> int:
        """Tick N(t_{k-1}) whose state anchors DP and AvgEn differences."""
        return self.start_idx - 1


def windows_by_ticks(ticks: TickSeries, width: int) -> list[MetricWindow]:
    """Non-overlapping windows of `width` events per session; partial tails dropped."""
    if width < 1:
        raise ConfigError(f"window width must be >= 1, got {width}")
    out: list[MetricWindow] = []
    ts = ticks.timestamp_ms
    for _, rows in ticks.session_slices():
        s, stop = rows.start, rows.stop
        first = s + 1
        while first + width - 1 < stop:
            last = first + width - 1
            out.append(MetricWindow(first, last, int(ts[first - 1]), int(ts[last])))
            first = last + 1
    return out


def windows_by_seconds(ticks: TickSeries, width_s: float) -> list[MetricWindow]:
    """Wall-clock windows anchored at each session's first timestamp.

    Boundaries sit at t0 + j*width; window j holds events with timestamp
    in (b_{j-1}, b_j].  Only windows fully inside the session's time span
    are emitted; zero-event windows are kept (their Lambda is absent).
    """
    if width_s <= 0:
        raise ConfigError(f"window width must be > 0 seconds, got {width_s}")
    width_ms = int(round(width_s * 1000))
    if width_ms < 1:
        raise ConfigError(f"window width {width_s}s is below 1 ms resolution")
    out: list[MetricWindow] = []
    ts = ticks.timestamp_ms
    for _, rows in ticks.session_slices():
        s, stop = rows.start, rows.stop
        t0 = int(ts[s])
        t_end = int(ts[stop - 1])
        n_windows = (t_end - t0) // width_ms
        if n_windows < 1:
            continue
        bounds = t0 + width_ms * np.arange(n_windows + 1, dtype=np.int64)
        # N(b_j): last tick index with timestamp <= b_j, within this session
        pos = s + np.searchsorted(ts[s:stop], bounds, side="right") - 1
        for j in range(1, n_windows + 1):
            out.append(MetricWindow(int(pos[j - 1]) + 1, int(pos[j]),
                                    int(bounds[j - 1]), int(bounds[j])))
    return out


@dataclass(frozen=True)
class MetricSeries:
    """Ordered per-window values for one metric kind; NaN marks absent."""

    kind: str
    start_ms: np.ndarray
    end_ms: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ConfigError(f"unknown metric kind {self.kind!r}")
        if not (len(self.start_ms) == len(self.end_ms) == len(self.values)):
            raise ConfigError("MetricSeries column length mismatch")

    def __len__(self) -> int:
        return len(self.values)


def running_event_mean(
    ticks: TickSeries,
    contrib: Optional[ContributionSeries] = None,
    convention: str = CANONICAL,
) -> np.ndarray:
    """Running session mean of e_n at each tick.

    NaN until the session's first event; counters restart at every
    session start.
    """
    if contrib is None:
        contrib = contributions(ticks, convention)
    n = len(ticks)
    e_filled = np.where(contrib.valid, contrib.e, 0.0)
    cum_e = np.concatenate(([0.0], np.cumsum(e_filled)))
    session_start = np.zeros(n, dtype=np.int64)
    starts = np.flatnonzero(~ticks.in_session)
    if n:
        session_start[starts] = starts
        session_start = np.maximum.accumulate(session_start)
    counts = np.arange(n) - session_start
    run_mean = np.full(n, np.nan)
    has_events = counts > 0
    base = cum_e[session_start + 1]  # cumulative e just before each session's first event
    run_mean[has_events] = (cum_e[1:][has_events] - base[has_events]) / counts[has_events]
    return run_mean


def window_metrics(
    ticks: TickSeries,
    windows: Sequence[MetricWindow],
    convention: str = CANONICAL,
    contrib: Optional[ContributionSeries] = None,
) -> dict[str, MetricSeries]:
    """All five windowed metrics in one cumulative-array pass.

    Window spans must not cross session boundaries (guaranteed by the
    windows_by_* builders; asserted here against the in_session flags).
    """
    if contrib is None:
        contrib = contributions(ticks, convention)
    n = len(ticks)
    e_filled = np.where(contrib.valid, contrib.e, 0.0)
    w_filled = np.where(contrib.valid, contrib.omega, 0.0)
    cum_e = np.concatenate(([0.0], np.cumsum(e_filled)))
    cum_w = np.concatenate(([0.0], np.cumsum(w_filled)))
    run_mean = running_event_mean(ticks, contrib)

    mid = ticks.mid_price()
    last = ticks.last_price

    k = len(windows)
    start_ms = np.empty(k, dtype=np.int64)
    end_ms = np.empty(k, dtype=np.int64)
    ofi = np.empty(k)
    ti = np.empty(k)
    lam = np.empty(k)
    avg = np.empty(k)
    dp = np.empty(k)
    for j, w in enumerate(windows):
        a, b = w.boundary_idx, w.end_idx
        if b >= n or a < 0:
            raise ConfigError(f"window [{w.start_idx}, {w.end_idx}] out of range")
        if w.n_events and not ticks.in_session[w.start_idx:b + 1].all():
            raise ConfigError(
                f"window [{w.start_idx}, {w.end_idx}] crosses a session boundary"
            )
        start_ms[j] = w.start_ms
        end_ms[j] = w.end_ms
        ofi[j] = cum_e[b + 1] - cum_e[a + 1]
        ti[j] = cum_w[b + 1] - cum_w[a + 1]
        if w.n_events:
            seg = last[w.start_idx:b + 1]
            lam[j] = (seg.max() - seg.min()) / w.n_events
        else:
            lam[j] = np.nan
        rm_end = run_mean[b]
        rm_start = run_mean[a]
        if w.n_events == 0:
            # same boundary tick at both ends: zero change when defined
            avg[j] = 0.0 if not np.isnan(rm_end) else np.nan
        elif np.isnan(rm_start):
            # boundary is a session start: no running mean exists there yet
            avg[j] = np.nan
        else:
            avg[j] = rm_end - rm_start
        dp[j] = mid[b] - mid[a]

    def series(kind: str, vals: np.ndarray) -> MetricSeries:
        return MetricSeries(kind=kind, start_ms=start_ms.copy(), end_ms=end_ms.copy(), values=vals)

    return {
        "OFI": series("OFI", ofi),
        "TI": series("TI", ti),
        "Lambda": series("Lambda", lam),
        "AvgEn": series("AvgEn", avg),
        "DP": series("DP", dp),
    }


def metrics_frame(by_kind: dict[str, MetricSeries]) -> pd.DataFrame:
    """Stack MetricSeries into the CSV layout (kind blocks in canonical order)."""
    frames = []
    for kind in METRIC_KINDS:
        if kind not in by_kind:
            continue
        s = by_kind[kind]
        frames.append(pd.DataFrame({
            "window_start_ms": s.start_ms,
            "window_end_ms": s.end_ms,
            "kind": s.kind,
            "value": s.values,
        }))
    if not frames:
        return pd.DataFrame(columns=["window_start_ms", "window_end_ms", "kind", "value"])
    return pd.concat(frames, ignore_index=True)


def write_metrics_csv(by_kind: dict[str, MetricSeries], dest) -> None:
    """Serialize metric series; absent values become empty cells."""
    df = metrics_frame(by_kind)
    df["value"] = df["value"].map(lambda v: "" if pd.isna(v) else repr(float(v)))
    df.to_csv(dest, index=False, lineterminator="\n")
