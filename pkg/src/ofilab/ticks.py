"""Snapshot tick data: records, columnar series, CSV IO, session filtering.

A tick is one 500 ms order-book snapshot: last trade price, cumulative
session volume, and best bid/ask price and quantity, tagged with an opaque
session id.  The CSV contract (header, one fractional digit on prices of
0.2-multiples, LF endings, no quoting) is the interchange format between
the CLI and everything downstream.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import ConfigError, OrderingError, ParseError, ValidationError

log = logging.getLogger(__name__)

CSV_HEADER = "timestamp_ms,last_price,cum_volume,bid_price,bid_qty,ask_price,ask_qty,session_id"
CSV_COLUMNS = CSV_HEADER.split(",")

PRICE_TICK = 0.2

_INT_COLUMNS = ("timestamp_ms", "cum_volume", "bid_qty", "ask_qty")
_PRICE_COLUMNS = ("last_price", "bid_price", "ask_price")


@dataclass(frozen=True)
class TickRecord:
    """One order-book snapshot."""

    timestamp_ms: int
    last_price: float
    cum_volume: int
    bid_price: float
    bid_qty: int
    ask_price: float
    ask_qty: int
    session_id: str


@dataclass(frozen=True)
class SessionSpec:
    """Session filtering policy.

    windows: optional non-overlapping (open_ms, close_ms) wall-clock spans;
        ticks outside every window are removed before trimming.
    trim_count: ticks dropped at each surviving session edge.
    """

    trim_count: int = 60
    windows: Optional[Sequence[tuple[int, int]]] = None

    def __post_init__(self):
        if self.trim_count < 0:
            raise ConfigError(f"trim_count must be >= 0, got {self.trim_count}")
        if self.windows is not None:
            spans = sorted(self.windows)
            for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
                if b0 < a1:
                    raise ConfigError("session windows must be non-overlapping")
            for a0, a1 in spans:
                if a1 <= a0:
                    raise ConfigError("session window close must be after open")


@dataclass(frozen=True)
class DroppedSession:
    session_id: str
    n_ticks: int
    reason: str


class TickSeries:
    """Columnar, immutable view of a tick sequence.

    `in_session[i]` is True when tick i-1 exists and belongs to the same
    session; consumers must never compute an event contribution for a tick
    whose flag is False.  The flag is recomputed after filtering, so the
    first survivor of each trimmed session is marked as a session start.
    """

    __slots__ = ("timestamp_ms", "last_price", "cum_volume", "bid_price",
                 "bid_qty", "ask_price", "ask_qty", "session_id", "in_session",
                 "_session_bounds")

    def __init__(self, timestamp_ms, last_price, cum_volume, bid_price,
                 bid_qty, ask_price, ask_qty, session_id):
        self.timestamp_ms = np.ascontiguousarray(timestamp_ms, dtype=np.int64)
        self.last_price = np.ascontiguousarray(last_price, dtype=np.float64)
        self.cum_volume = np.ascontiguousarray(cum_volume, dtype=np.int64)
        self.bid_price = np.ascontiguousarray(bid_price, dtype=np.float64)
        self.bid_qty = np.ascontiguousarray(bid_qty, dtype=np.int64)
        self.ask_price = np.ascontiguousarray(ask_price, dtype=np.float64)
        self.ask_qty = np.ascontiguousarray(ask_qty, dtype=np.int64)
        self.session_id = np.asarray(session_id, dtype=object)
        n = len(self.timestamp_ms)
        for name in ("last_price", "cum_volume", "bid_price", "bid_qty",
                     "ask_price", "ask_qty", "session_id"):
            if len(getattr(self, name)) != n:
                raise ConfigError(f"column {name} length mismatch")
        same = np.empty(n, dtype=bool)
        if n:
            same[0] = False
            same[1:] = self.session_id[1:] == self.session_id[:-1]
        self.in_session = same
        self._session_bounds = np.append(np.flatnonzero(~same), n)
        for arr in (self.timestamp_ms, self.last_price, self.cum_volume,
                    self.bid_price, self.bid_qty, self.ask_price,
                    self.ask_qty, self.session_id, self.in_session):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.timestamp_ms)

    def row(self, i: int) -> TickRecord:
        return TickRecord(
            timestamp_ms=int(self.timestamp_ms[i]),
            last_price=float(self.last_price[i]),
            cum_volume=int(self.cum_volume[i]),
            bid_price=float(self.bid_price[i]),
            bid_qty=int(self.bid_qty[i]),
            ask_price=float(self.ask_price[i]),
            ask_qty=int(self.ask_qty[i]),
            session_id=str(self.session_id[i]),
        )

    def __iter__(self):
        return (self.row(i) for i in range(len(self)))

    def mid_price(self) -> np.ndarray:
        return 0.5 * (self.bid_price + self.ask_price)

    def session_slices(self) -> list[tuple[str, slice]]:
        """Contiguous (session_id, row slice) runs in file order."""
        b = self._session_bounds
        return [(str(self.session_id[b[i]]), slice(int(b[i]), int(b[i + 1])))
                for i in range(len(b) - 1)]

    def select(self, mask_or_index) -> "TickSeries":
        idx = np.asarray(mask_or_index)
        return TickSeries(
            self.timestamp_ms[idx], self.last_price[idx], self.cum_volume[idx],
            self.bid_price[idx], self.bid_qty[idx], self.ask_price[idx],
            self.ask_qty[idx], self.session_id[idx],
        )

    @classmethod
    def from_records(cls, records: Iterable[TickRecord]) -> "TickSeries":
        rows = list(records)
        return cls(
            [r.timestamp_ms for r in rows], [r.last_price for r in rows],
            [r.cum_volume for r in rows], [r.bid_price for r in rows],
            [r.bid_qty for r in rows], [r.ask_price for r in rows],
            [r.ask_qty for r in rows], [r.session_id for r in rows],
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({c: getattr(self, c) for c in CSV_COLUMNS})


def _off_grid(prices: np.ndarray) -> np.ndarray:
    scaled = prices / PRICE_TICK
    return np.abs(scaled - np.round(scaled)) > 1e-6


def _first_line(mask: np.ndarray) -> int:
    """Data-row index -> 1-based file line (header is line 1)."""
    return int(np.flatnonzero(mask)[0]) + 2


def parse_ticks(source: Union[str, Path, io.IOBase, bytes]) -> TickSeries:
    """Parse and validate a tick CSV into a TickSeries.

    Raises ParseError for structural problems (header, arity, non-numeric
    or non-integral cells), ValidationError for field-level invariant
    violations (crossed book, negative quantities, off-grid prices,
    volume decreasing in-session), and OrderingError for timestamp or
    session-contiguity violations.  Error messages carry 1-based line
    numbers (the header is line 1).
    """
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    try:
        df = pd.read_csv(source, dtype={"session_id": str}, skip_blank_lines=False)
    except pd.errors.ParserError as exc:
        raise ParseError(f"malformed CSV: {exc}") from None
    except (OSError, ValueError, pd.errors.EmptyDataError) as exc:
        raise ParseError(f"unreadable tick CSV: {exc}") from None
    if list(df.columns) != CSV_COLUMNS:
        raise ParseError(
            f"unexpected header {','.join(map(str, df.columns))!r}; expected {CSV_HEADER!r}"
        )

    cols: dict[str, np.ndarray] = {}
    for name in CSV_COLUMNS[:-1]:
        raw = df[name]
        vals = pd.to_numeric(raw, errors="coerce")
        bad = vals.isna().to_numpy()
        if bad.any():
            raise ParseError(f"non-numeric {name} at line {_first_line(bad)}")
        arr = vals.to_numpy(dtype=np.float64)
        if name in _INT_COLUMNS:
            frac = arr != np.floor(arr)
            if frac.any():
                raise ParseError(f"non-integer {name} at line {_first_line(frac)}")
            arr = arr.astype(np.int64)
        cols[name] = arr
    sess = df["session_id"]
    if sess.isna().to_numpy().any():
        raise ParseError(f"missing session_id at line {_first_line(sess.isna().to_numpy())}")
    cols["session_id"] = sess.to_numpy(dtype=object)

    bad = ~(cols["bid_price"] > 0)
    if bad.any():
        raise ValidationError(f"bid_price must be > 0 at line {_first_line(bad)}")
    bad = cols["ask_price"] <= cols["bid_price"]
    if bad.any():
        raise ValidationError(f"crossed book (ask <= bid) at line {_first_line(bad)}")
    for name in ("bid_qty", "ask_qty", "cum_volume"):
        bad = cols[name] < 0
        if bad.any():
            raise ValidationError(f"negative {name} at line {_first_line(bad)}")
    for name in _PRICE_COLUMNS:
        bad = _off_grid(cols[name])
        if bad.any():
            raise ValidationError(
                f"{name} not a {PRICE_TICK} multiple at line {_first_line(bad)}"
            )

    series = TickSeries(**cols)
    _check_ordering(series)
    return series


def _check_ordering(series: TickSeries) -> None:
    seen: dict[str, int] = {}
    for sid, rows in series.session_slices():
        if sid in seen:
            raise OrderingError(
                f"session {sid!r} reappears at line {rows.start + 2} "
                f"(first block starts at line {seen[sid] + 2})"
            )
        seen[sid] = rows.start
    same = series.in_session
    if len(series) > 1:
        dt = np.diff(series.timestamp_ms)
        bad = (dt <= 0) & same[1:]
        if bad.any():
            raise OrderingError(
                f"non-increasing timestamp within session at line {_first_line(bad) + 1}"
            )
        dv = np.diff(series.cum_volume)
        bad = (dv < 0) & same[1:]
        if bad.any():
            raise ValidationError(
                f"cum_volume decreases within session at line {_first_line(bad) + 1}"
            )


def serialize_ticks(ticks: TickSeries, dest: Union[str, Path, io.IOBase]) -> None:
    """Write the canonical CSV: prices with one fractional digit, LF endings."""
    df = ticks.to_frame()
    for name in _PRICE_COLUMNS:
        df[name] = df[name].map(lambda p: f"{p:.1f}")
    df.to_csv(dest, index=False, lineterminator="\n")


@dataclass(frozen=True)
class FilterResult:
    ticks: TickSeries
    dropped: tuple[DroppedSession, ...] = field(default=())


def filter_sessions(ticks: TickSeries, spec: SessionSpec = SessionSpec()) -> FilterResult:
    """Trim session edges and drop too-short sessions.

    Removes the first and last `trim_count` ticks of every session (after
    restricting to `spec.windows` when given).  A session left with no
    interior (length <= 2*trim_count) is dropped entirely and reported in
    `FilterResult.dropped`.  The surviving series carries fresh in_session
    flags, so the first tick after every trim is marked as a session start
    and running-mean consumers restart their counters there.
    """
    keep_idx: list[np.ndarray] = []
    dropped: list[DroppedSession] = []
    trim = spec.trim_count
    for sid, rows in ticks.session_slices():
        idx = np.arange(rows.start, rows.stop)
        if spec.windows is not None:
            ts = ticks.timestamp_ms[idx]
            inside = np.zeros(len(idx), dtype=bool)
            for open_ms, close_ms in spec.windows:
                inside |= (ts >= open_ms) & (ts < close_ms)
            idx = idx[inside]
        if len(idx) <= 2 * trim:
            dropped.append(DroppedSession(sid, len(idx), f"shorter than 2*trim_count={2 * trim}"))
            log.warning("dropping session %s: %d ticks <= 2*trim_count=%d",
                        sid, len(idx), 2 * trim)
            continue
        keep_idx.append(idx[trim:len(idx) - trim] if trim else idx)
    if keep_idx:
        kept = ticks.select(np.concatenate(keep_idx))
    else:
        kept = ticks.select(np.zeros(0, dtype=np.int64))
    return FilterResult(ticks=kept, dropped=tuple(dropped))
