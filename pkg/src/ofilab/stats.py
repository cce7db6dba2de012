"""Autocorrelation, descriptive moments, theta estimation, regime reports.

Conventions (fixed so cross-month comparisons stay consistent):

* ACF uses the biased denominator-N estimator: rho_k = sum of lagged
  centered products over N times the sample variance.  This keeps the
  cumulative sum of rho stable for long series.
* Kurtosis is the plain standardized fourth moment (normal -> 3), not
  excess.
* Significance bands are +/- 3/sqrt(N); no further testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from . import metrics as met
from .errors import ConfigError, StatsError
from .ticks import TickSeries

REGIME_KINDS = ("e", "omega", "dp")


@dataclass(frozen=True)
class AcfReport:
    """Sample autocorrelations at lags 1..max_lag with prefix sums."""

    lags: np.ndarray
    rho: np.ndarray
    cum_rho: np.ndarray
    n: int

    @property
    def se(self) -> float:
        """White-noise band scale 1/sqrt(N)."""
        return 1.0 / math.sqrt(self.n)

    def rho_at(self, lag: int) -> float:
        if lag < 1 or lag > len(self.rho):
            raise ConfigError(f"lag {lag} outside computed range 1..{len(self.rho)}")
        return float(self.rho[lag - 1])


def autocorr(series, max_lag: int) -> AcfReport:
    """Biased-estimator ACF at lags 1..max_lag.

    Requires len(series) > max_lag + 1 and nonzero sample variance.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise ConfigError("autocorr expects a 1-d series")
    if max_lag < 1:
        raise ConfigError(f"max_lag must be >= 1, got {max_lag}")
    n = x.size
    if n <= max_lag + 1:
        raise StatsError(f"series length {n} too short for max_lag {max_lag}")
    if not np.all(np.isfinite(x)):
        raise StatsError("series contains non-finite values")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom == 0.0:
        raise StatsError("autocorrelation undefined for a constant series")
    rho = np.empty(max_lag)
    for k in range(1, max_lag + 1):
        rho[k - 1] = float(xc[:-k] @ xc[k:]) / denom
    return AcfReport(lags=np.arange(1, max_lag + 1), rho=rho,
                     cum_rho=np.cumsum(rho), n=n)


def pearson_corr(x, y) -> float:
    """Pearson correlation of two equal-length non-degenerate samples."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ConfigError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise StatsError("need at least 2 points for a correlation")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise StatsError("correlation inputs contain non-finite values")
    xc = x - x.mean()
    yc = y - y.mean()
    vx = float(xc @ xc)
    vy = float(yc @ yc)
    if vx == 0.0 or vy == 0.0:
        raise StatsError("correlation undefined for a constant input")
    return float((xc @ yc) / math.sqrt(vx * vy))


@dataclass(frozen=True)
class DescriptiveStats:
    """Mean/std/skewness/kurtosis with population (1/N) moments.

    On a constant sample the standardized moments are undefined: std is 0,
    skewness/kurtosis are NaN and `moments_defined` is False.
    """

    mean: float
    std: float
    skewness: float
    kurtosis: float
    n: int

    @property
    def moments_defined(self) -> bool:
        return not (math.isnan(self.skewness) or math.isnan(self.kurtosis))


def descriptive(series) -> DescriptiveStats:
    """Four-moment summary; requires N >= 4."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise ConfigError("descriptive expects a 1-d series")
    if x.size < 4:
        raise StatsError(f"need N >= 4 for four moments, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise StatsError("series contains non-finite values")
    mean = float(x.mean())
    xc = x - mean
    m2 = float(np.mean(xc**2))
    if m2 == 0.0:
        return DescriptiveStats(mean=mean, std=0.0, skewness=math.nan,
                                kurtosis=math.nan, n=x.size)
    m3 = float(np.mean(xc**3))
    m4 = float(np.mean(xc**4))
    return DescriptiveStats(
        mean=mean,
        std=math.sqrt(m2),
        skewness=m3 / m2**1.5,
        kurtosis=m4 / (m2 * m2),
        n=x.size,
    )


def estimate_theta(acf: AcfReport) -> float:
    """Mean-reversion rate from the lag-1 autocorrelation: theta = -ln rho_1.

    Valid only for rho_1 in (0, 1); rho_1 <= 0 signals a regime where the
    mean-reverting drift model itself is inapplicable.
    """
    rho1 = acf.rho_at(1)
    if rho1 <= 0.0:
        raise StatsError(f"rho_1 = {rho1:.6g} <= 0: mean-reversion fit invalid")
    if rho1 >= 1.0:
        raise StatsError(f"rho_1 = {rho1:.6g} >= 1: no decay to invert")
    return -math.log(rho1)


# ---------------------------------------------------------------------------
# monthly regime report
# ---------------------------------------------------------------------------

LOW_CONFIDENCE_EVENTS = 10_000


@dataclass(frozen=True)
class MonthRow:
    """One calendar month of per-event series diagnostics."""

    month: int  # YYMM label, e.g. 2312
    n_events: int
    acf: Optional[AcfReport]
    stats: Optional[DescriptiveStats]
    price_corr: float
    low_confidence: bool


@dataclass(frozen=True)
class RegimeReport:
    kind: str
    max_lag: int
    convention: str
    months: tuple[MonthRow, ...]
    sign_flip_lags: tuple[int, ...]

    @property
    def weak(self) -> bool:
        """True when some lag is significantly positive in one month and
        significantly negative in another (sign-flipping metric)."""
        return len(self.sign_flip_lags) > 0


def _month_labels(timestamp_ms: np.ndarray) -> np.ndarray:
    stamps = pd.to_datetime(timestamp_ms, unit="ms", utc=True)
    return ((stamps.year % 100) * 100 + stamps.month).to_numpy()


def regime_report(
    ticks: TickSeries,
    kind: str = "e",
    max_lag: int = 10,
    convention: str = met.CANONICAL,
) -> RegimeReport:
    """Per-calendar-month ACF/stats rows for one per-event series.

    kind: "e" (order-flow contribution), "omega" (trade contribution),
    or "dp" (per-tick mid change).  Months with fewer than 10^4 events are
    marked low-confidence; a lag whose autocorrelation is significantly
    positive in one month and significantly negative in another (beyond
    each month's 3/sqrt(N) band) is recorded as a sign flip.
    """
    if kind not in REGIME_KINDS:
        raise ConfigError(f"unknown regime kind {kind!r}; expected one of {REGIME_KINDS}")
    if max_lag < 1:
        raise ConfigError(f"max_lag must be >= 1, got {max_lag}")
    contrib = met.contributions(ticks, convention)
    if kind == "e":
        values = contrib.e
    elif kind == "omega":
        values = contrib.omega
    else:
        mid = ticks.mid_price()
        values = np.full(len(ticks), np.nan)
        if len(ticks) > 1:
            values[1:] = mid[1:] - mid[:-1]
    mid = ticks.mid_price()
    dmid = np.full(len(ticks), np.nan)
    if len(ticks) > 1:
        dmid[1:] = mid[1:] - mid[:-1]

    valid = contrib.valid
    labels = _month_labels(ticks.timestamp_ms)
    months: list[MonthRow] = []
    seen: set[int] = set()
    order = []
    for lab in labels:
        if lab not in seen:
            seen.add(lab)
            order.append(lab)
    for lab in order:
        sel = (labels == lab) & valid
        x = values[sel]
        n = int(x.size)
        low = n < LOW_CONFIDENCE_EVENTS
        acf = stats_row = None
        corr = math.nan
        if n:
            try:
                acf = autocorr(x, max_lag)
            except StatsError:
                acf = None
            try:
                stats_row = descriptive(x)
            except StatsError:
                stats_row = None
            try:
                corr = pearson_corr(x, dmid[sel])
            except StatsError:
                corr = math.nan
        months.append(MonthRow(month=int(lab), n_events=n, acf=acf,
                               stats=stats_row, price_corr=corr,
                               low_confidence=low))

    flips: list[int] = []
    for lag in range(1, max_lag + 1):
        has_pos = has_neg = False
        for row in months:
            if row.acf is None:
                continue
            band = 3.0 * row.acf.se
            r = row.acf.rho_at(lag)
            if r > band:
                has_pos = True
            elif r < -band:
                has_neg = True
        if has_pos and has_neg:
            flips.append(lag)
    return RegimeReport(kind=kind, max_lag=max_lag, convention=convention,
                        months=tuple(months), sign_flip_lags=tuple(flips))


def regime_frame(report: RegimeReport) -> pd.DataFrame:
    """Monthly lag table: one row per month, columns Mon, lag1..lagK."""
    cols = {"Mon": [row.month for row in report.months]}
    for lag in range(1, report.max_lag + 1):
        cols[f"lag{lag}"] = [
            row.acf.rho_at(lag) if row.acf is not None else math.nan
            for row in report.months
        ]
    return pd.DataFrame(cols)
