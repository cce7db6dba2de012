"""Rolling-window forecast datasets, LASSO grid runs, and PnL evaluation.

One evaluation row per tick: the feature is OFI over the trailing
``hist_win`` ticks and the target is the mid-price change over the next
``horizon`` ticks; rows whose span crosses a session boundary are
dropped. The grid runner splits each dataset 80/20 in time order,
cross-validates the penalty on the training part, and reports test MSE,
test R^2, and long/short PnL for both partitions.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, OfilabError
from .lasso import Dataset, cv_select, fit, predict
from .metrics import CANONICAL, ContributionSeries, contributions, running_event_mean
from .ticks import TickSeries

__all__ = [
    "BacktestRow",
    "COMBO_HEADER",
    "ComboSpec",
    "GRID_HEADER",
    "GridSpec",
    "PARTNERS",
    "PnlBreakdown",
    "backtest_report",
    "build_dataset",
    "combo_curves_frame",
    "grid_curves_frame",
    "pnl_evaluate",
    "run_combo",
    "run_grid",
    "sign_randomized_null",
    "write_backtest_csv",
]

log = logging.getLogger(__name__)

PARTNERS = ("OFI-lag", "TI", "DP", "Lambda", "AvgEn")

GRID_HEADER = ("HistWinSize,FcastHorzn,MSE,R2,Coef0,Intcpt,"
               "Trainpnl-l,Testpnl-l,Trainpnl-s,Testpnl-s,Totalpnl")
COMBO_HEADER = ("HistWinSize,FcastHorzn,MSE,R2,Coef0,Coef1,Intcpt,"
                "Trainpnl-l,Testpnl-l,Trainpnl-s,Testpnl-s,Totalpnl,Partner")


@dataclass(frozen=True)
class GridSpec:
    """Historical-window x forecast-horizon grid with a time-ordered split."""

    hist_wins: tuple[int, ...] = (1, 2, 5, 10, 20, 30, 60, 120, 240)
    horizons: tuple[int, ...] = (1, 2, 5, 10, 20, 30, 60, 120, 240, 600, 1200, 3600)
    train_frac: float = 0.8

    def __post_init__(self):
        if not self.hist_wins or not self.horizons:
            raise ConfigError("grid needs at least one window and one horizon")
        for v in (*self.hist_wins, *self.horizons):
            if int(v) != v or v < 1:
                raise ConfigError(f"grid sizes must be positive integers, got {v}")
        if not 0.0 < self.train_frac < 1.0:
            raise ConfigError(f"train fraction must be in (0,1), got {self.train_frac}")


@dataclass(frozen=True)
class ComboSpec:
    """Two-factor regression: OFI paired with one partner metric."""

    partner: str
    hist_win: int = 2

    def __post_init__(self):
        if self.partner not in PARTNERS:
            raise ConfigError(
                f"unknown partner {self.partner!r}; expected one of {PARTNERS}"
            )
        if int(self.hist_win) != self.hist_win or self.hist_win < 1:
            raise ConfigError(f"hist_win must be a positive integer, got {self.hist_win}")


class PnlBreakdown(NamedTuple):
    long: float
    short: float

    @property
    def total(self) -> float:
        return self.long + self.short


@dataclass(frozen=True)
class BacktestRow:
    """One grid cell. Numeric fields are None when the cell failed.

    ``mse``/``r2`` are test-partition quantities; the train-side pair
    travels in the JSON report only. ``totalpnl`` is the sum of the four
    PnL cells.
    """

    hist_win: int
    horizon: int
    mse: Optional[float] = None
    r2: Optional[float] = None
    coef: Optional[tuple[float, ...]] = None
    intercept: Optional[float] = None
    trainpnl_l: Optional[float] = None
    testpnl_l: Optional[float] = None
    trainpnl_s: Optional[float] = None
    testpnl_s: Optional[float] = None
    totalpnl: Optional[float] = None
    partner: Optional[str] = None
    lam: Optional[float] = None
    train_mse: Optional[float] = None
    train_r2: Optional[float] = None
    n_rows: Optional[int] = None
    error: Optional[str] = None


class _Context:
    """Cumulative arrays shared by every grid cell on one tick series."""

    __slots__ = ("n", "cum_e", "cum_w", "cum_bad", "mid", "last", "run_mean")

    def __init__(self, ticks: TickSeries, contrib: ContributionSeries):
        self.n = len(ticks)
        e_filled = np.where(contrib.valid, contrib.e, 0.0)
        w_filled = np.where(contrib.valid, contrib.omega, 0.0)
        self.cum_e = np.concatenate(([0.0], np.cumsum(e_filled)))
        self.cum_w = np.concatenate(([0.0], np.cumsum(w_filled)))
        # cum_bad[i] = number of session-start ticks among ticks 0..i-1
        self.cum_bad = np.concatenate(([0], np.cumsum(~ticks.in_session)))
        self.mid = ticks.mid_price()
        self.last = ticks.last_price
        self.run_mean = running_event_mean(ticks, contrib)


def _span_ok(ctx: _Context, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """True where ticks in (lo, hi] involve no session start."""
    return ctx.cum_bad[hi + 1] == ctx.cum_bad[lo + 1]


def _build(ctx: _Context, hist_win: int, horizon: int,
           partner: Optional[str]) -> Dataset:
    if hist_win < 1 or horizon < 1:
        raise ConfigError("hist_win and horizon must be >= 1")
    lo = hist_win
    hi = ctx.n - 1 - horizon
    if hi < lo:
        raise DataError(
            f"no evaluation rows: hist_win={hist_win} + horizon={horizon} "
            f"does not fit in {ctx.n} ticks"
        )
    n = np.arange(lo, hi + 1)
    valid = _span_ok(ctx, n - hist_win, n) & _span_ok(ctx, n, n + horizon)

    cols = [ctx.cum_e[n + 1] - ctx.cum_e[n + 1 - hist_win]]
    names = ["OFI"]
    if partner is not None:
        if partner not in PARTNERS:
            raise ConfigError(
                f"unknown partner {partner!r}; expected one of {PARTNERS}"
            )
        names.append(partner)
        if partner == "OFI-lag":
            valid &= n >= 2 * hist_win
            prev = np.maximum(n - 2 * hist_win, 0)
            valid &= _span_ok(ctx, prev, n - hist_win)
            cols.append(ctx.cum_e[n + 1 - hist_win] - ctx.cum_e[prev + 1])
        elif partner == "TI":
            cols.append(ctx.cum_w[n + 1] - ctx.cum_w[n + 1 - hist_win])
        elif partner == "DP":
            cols.append(ctx.mid[n] - ctx.mid[n - hist_win])
        elif partner == "Lambda":
            roll = pd.Series(ctx.last).rolling(hist_win)
            rng = (roll.max() - roll.min()).to_numpy()
            cols.append(rng[n] / hist_win)
        else:  # AvgEn
            diff = ctx.run_mean[n] - ctx.run_mean[n - hist_win]
            valid &= np.isfinite(diff)
            cols.append(diff)

    y = ctx.mid[n + horizon] - ctx.mid[n]
    if not valid.any():
        raise DataError(
            f"no evaluation rows survive session trimming for "
            f"hist_win={hist_win}, horizon={horizon}"
        )
    x = np.column_stack([c[valid] for c in cols])
    return Dataset.from_arrays(x, y[valid], names)


def build_dataset(
    ticks: TickSeries,
    hist_win: int,
    horizon: int,
    partner: Optional[str] = None,
    convention: str = CANONICAL,
) -> Dataset:
    """Rolling overlapping evaluation rows for one (hist_win, horizon) cell.

    Feature 0 is the trailing-window OFI; ``partner`` adds a second
    feature column. The target is the forward mid-price change.
    """
    ctx = _Context(ticks, contributions(ticks, convention))
    return _build(ctx, hist_win, horizon, partner)


def pnl_evaluate(predictions: np.ndarray, actual: np.ndarray) -> PnlBreakdown:
    """Frictionless long/short PnL of sign-following positions.

    Long PnL sums the actual change where the prediction is positive;
    short PnL sums the negated change where it is negative; zero
    predictions contribute nothing.
    """
    pred = np.asarray(predictions, dtype=float)
    act = np.asarray(actual, dtype=float)
    if pred.shape != act.shape:
        raise ConfigError(f"shape mismatch: {pred.shape} predictions vs {act.shape} actuals")
    return PnlBreakdown(
        long=float(act[pred > 0].sum()),
        short=float(-act[pred < 0].sum()),
    )


def _split_index(n: int, train_frac: float, min_train: int) -> int:
    split = int(n * train_frac)
    if split < min_train or n - split < 1:
        raise DataError(
            f"{n} rows leave no usable {train_frac:.0%}/{1 - train_frac:.0%} split"
        )
    return split


def _mse_r2(pred: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    resid = pred - y
    mse = float(resid @ resid) / y.size
    sstot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / sstot if sstot > 0 else float("nan")
    return mse, r2


def _run_cell(
    ctx: _Context,
    hist_win: int,
    horizon: int,
    partner: Optional[str],
    train_frac: float,
    cv_folds: int,
    lam_grid: Optional[np.ndarray],
) -> BacktestRow:
    try:
        ds = _build(ctx, hist_win, horizon, partner)
        split = _split_index(ds.n, train_frac, min_train=max(cv_folds, 2))
        train = Dataset.from_arrays(ds.x[:split], ds.y[:split], ds.columns)
        cv = cv_select(train, k=cv_folds, lam_grid=lam_grid)
        model = fit(train, cv.lam_star)
        pred_tr = predict(model, ds.x[:split])
        pred_te = predict(model, ds.x[split:])
        y_tr, y_te = ds.y[:split], ds.y[split:]
        pnl_tr = pnl_evaluate(pred_tr, y_tr)
        pnl_te = pnl_evaluate(pred_te, y_te)
        mse_te, r2_te = _mse_r2(pred_te, y_te)
        mse_tr, r2_tr = _mse_r2(pred_tr, y_tr)
        return BacktestRow(
            hist_win=hist_win,
            horizon=horizon,
            mse=mse_te,
            r2=r2_te,
            coef=tuple(float(c) for c in model.coef),
            intercept=model.intercept,
            trainpnl_l=pnl_tr.long,
            testpnl_l=pnl_te.long,
            trainpnl_s=pnl_tr.short,
            testpnl_s=pnl_te.short,
            totalpnl=pnl_tr.long + pnl_te.long + pnl_tr.short + pnl_te.short,
            partner=partner,
            lam=model.lam,
            train_mse=mse_tr,
            train_r2=r2_tr,
            n_rows=ds.n,
        )
    except OfilabError as exc:
        log.warning("cell hist=%d horizon=%d partner=%s failed: %s",
                    hist_win, horizon, partner, exc)
        return BacktestRow(hist_win=hist_win, horizon=horizon, partner=partner,
                           error=str(exc))


def _run_cells(ctx, cells, train_frac, cv_folds, lam_grid, n_jobs):
    if lam_grid is not None:
        lam_grid = np.asarray(lam_grid, dtype=float)
    if n_jobs < 1:
        raise ConfigError(f"n_jobs must be >= 1, got {n_jobs}")
    if n_jobs == 1 or len(cells) == 1:
        return [_run_cell(ctx, h, t, p, train_frac, cv_folds, lam_grid)
                for h, t, p in cells]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        futures = [pool.submit(_run_cell, ctx, h, t, p, train_frac, cv_folds, lam_grid)
                   for h, t, p in cells]
        return [f.result() for f in futures]


def run_grid(
    ticks: TickSeries,
    grid: GridSpec = GridSpec(),
    convention: str = CANONICAL,
    cv_folds: int = 5,
    lam_grid: Optional[np.ndarray] = None,
    n_jobs: int = 1,
) -> list[BacktestRow]:
    """Single-factor LASSO backtest over the full grid.

    Cells are independent and may run in parallel; output order is
    hist_wins-major regardless of scheduling. A failed cell carries its
    error string instead of aborting the grid.
    """
    ctx = _Context(ticks, contributions(ticks, convention))
    cells = [(h, t, None) for h in grid.hist_wins for t in grid.horizons]
    return _run_cells(ctx, cells, grid.train_frac, cv_folds, lam_grid, n_jobs)


def run_combo(
    ticks: TickSeries,
    combos: Sequence[ComboSpec] = tuple(ComboSpec(p) for p in PARTNERS),
    horizons: Sequence[int] = GridSpec().horizons,
    convention: str = CANONICAL,
    train_frac: float = 0.8,
    cv_folds: int = 5,
    lam_grid: Optional[np.ndarray] = None,
    n_jobs: int = 1,
) -> list[BacktestRow]:
    """Two-factor backtest: OFI paired with each combo's partner metric."""
    if not combos:
        raise ConfigError("need at least one combo")
    for t in horizons:
        if int(t) != t or t < 1:
            raise ConfigError(f"horizons must be positive integers, got {t}")
    ctx = _Context(ticks, contributions(ticks, convention))
    cells = [(c.hist_win, int(t), c.partner) for c in combos for t in horizons]
    return _run_cells(ctx, cells, train_frac, cv_folds, lam_grid, n_jobs)


def sign_randomized_null(
    ticks: TickSeries,
    hist_win: int,
    horizon: int,
    lam: float,
    n_draws: int = 200,
    train_frac: float = 0.8,
    seed: int = 0,
    convention: str = CANONICAL,
) -> np.ndarray:
    """Test-partition total PnL under random target sign flips.

    Destroys the feature-target link while keeping both marginals; the
    spread of the returned array is the bootstrap scale against which a
    real PnL is judged. The penalty is held fixed at ``lam`` (typically
    the real run's selection) so draws differ only in the sign pattern.
    """
    if n_draws < 2:
        raise ConfigError("need at least 2 draws")
    ds = build_dataset(ticks, hist_win, horizon, convention=convention)
    split = _split_index(ds.n, train_frac, min_train=2)
    rng = np.random.default_rng(seed)
    out = np.empty(n_draws)
    for b in range(n_draws):
        signs = rng.choice((-1.0, 1.0), size=ds.n)
        y_b = ds.y * signs
        train = Dataset.from_arrays(ds.x[:split], y_b[:split], ds.columns)
        model = fit(train, lam)
        pnl = pnl_evaluate(predict(model, ds.x[split:]), y_b[split:])
        out[b] = pnl.total
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    f = float(v)
    if np.isnan(f):
        return ""
    return repr(f)


def write_backtest_csv(rows: Sequence[BacktestRow], dest, combo: bool = False) -> None:
    """Emit the result table; combo layout adds Coef1 and Partner columns."""
    def cells(r: BacktestRow) -> list[str]:
        coef = r.coef or ()
        out = [str(r.hist_win), str(r.horizon), _fmt(r.mse), _fmt(r.r2),
               _fmt(coef[0] if len(coef) > 0 else None)]
        if combo:
            out.append(_fmt(coef[1] if len(coef) > 1 else None))
        out += [_fmt(r.intercept), _fmt(r.trainpnl_l), _fmt(r.testpnl_l),
                _fmt(r.trainpnl_s), _fmt(r.testpnl_s), _fmt(r.totalpnl)]
        if combo:
            out.append(r.partner or "")
        return out

    header = COMBO_HEADER if combo else GRID_HEADER
    lines = [header] + [",".join(cells(r)) for r in rows]
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", newline="") as fh:
            fh.write(text)


def backtest_report(rows: Sequence[BacktestRow]) -> list[dict]:
    """JSON-ready per-cell diagnostics (train and test metrics, penalty)."""
    out = []
    for r in rows:
        d = {
            "hist_win": r.hist_win,
            "horizon": r.horizon,
            "partner": r.partner,
            "n_rows": r.n_rows,
            "lam": r.lam,
            "coef": list(r.coef) if r.coef is not None else None,
            "intercept": r.intercept,
            "test": {"mse": r.mse, "r2": r.r2},
            "train": {"mse": r.train_mse, "r2": r.train_r2},
            "pnl": {
                "train_long": r.trainpnl_l,
                "test_long": r.testpnl_l,
                "train_short": r.trainpnl_s,
                "test_short": r.testpnl_s,
                "total": r.totalpnl,
            },
            "error": r.error,
        }
        out.append(d)
    return out


def grid_curves_frame(rows: Sequence[BacktestRow]) -> pd.DataFrame:
    """Total PnL against horizon, one column per historical window."""
    ok = [r for r in rows if r.error is None]
    df = pd.DataFrame({
        "hist_win": [r.hist_win for r in ok],
        "horizon": [r.horizon for r in ok],
        "totalpnl": [r.totalpnl for r in ok],
    })
    if df.empty:
        return pd.DataFrame()
    pivot = df.pivot(index="horizon", columns="hist_win", values="totalpnl")
    pivot.columns = [f"hist{c}" for c in pivot.columns]
    return pivot.reset_index()


def combo_curves_frame(rows: Sequence[BacktestRow]) -> pd.DataFrame:
    """Test-partition long PnL against horizon, one column per partner."""
    ok = [r for r in rows if r.error is None and r.partner is not None]
    df = pd.DataFrame({
        "partner": [r.partner for r in ok],
        "horizon": [r.horizon for r in ok],
        "testpnl_l": [r.testpnl_l for r in ok],
    })
    if df.empty:
        return pd.DataFrame()
    pivot = df.pivot(index="horizon", columns="partner", values="testpnl_l")
    return pivot.reset_index()
