"""Synthetic tick stream generator driven by the drift/price model.

The mid price follows the Euler-discretized model: one tick is one model
step, a latent mean-reverting state x_n (exact AR(1) decay e^{-theta},
compound Poisson Laplace jumps) sets the drift rho*k*x_n of the log mid,
plus lognormal noise sigma per sqrt(tick).  Quotes bracket the mid on the
0.2 price grid.

Book quantities are constructed so the realized canonical order-flow
contribution tracks d_n = round(x_n):

* unchanged quote cell: incoming flow d_n first consumes the opposing
  side, the remainder joins its own side; the realized e_n telescopes to
  exactly d_n whatever the available quantities;
* quote up-tick: the new bid quantity is the flow net of what the ask
  absorbed (e_n = max(d_n, previous ask qty)); the ask restocks to a small
  baseline.  Down-ticks mirror this.  Drift is sized to dominate the
  per-tick noise, so move direction almost always agrees with sign(x_n)
  and the censoring above is rare and small.

Trades are a decoupled channel: an AR(1) series w_n sets the incremental
volume round(|w_n|) and the trade side; the last price prints at the ask
(buy) or bid (sell) so the realized trade contribution recovers
sign(w_n) * round(|w_n|) exactly whenever volume is nonzero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .dynamics import OuGbmParams
from .errors import ConfigError
from .ticks import PRICE_TICK, TickSeries

BASE_QTY = 1  # minimum restock level for book quantities


def _default_params() -> OuGbmParams:
    # per-tick units; latent-state stationary std ~= 3.6 at theta=0.5
    return OuGbmParams.from_levy_variance(
        theta=0.5, sigma_levy_sq=8.0, sigma=1.5e-5, rho=1.0, k=2.8e-5
    )


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator configuration.

    params.theta / sigma_levy_sq / sigma / rho*k are interpreted per tick
    (params.dt is a simulation-only step size and is not used here).
    qty_noise is the Poisson rate of the restock level above BASE_QTY.
    """

    n_ticks: int
    seed: int
    params: OuGbmParams = field(default_factory=_default_params)
    initial_price: float = 4000.0
    tick_dt_s: float = 0.5
    qty_noise: float = 1.0
    session_ticks: int = 14_400
    session_gap_ms: int = 3_600_000
    session_prefix: str = "S"
    start_ms: int = 1_735_689_600_000  # 2025-01-01T00:00:00Z
    trade_ar1: float = 0.3
    trade_scale: float = 4.0
    burn_in: int = 256

    def __post_init__(self):
        if self.n_ticks <= 0:
            raise ConfigError(f"n_ticks must be > 0, got {self.n_ticks}")
        if self.tick_dt_s <= 0:
            raise ConfigError(f"tick_dt_s must be > 0, got {self.tick_dt_s}")
        if self.initial_price <= 0:
            raise ConfigError("initial_price must be > 0")
        if self.qty_noise < 0:
            raise ConfigError("qty_noise must be >= 0")
        if self.session_ticks < 2:
            raise ConfigError("session_ticks must be >= 2")
        if not -1.0 < self.trade_ar1 < 1.0:
            raise ConfigError("trade_ar1 must be in (-1, 1)")
        if self.trade_scale < 0 or self.burn_in < 0:
            raise ConfigError("trade_scale and burn_in must be >= 0")


def _ar1_exact(decay: float, innovations: np.ndarray, burn_in: int) -> np.ndarray:
    path = lfilter([1.0], [1.0, -decay], innovations)
    return path[burn_in:]


def _laplace_jump_sums(rng: np.random.Generator, rate: float, scale: float, n: int) -> np.ndarray:
    """Per-tick sums of Laplace(scale) jumps, count ~ Poisson(rate)."""
    if rate <= 0.0 or scale <= 0.0:
        return np.zeros(n)
    counts = rng.poisson(rate, size=n).astype(np.float64)
    return scale * (rng.gamma(counts) - rng.gamma(counts))


def generate_synthetic(config: SyntheticConfig) -> TickSeries:
    """Generate a deterministic synthetic tick stream (see module docstring)."""
    rng = np.random.default_rng(config.seed)
    n = config.n_ticks
    total = n + config.burn_in
    p = config.params

    decay = math.exp(-p.theta)
    jumps = _laplace_jump_sums(rng, p.jump.rate, p.jump.scale, total)
    x = _ar1_exact(decay, jumps, config.burn_in)

    eps = rng.standard_normal(n)
    dlog = p.coupling * x - 0.5 * p.sigma * p.sigma + p.sigma * eps
    log_mid = math.log(config.initial_price) + np.concatenate(([0.0], np.cumsum(dlog[1:])))
    cell = np.floor(np.exp(log_mid) / PRICE_TICK).astype(np.int64)
    bid = np.round(cell * PRICE_TICK, 1)
    ask = np.round(bid + PRICE_TICK, 1)

    zeta = rng.standard_normal(total) * config.trade_scale
    w = _ar1_exact(config.trade_ar1, zeta, config.burn_in)
    vol = np.rint(np.abs(w)).astype(np.int64)
    buy_side = w > 0

    restock_b = (BASE_QTY + rng.poisson(config.qty_noise, size=n)).astype(np.int64)
    restock_a = (BASE_QTY + rng.poisson(config.qty_noise, size=n)).astype(np.int64)

    d = np.rint(x).astype(np.int64)
    session_of = np.arange(n) // config.session_ticks
    n_sessions = int(session_of[-1]) + 1

    bid_qty = np.empty(n, dtype=np.int64)
    ask_qty = np.empty(n, dtype=np.int64)
    # sequential book pass; plain lists iterate much faster than ndarray cells
    d_l = d.tolist()
    cell_l = cell.tolist()
    rb_l = restock_b.tolist()
    ra_l = restock_a.tolist()
    qb_out = bid_qty  # filled below
    qa_out = ask_qty
    for s in range(n_sessions):
        lo = s * config.session_ticks
        hi = min(lo + config.session_ticks, n)
        qb = rb_l[lo]
        qa = ra_l[lo]
        qb_out[lo] = qb
        qa_out[lo] = qa
        prev_cell = cell_l[lo]
        for i in range(lo + 1, hi):
            ci = cell_l[i]
            di = d_l[i]
            if ci == prev_cell:
                if di >= 0:
                    take = di if di < qa else qa
                    qa -= take
                    qb += di - take
                else:
                    take = -di if -di < qb else qb
                    qb -= take
                    qa += -di - take
            elif ci > prev_cell:
                rem = di - qa
                qb = rem if rem > 0 else 0
                qa = ra_l[i]
            else:
                rem = -di - qb
                qa = rem if rem > 0 else 0
                qb = rb_l[i]
            qb_out[i] = qb
            qa_out[i] = qa
            prev_cell = ci

    # trades: cumulative volume restarts per session; last price prints at
    # the touched side, carrying over when no volume trades
    cum_vol = np.cumsum(vol)
    sess_first = session_of * config.session_ticks
    cum_vol = cum_vol - np.where(sess_first > 0, np.take(np.cumsum(vol), sess_first - 1, mode="clip"), 0)
    last = np.where(buy_side, ask, bid)
    traded = vol > 0
    if not traded[0]:
        last[0] = bid[0]
    idx = np.where(traded, np.arange(n), 0)
    np.maximum.accumulate(idx, out=idx)
    last = last[idx]

    tick_ms = int(round(config.tick_dt_s * 1000))
    offsets = np.arange(n, dtype=np.int64) - sess_first
    timestamps = (config.start_ms
                  + session_of * (config.session_ticks * tick_ms + config.session_gap_ms)
                  + offsets * tick_ms)

    width = len(str(max(n_sessions - 1, 1)))
    labels = np.array([f"{config.session_prefix}{s:0{width}d}" for s in range(n_sessions)],
                      dtype=object)
    session_id = labels[session_of]

    return TickSeries(
        timestamp_ms=timestamps,
        last_price=last,
        cum_volume=cum_vol,
        bid_price=bid,
        bid_qty=bid_qty,
        ask_price=ask,
        ask_qty=ask_qty,
        session_id=session_id,
    )
