"""Mean-reverting drift model with jump noise, coupled to a lognormal price.

The drift mu_t follows an Ornstein-Uhlenbeck process driven by a compound
Poisson process with symmetric Laplace jump sizes (zero mean, fat tails,
finite variance sigma_levy_sq per unit time).  The log price accumulates
that drift on top of a standard geometric-Brownian term:

    d mu_t = theta * (mu_l - mu_t) dt + dL_t
    d ln S_t = (mu_t - sigma^2 / 2) dt + sigma dW_t

Everything observable downstream is a closed form in (theta, mu_l,
sigma_levy_sq, sigma) plus the initial drift mu0, and every closed form
here has a Monte Carlo twin (`simulate_ou`, `simulate_coupled`) used as an
independent oracle by the test suite and the `simulate` CLI subcommand.

Time is measured in ticks throughout; `dt` converts steps to tick time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, NumericalError

# Paths are simulated in fixed-size blocks, each with its own child seed
# stream, so results do not depend on how blocks are scheduled.
BLOCK_PATHS = 4096


@dataclass(frozen=True)
class JumpSpec:
    """Compound Poisson jump driver with symmetric Laplace sizes.

    rate: expected jumps per unit time (lambda).
    scale: Laplace scale b of one jump; Var(one jump) = 2 b^2, so the
        per-unit-time variance contributed to the drift is 2 * rate * b^2.
    """

    rate: float = 1.0
    scale: float = 0.1

    def __post_init__(self):
        if self.rate < 0 or self.scale < 0:
            raise ConfigError("jump rate and scale must be non-negative")

    @property
    def variance_per_time(self) -> float:
        return 2.0 * self.rate * self.scale * self.scale


@dataclass(frozen=True)
class OuGbmParams:
    """Parameter bundle for the drift/price system.

    theta: mean-reversion rate per tick (> 0).
    mu_l: long-run drift level (0 in every closed form used downstream).
    jump: jump driver; its variance_per_time is sigma_levy_sq.
    sigma: lognormal price volatility per sqrt(tick).
    rho, k: metric-to-drift coupling; only the product rho*k enters the
        model, but both are kept because reports quote them separately.
    dt: simulation step in ticks.
    """

    theta: float
    sigma: float = 0.0
    rho: float = 1.0
    k: float = 1.0
    mu_l: float = 0.0
    jump: JumpSpec = field(default_factory=JumpSpec)
    dt: float = 0.01

    def __post_init__(self):
        if self.theta <= 0:
            raise ConfigError(f"theta must be > 0, got {self.theta}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")

    @property
    def sigma_levy_sq(self) -> float:
        return self.jump.variance_per_time

    @property
    def coupling(self) -> float:
        """Composite coupling rho*k from metric units to drift units."""
        return self.rho * self.k

    @classmethod
    def from_levy_variance(
        cls,
        theta: float,
        sigma_levy_sq: float,
        jump_rate: float = 1.0,
        **kwargs,
    ) -> "OuGbmParams":
        """Build params from a target per-unit-time jump variance.

        The Laplace scale is solved from sigma_levy_sq = 2 * rate * b^2.
        """
        if sigma_levy_sq < 0:
            raise ConfigError("sigma_levy_sq must be >= 0")
        if sigma_levy_sq > 0 and jump_rate <= 0:
            raise ConfigError("jump_rate must be > 0 when sigma_levy_sq > 0")
        scale = math.sqrt(sigma_levy_sq / (2.0 * jump_rate)) if sigma_levy_sq > 0 else 0.0
        return cls(theta=theta, jump=JumpSpec(rate=jump_rate, scale=scale), **kwargs)


@dataclass(frozen=True)
class ShockState:
    """Initial shock: ofi0 in metric units, mu0 = ofi0 * rho * k in drift units."""

    ofi0: float
    rho: float = 1.0
    k: float = 1.0

    @property
    def mu0(self) -> float:
        mu0 = self.ofi0 * self.rho * self.k
        if not math.isfinite(mu0):
            raise ConfigError("initial drift mu0 must be finite")
        return mu0


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def _check_theta(theta: float) -> None:
    if theta <= 0:
        raise ConfigError(f"theta must be > 0, got {theta}")


def ou_acf_theory(theta: float, dt: float, lag, approx: bool = False):
    """Autocorrelation of the stationary drift at integer lag(s).

    Exact form exp(-theta * lag * dt); with approx=True returns the
    first-order surrogate (1 - theta)^lag, which is only meaningful for
    dt = 1 and small theta and is exposed for comparison plots only.
    """
    _check_theta(theta)
    lag = np.asarray(lag, dtype=float)
    if np.any(lag < 0):
        raise ConfigError("lag must be >= 0")
    if approx:
        out = (1.0 - theta) ** lag
    else:
        out = np.exp(-theta * dt * lag)
    return out if out.ndim else float(out)


def aggregated_acf_theory(theta: float, p: int, lag, dt: float = 1.0):
    """ACF of non-overlapping p-term sums of the drift: exp(-theta*p*lag*dt).

    The scale invariance is exact in the continuous-sampling limit
    theta*dt -> 0; at finite step the lag-1 value exceeds this by roughly
    a factor 1 + theta*dt*(p^2-1)/(3p), so Monte Carlo checks should be
    run with small theta*dt.
    """
    _check_theta(theta)
    if p < 1:
        raise ConfigError(f"aggregation level p must be >= 1, got {p}")
    lag = np.asarray(lag, dtype=float)
    if np.any(lag < 0):
        raise ConfigError("lag must be >= 0")
    out = np.exp(-theta * p * dt * lag)
    return out if out.ndim else float(out)


def expected_cumsum(ofi: float, theta: float, n, mu_l: float = 0.0):
    """Expected cumulative drift sum E[S_n] = E[sum_{t=0}^{n} x_t], x_0 = ofi.

    Geometric closed form (n+1)*mu_l + (ofi - mu_l) * (1 - e^{-theta(n+1)})
    / (1 - e^{-theta}).  n = inf is accepted when mu_l == 0 and returns the
    saturation level ofi / (1 - e^{-theta}).
    """
    _check_theta(theta)
    if np.isscalar(n) and math.isinf(float(n)):
        if mu_l != 0.0:
            raise ConfigError("n = inf diverges unless mu_l == 0")
        return ofi / -math.expm1(-theta)
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ConfigError("n must be >= 0")
    decay = -np.expm1(-theta * (n + 1.0))
    out = (n + 1.0) * mu_l + (ofi - mu_l) * decay / -math.expm1(-theta)
    return out if out.ndim else float(out)


def total_drift_impact(ofi: float, rho: float, k: float, theta: float, t):
    """Aggregate drift contribution ofi*rho*k*(1-e^{-theta t})/(1-e^{-theta}).

    t = inf returns the saturation level ofi*rho*k / (1 - e^{-theta}).
    """
    _check_theta(theta)
    if np.isscalar(t) and math.isinf(float(t)):
        return ofi * rho * k / -math.expm1(-theta)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ConfigError("t must be >= 0")
    out = ofi * rho * k * -np.expm1(-theta * t) / -math.expm1(-theta)
    return out if out.ndim else float(out)


def drift_moments(mu0: float, theta: float, sigma_levy_sq: float, t):
    """Mean and variance of the drift at time t.

    E[mu_t] = mu0 * e^{-theta t};  Var(mu_t) = sigma_levy_sq/(2 theta)
    * (1 - e^{-2 theta t}).  Accepts scalar or array t >= 0.
    """
    _check_theta(theta)
    if sigma_levy_sq < 0:
        raise ConfigError("sigma_levy_sq must be >= 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ConfigError("t must be >= 0")
    mean = mu0 * np.exp(-theta * t)
    var = sigma_levy_sq / (2.0 * theta) * -np.expm1(-2.0 * theta * t)
    if mean.ndim:
        return mean, var
    return float(mean), float(var)


def logret_mean(mu0: float, theta: float, sigma: float, t):
    """Expected log return E[R_t] = mu0 (1 - e^{-theta t}) / theta - sigma^2 t / 2."""
    _check_theta(theta)
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ConfigError("t must be >= 0")
    out = mu0 * -np.expm1(-theta * t) / theta - 0.5 * sigma * sigma * t
    return out if out.ndim else float(out)


def logret_var(sigma: float, sigma_levy_sq: float, theta: float, t):
    """Variance of the log return.

    Var[R_t] = sigma^2 t + (sigma_levy_sq / theta^2) * B(t) with
    B(t) = t - (2/theta)(1-e^{-theta t}) + (1/(2 theta))(1-e^{-2 theta t}).
    B suffers catastrophic cancellation as theta*t -> 0 (true size
    theta^2 t^3 / 3), so a series branch takes over below theta*t = 1e-4.
    """
    _check_theta(theta)
    if sigma < 0 or sigma_levy_sq < 0:
        raise ConfigError("sigma and sigma_levy_sq must be >= 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ConfigError("t must be >= 0")
    x = theta * t
    direct = t + (2.0 / theta) * np.expm1(-x) - (0.5 / theta) * np.expm1(-2.0 * x)
    # B(t) = theta^2 t^3/3 - theta^3 t^4/4 + 7 theta^4 t^5/60 - ...
    series = (x * x / theta) * t * (1.0 / 3.0 - x / 4.0 + 7.0 * x * x / 60.0)
    bracket = np.where(x < 1e-4, series, direct)
    out = sigma * sigma * t + sigma_levy_sq / (theta * theta) * bracket
    return out if out.ndim else float(out)


def quasi_sharpe(mu0: float, theta: float, sigma: float, sigma_levy_sq: float, t):
    """Response ratio QS(t) = E[R_t] / Std[R_t], with QS(0) = 0 as the limit.

    Small t: QS(t) ~ ((mu0 - sigma^2/2)/sigma) * sqrt(t).  Large t with
    mu_l = 0: QS(t)/sqrt(t) -> -(sigma^2/2)/sqrt(sigma^2 + sigma_levy_sq/theta^2).
    """
    t_in = np.asarray(t, dtype=float)
    t = np.atleast_1d(t_in)
    if np.any(t < 0):
        raise ConfigError("t must be >= 0")
    mean = np.atleast_1d(np.asarray(logret_mean(mu0, theta, sigma, t), dtype=float))
    var = np.atleast_1d(np.asarray(logret_var(sigma, sigma_levy_sq, theta, t), dtype=float))
    positive = t > 0
    if np.any(var[positive] <= 0.0):
        raise NumericalError("QS undefined: zero return variance (sigma and sigma_levy_sq both 0)")
    out = np.zeros_like(t)
    out[positive] = mean[positive] / np.sqrt(var[positive])
    return out if t_in.ndim else float(out[0])


def logret_mean_argmax(mu0: float, theta: float, sigma: float) -> tuple[float, float]:
    """Interior maximiser of E[R_t]: requires mu0 > sigma^2 / 2 > 0.

    Returns (t_star, max_value) with t_star = -ln(sigma^2 / (2 mu0)) / theta
    and max = mu0/theta + sigma^2/(2 theta) * ln(sigma^2 / (2 e mu0)).
    """
    _check_theta(theta)
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    if sigma == 0.0:
        raise NumericalError("no interior maximum: sigma = 0 gives monotone saturation")
    s2 = sigma * sigma
    if mu0 <= 0.5 * s2:
        raise NumericalError(
            f"no interior maximum: requires mu0 > sigma^2/2 (got mu0={mu0}, sigma^2/2={0.5 * s2})"
        )
    t_star = -math.log(s2 / (2.0 * mu0)) / theta
    peak = mu0 / theta + s2 / (2.0 * theta) * math.log(s2 / (2.0 * math.e * mu0))
    return t_star, peak


def theory_curves(mu0: float, theta: float, sigma: float, sigma_levy_sq: float, ts):
    """Evaluate (E[R_t], Std[R_t], QS(t)) on a time grid for CSV emission."""
    ts = np.asarray(ts, dtype=float)
    mean = np.asarray(logret_mean(mu0, theta, sigma, ts), dtype=float)
    std = np.sqrt(np.asarray(logret_var(sigma, sigma_levy_sq, theta, ts), dtype=float))
    qs = np.asarray(quasi_sharpe(mu0, theta, sigma, sigma_levy_sq, ts), dtype=float)
    return mean, std, qs


# ---------------------------------------------------------------------------
# Monte Carlo simulators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathEnsemble:
    """Recorded simulation output.

    times: recorded times in ticks, shape (n_rec,); times[0] is step 0.
    drift: drift paths, shape (n_paths, n_rec), or None.
    logret: log-return paths, same shape, or None.
    """

    times: np.ndarray
    drift: Optional[np.ndarray]
    logret: Optional[np.ndarray]
    dt: float
    seed: int

    @property
    def n_paths(self) -> int:
        arr = self.drift if self.drift is not None else self.logret
        return 0 if arr is None else arr.shape[0]


def _resolve_record_steps(n_steps: int, record_steps: Optional[Sequence[int]]) -> np.ndarray:
    if record_steps is None:
        return np.arange(n_steps + 1)
    rec = np.asarray(sorted(set(int(s) for s in record_steps)), dtype=np.int64)
    if rec.size == 0 or rec[0] < 0 or rec[-1] > n_steps:
        raise ConfigError("record_steps must be non-empty within [0, n_steps]")
    return rec


def _block_sizes(n_paths: int):
    start = 0
    block = 0
    while start < n_paths:
        yield block, min(BLOCK_PATHS, n_paths - start)
        start += BLOCK_PATHS
        block += 1


def _step_jumps(rng: np.random.Generator, jump: JumpSpec, dt: float, size: int) -> np.ndarray:
    """Sum of the step's Laplace jumps: b * (Gamma(N,1) - Gamma(N,1)), N ~ Poisson(rate*dt)."""
    if jump.rate <= 0.0 or jump.scale <= 0.0:
        return np.zeros(size)
    counts = rng.poisson(jump.rate * dt, size=size).astype(float)
    return jump.scale * (rng.gamma(counts) - rng.gamma(counts))


def simulate_ou(
    params: OuGbmParams,
    mu0: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    scheme: str = "euler",
    record_steps: Optional[Sequence[int]] = None,
) -> PathEnsemble:
    """Simulate drift paths mu_t alone.

    scheme="euler" is the plain explicit update mu += theta*(mu_l-mu)*dt
    (stationary variance biased by the factor 1/(1-theta*dt/2)); "exact"
    multiplies by e^{-theta*dt} per step so the discrete path is an AR(1)
    with exactly the continuous-time autocorrelation at every lag.
    record_steps limits which step indices are stored (default: all).
    """
    if n_steps < 1 or n_paths < 1:
        raise ConfigError("n_steps and n_paths must be >= 1")
    if scheme not in ("euler", "exact"):
        raise ConfigError(f"unknown scheme {scheme!r}")
    if scheme == "euler" and params.theta * params.dt >= 1.0:
        raise NumericalError(
            f"explicit Euler unstable: theta*dt = {params.theta * params.dt:.3g} >= 1"
        )
    rec = _resolve_record_steps(n_steps, record_steps)
    out = np.empty((n_paths, rec.size))
    dt = params.dt
    decay = 1.0 - params.theta * dt if scheme == "euler" else math.exp(-params.theta * dt)
    for block, size in _block_sizes(n_paths):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
        rows = slice(block * BLOCK_PATHS, block * BLOCK_PATHS + size)
        mu = np.full(size, float(mu0))
        rec_pos = 0
        if rec[0] == 0:
            out[rows, 0] = mu
            rec_pos = 1
        for step in range(1, n_steps + 1):
            mu = params.mu_l + (mu - params.mu_l) * decay
            mu += _step_jumps(rng, params.jump, dt, size)
            if rec_pos < rec.size and rec[rec_pos] == step:
                out[rows, rec_pos] = mu
                rec_pos += 1
    return PathEnsemble(times=rec * dt, drift=out, logret=None, dt=dt, seed=seed)


def simulate_coupled(
    params: OuGbmParams,
    mu0: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    record_steps: Optional[Sequence[int]] = None,
) -> PathEnsemble:
    """Simulate (mu_t, R_t) jointly; R_t is the log return ln(S_t/S_0).

    The drift decays exactly (factor e^{-theta*dt} per step) and its time
    integral is accumulated by the trapezoid rule; a left-endpoint sum
    would bias E[R_t] by O(theta*dt) * mu0 * t, which is larger than the
    Monte Carlo standard error at the default step, while the trapezoid
    bias is O((theta*dt)^2).  The Brownian term is exact in distribution.
    """
    if n_steps < 1 or n_paths < 1:
        raise ConfigError("n_steps and n_paths must be >= 1")
    if params.theta * params.dt >= 0.5:
        raise NumericalError(
            f"drift integration too coarse: theta*dt = {params.theta * params.dt:.3g} >= 0.5"
        )
    rec = _resolve_record_steps(n_steps, record_steps)
    drift_out = np.empty((n_paths, rec.size))
    ret_out = np.empty((n_paths, rec.size))
    dt = params.dt
    decay = math.exp(-params.theta * dt)
    sig_dt = params.sigma * math.sqrt(dt)
    ito = 0.5 * params.sigma * params.sigma * dt
    for block, size in _block_sizes(n_paths):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
        rows = slice(block * BLOCK_PATHS, block * BLOCK_PATHS + size)
        mu = np.full(size, float(mu0))
        ret = np.zeros(size)
        rec_pos = 0
        if rec[0] == 0:
            drift_out[rows, 0] = mu
            ret_out[rows, 0] = ret
            rec_pos = 1
        for step in range(1, n_steps + 1):
            mu_next = params.mu_l + (mu - params.mu_l) * decay
            mu_next += _step_jumps(rng, params.jump, dt, size)
            ret += 0.5 * (mu + mu_next) * dt - ito
            if sig_dt > 0.0:
                ret += sig_dt * rng.standard_normal(size)
            mu = mu_next
            if rec_pos < rec.size and rec[rec_pos] == step:
                drift_out[rows, rec_pos] = mu
                ret_out[rows, rec_pos] = ret
                rec_pos += 1
    return PathEnsemble(times=rec * dt, drift=drift_out, logret=ret_out, dt=dt, seed=seed)


# ---------------------------------------------------------------------------
# Monte Carlo vs closed-form comparison (the `simulate` CLI report)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentCheck:
    quantity: str
    t: float
    theory: float
    estimate: float
    se: float
    n_se: float

    @property
    def ok(self) -> bool:
        return self.n_se <= 3.0


def mean_se(sample: np.ndarray) -> float:
    return float(sample.std(ddof=0) / math.sqrt(sample.size))


def variance_se(sample: np.ndarray) -> float:
    """Large-sample standard error of the sample variance: sqrt((m4 - s^4)/n)."""
    centered = sample - sample.mean()
    s2 = float(np.mean(centered**2))
    m4 = float(np.mean(centered**4))
    return math.sqrt(max(m4 - s2 * s2, 0.0) / sample.size)


def _moment_rows(label: str, times, values: np.ndarray, th_mean, th_var) -> list[MomentCheck]:
    rows = []
    th_mean = np.atleast_1d(np.asarray(th_mean, dtype=float))
    th_var = np.atleast_1d(np.asarray(th_var, dtype=float))
    for j, t in enumerate(np.atleast_1d(times)):
        col = values[:, j]
        est_mean, se_m = float(col.mean()), mean_se(col)
        est_var, se_v = float(col.var(ddof=0)), variance_se(col)
        rows.append(MomentCheck(f"{label}_mean", float(t), th_mean[j], est_mean, se_m,
                                abs(est_mean - th_mean[j]) / se_m if se_m > 0 else 0.0))
        rows.append(MomentCheck(f"{label}_var", float(t), th_var[j], est_var, se_v,
                                abs(est_var - th_var[j]) / se_v if se_v > 0 else 0.0))
    return rows


def mc_report(
    params: OuGbmParams,
    mu0: float,
    times: Sequence[float],
    n_paths: int,
    seed: int,
) -> list[MomentCheck]:
    """Compare ensemble moments of the coupled system against closed forms.

    `times` are in ticks and must be multiples of params.dt; drift mean and
    variance and log-return mean and variance are each checked at every
    requested time.
    """
    steps = []
    for t in times:
        s = t / params.dt
        if abs(s - round(s)) > 1e-9:
            raise ConfigError(f"time {t} is not a multiple of dt={params.dt}")
        steps.append(int(round(s)))
    if any(s < 1 for s in steps):
        raise ConfigError("check times must be >= dt")
    ens = simulate_coupled(params, mu0, max(steps), n_paths, seed, record_steps=steps)
    d_mean, d_var = drift_moments(mu0, params.theta, params.sigma_levy_sq, ens.times)
    r_mean = logret_mean(mu0, params.theta, params.sigma, ens.times)
    r_var = logret_var(params.sigma, params.sigma_levy_sq, params.theta, ens.times)
    rows = _moment_rows("drift", ens.times, ens.drift, d_mean, d_var)
    rows += _moment_rows("logret", ens.times, ens.logret, r_mean, r_var)
    return rows
