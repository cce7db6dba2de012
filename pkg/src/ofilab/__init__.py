"""Order-flow imbalance analytics: tick metrics, a jump-driven drift model,
and LASSO forecast backtests."""

__version__ = "0.1.0"

from .backtest import (
    COMBO_HEADER,
    GRID_HEADER,
    PARTNERS,
    BacktestRow,
    ComboSpec,
    GridSpec,
    PnlBreakdown,
    backtest_report,
    build_dataset,
    combo_curves_frame,
    grid_curves_frame,
    pnl_evaluate,
    run_combo,
    run_grid,
    sign_randomized_null,
    write_backtest_csv,
)
from .dynamics import (
    JumpSpec,
    OuGbmParams,
    ShockState,
    aggregated_acf_theory,
    drift_moments,
    expected_cumsum,
    logret_mean,
    logret_mean_argmax,
    logret_var,
    mc_report,
    ou_acf_theory,
    quasi_sharpe,
    simulate_coupled,
    simulate_ou,
    theory_curves,
    total_drift_impact,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    NumericalError,
    OfilabError,
    OrderingError,
    ParseError,
    StatsError,
    ValidationError,
)
from .lasso import Dataset, LassoFit, cv_select, fit, lam_max, predict
from .metrics import (
    CANONICAL,
    LAGGED_ASK,
    MetricSeries,
    MetricWindow,
    contributions,
    event_contribution,
    mid_price,
    trade_contribution,
    window_metrics,
    windows_by_seconds,
    windows_by_ticks,
)
from .stats import (
    AcfReport,
    DescriptiveStats,
    RegimeReport,
    autocorr,
    descriptive,
    estimate_theta,
    pearson_corr,
    regime_report,
)
from .synth import SyntheticConfig, generate_synthetic
from .ticks import (
    SessionSpec,
    TickRecord,
    TickSeries,
    filter_sessions,
    parse_ticks,
    serialize_ticks,
)

__all__ = [
    "AcfReport",
    "BacktestRow",
    "CANONICAL",
    "COMBO_HEADER",
    "ComboSpec",
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "Dataset",
    "DescriptiveStats",
    "GRID_HEADER",
    "GridSpec",
    "JumpSpec",
    "LAGGED_ASK",
    "LassoFit",
    "MetricSeries",
    "MetricWindow",
    "NumericalError",
    "OfilabError",
    "OrderingError",
    "OuGbmParams",
    "PARTNERS",
    "ParseError",
    "PnlBreakdown",
    "RegimeReport",
    "SessionSpec",
    "ShockState",
    "StatsError",
    "SyntheticConfig",
    "TickRecord",
    "TickSeries",
    "ValidationError",
    "__version__",
    "aggregated_acf_theory",
    "autocorr",
    "backtest_report",
    "build_dataset",
    "combo_curves_frame",
    "contributions",
    "cv_select",
    "descriptive",
    "drift_moments",
    "estimate_theta",
    "event_contribution",
    "expected_cumsum",
    "filter_sessions",
    "fit",
    "generate_synthetic",
    "grid_curves_frame",
    "lam_max",
    "logret_mean",
    "logret_mean_argmax",
    "logret_var",
    "mc_report",
    "mid_price",
    "ou_acf_theory",
    "parse_ticks",
    "pearson_corr",
    "pnl_evaluate",
    "predict",
    "quasi_sharpe",
    "regime_report",
    "run_combo",
    "run_grid",
    "serialize_ticks",
    "sign_randomized_null",
    "simulate_coupled",
    "simulate_ou",
    "theory_curves",
    "total_drift_impact",
    "trade_contribution",
    "window_metrics",
    "windows_by_seconds",
    "windows_by_ticks",
    "write_backtest_csv",
]
