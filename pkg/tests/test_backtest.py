import io
import logging
import math

import numpy as np
import pytest

from helpers import brute_contributions, build, flat_session

from ofilab import (
    COMBO_HEADER,
    GRID_HEADER,
    PARTNERS,
    BacktestRow,
    ComboSpec,
    ConfigError,
    DataError,
    Dataset,
    GridSpec,
    PnlBreakdown,
    SyntheticConfig,
    backtest_report,
    build_dataset,
    combo_curves_frame,
    fit,
    generate_synthetic,
    grid_curves_frame,
    lam_max,
    pnl_evaluate,
    predict,
    run_combo,
    run_grid,
    sign_randomized_null,
    write_backtest_csv,
)

# Two sessions (8 + 4 ticks) with hand-checkable book moves; vol ticks up
# by one inside each session so every omega is +-1.
HAND_ROWS = [
    {},
    {"bq": 8},
    {"bid": 100.2, "bq": 4, "aq": 6},
    {"bid": 100.2, "bq": 4, "ask": 100.6, "aq": 3, "last": 100.4},
    {"bid": 100.0, "bq": 6, "ask": 100.6, "aq": 3, "last": 100.4},
    {"bid": 100.0, "bq": 6, "aq": 7},
    {"bid": 100.2, "bq": 9, "aq": 7, "last": 100.4},
    {"bid": 100.2, "bq": 9, "aq": 2},
    {"sid": "B", "vol": 0},
    {"sid": "B", "bq": 7, "vol": 1},
    {"sid": "B", "bid": 99.8, "bq": 3, "vol": 2, "last": 100.0},
    {"sid": "B", "bid": 99.8, "bq": 3, "ask": 100.6, "aq": 4, "vol": 3},
]

# e_n per tick, session starts excluded (ticks 0 and 8).
HAND_E = {1: 3, 2: 3, 3: 6, 4: -4, 5: -7, 6: 9, 7: 5, 9: 2, 10: -7, 11: 5}


@pytest.fixture(scope="module")
def hand_ticks():
    return build(HAND_ROWS)


@pytest.fixture(scope="module")
def syn_ticks():
    return generate_synthetic(SyntheticConfig(n_ticks=2500, seed=31, session_ticks=1300))


@pytest.fixture(scope="module")
def grid_rows(syn_ticks):
    return run_grid(syn_ticks, GridSpec(hist_wins=(1, 3), horizons=(2, 8)))


def mids(ticks):
    return [(ticks.row(i).bid_price + ticks.row(i).ask_price) / 2
            for i in range(len(ticks))]


class TestBuildDataset:
    def test_hand_enumerated_rolling_sums(self, hand_ticks):
        ds = build_dataset(hand_ticks, hist_win=3, horizon=2)
        # eligible rows: n=3,4,5; n>=6 would reach across the session break
        assert ds.n == 3
        assert ds.columns == ("OFI",)
        assert ds.x[:, 0].tolist() == [
            HAND_E[1] + HAND_E[2] + HAND_E[3],
            HAND_E[2] + HAND_E[3] + HAND_E[4],
            HAND_E[3] + HAND_E[4] + HAND_E[5],
        ]
        m = mids(hand_ticks)
        want_y = [m[5] - m[3], m[6] - m[4], m[7] - m[5]]
        assert (ds.y == np.array(want_y)).all()
        assert ds.y == pytest.approx([-0.2, 0.0, 0.1], abs=1e-12)

    def test_hist_one_feature_is_single_contribution(self, hand_ticks):
        ds = build_dataset(hand_ticks, hist_win=1, horizon=1)
        # n=7 reaches forward into session B; n=8 starts it
        want_n = [1, 2, 3, 4, 5, 6, 9, 10]
        assert ds.x[:, 0].tolist() == [HAND_E[n] for n in want_n]
        m = mids(hand_ticks)
        assert (ds.y == np.array([m[n + 1] - m[n] for n in want_n])).all()

    def test_constant_mid_targets_zero(self):
        ticks = build(flat_session(40))
        ds = build_dataset(ticks, hist_win=3, horizon=5)
        assert (ds.y == 0.0).all()
        assert (ds.x == 0.0).all()

    def test_too_short_series_rejected(self):
        ticks = build(flat_session(4))
        with pytest.raises(DataError, match="no evaluation rows"):
            build_dataset(ticks, hist_win=2, horizon=2)

    def test_all_rows_trimmed_rejected(self):
        ticks = build(flat_session(3) + flat_session(3, sid="B", start=3))
        with pytest.raises(DataError, match="survive session trimming"):
            build_dataset(ticks, hist_win=2, horizon=2)

    def test_validation(self, hand_ticks):
        with pytest.raises(ConfigError):
            build_dataset(hand_ticks, hist_win=0, horizon=1)
        with pytest.raises(ConfigError):
            build_dataset(hand_ticks, hist_win=1, horizon=0)
        with pytest.raises(ConfigError, match="unknown partner"):
            build_dataset(hand_ticks, hist_win=2, horizon=1, partner="VWAP")


class TestPartnerColumns:
    def test_ofi_lag_is_preceding_window(self, hand_ticks):
        ds = build_dataset(hand_ticks, hist_win=2, horizon=1, partner="OFI-lag")
        assert ds.columns == ("OFI", "OFI-lag")
        # lag window must clear the session break too: rows n=4,5,6 only
        assert ds.x[:, 0].tolist() == [2.0, -11.0, 2.0]
        assert ds.x[:, 1].tolist() == [
            HAND_E[1] + HAND_E[2],
            HAND_E[2] + HAND_E[3],
            HAND_E[3] + HAND_E[4],
        ]

    def test_trade_imbalance_column(self, hand_ticks):
        _, _, omega, _ = brute_contributions(hand_ticks)
        ds = build_dataset(hand_ticks, hist_win=2, horizon=1, partner="TI")
        want = [omega[n - 1] + omega[n] for n in (2, 3, 4, 5, 6, 10)]
        assert ds.x[:, 1].tolist() == want
        # spot-check the no-tie rows by hand: buy above mid, sell below
        assert omega[2] == -1.0 and omega[4] == 1.0 and omega[10] == -1.0

    def test_price_change_column(self, hand_ticks):
        m = mids(hand_ticks)
        ds = build_dataset(hand_ticks, hist_win=2, horizon=1, partner="DP")
        want = [m[n] - m[n - 2] for n in (2, 3, 4, 5, 6, 10)]
        assert ds.x[:, 1].tolist() == want

    def test_price_range_column(self, hand_ticks):
        ds = build_dataset(hand_ticks, hist_win=2, horizon=1, partner="Lambda")
        last = [hand_ticks.row(i).last_price for i in range(len(hand_ticks))]
        want = [(max(last[n - 1:n + 1]) - min(last[n - 1:n + 1])) / 2
                for n in (2, 3, 4, 5, 6, 10)]
        assert ds.x[:, 1].tolist() == want

    def test_mean_shift_column(self, hand_ticks):
        _, _, _, run_mean = brute_contributions(hand_ticks)
        ds = build_dataset(hand_ticks, hist_win=2, horizon=1, partner="AvgEn")
        # rows n=2 and n=10 lose their lagged mean to a session start
        want = [run_mean[n] - run_mean[n - 2] for n in (3, 4, 5, 6)]
        assert ds.x[:, 1].tolist() == want
        assert ds.x[0, 1] == 1.0 and ds.x[1, 1] == -1.0


class TestPnlEvaluate:
    def test_hand_grouping(self):
        got = pnl_evaluate(np.array([1.0, -1.0]), np.array([0.2, -0.3]))
        assert got == PnlBreakdown(long=0.2, short=0.3)
        assert got.total == 0.5

    def test_zero_predictions_contribute_nothing(self):
        got = pnl_evaluate(np.zeros(5), np.arange(5.0))
        assert got == PnlBreakdown(0.0, 0.0)
        mixed = pnl_evaluate(np.array([0.0, 2.0, 0.0, -2.0]),
                             np.array([9.9, 0.5, -9.9, -0.25]))
        assert mixed == PnlBreakdown(long=0.5, short=0.25)

    def test_perfect_signs_capture_total_variation(self):
        rng = np.random.default_rng(2)
        actual = rng.standard_normal(100)
        got = pnl_evaluate(np.sign(actual), actual)
        assert got.total == pytest.approx(np.abs(actual).sum(), rel=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ConfigError, match="shape mismatch"):
            pnl_evaluate(np.ones(3), np.ones(4))


class TestRunGrid:
    def test_row_order_and_success(self, grid_rows):
        assert [(r.hist_win, r.horizon) for r in grid_rows] == [(1, 2), (1, 8), (3, 2), (3, 8)]
        assert all(r.error is None for r in grid_rows)

    def test_totalpnl_is_sum_of_cells(self, grid_rows):
        for r in grid_rows:
            assert r.totalpnl == r.trainpnl_l + r.testpnl_l + r.trainpnl_s + r.testpnl_s

    def test_cell_reproducible_from_parts(self, grid_rows, syn_ticks):
        row = grid_rows[-1]
        ds = build_dataset(syn_ticks, row.hist_win, row.horizon)
        assert ds.n == row.n_rows
        split = int(ds.n * 0.8)
        train = Dataset.from_arrays(ds.x[:split], ds.y[:split], ds.columns)
        model = fit(train, row.lam)
        assert tuple(float(c) for c in model.coef) == row.coef
        assert model.intercept == row.intercept
        pnl_te = pnl_evaluate(predict(model, ds.x[split:]), ds.y[split:])
        assert (pnl_te.long, pnl_te.short) == (row.testpnl_l, row.testpnl_s)

    def test_grid_order_is_immaterial(self, grid_rows, syn_ticks):
        perm = run_grid(syn_ticks, GridSpec(hist_wins=(3, 1), horizons=(8, 2)))
        by_cell = {(r.hist_win, r.horizon): r for r in perm}
        assert all(by_cell[(r.hist_win, r.horizon)] == r for r in grid_rows)

    def test_parallel_matches_serial(self, grid_rows, syn_ticks):
        got = run_grid(syn_ticks, GridSpec(hist_wins=(1, 3), horizons=(2, 8)), n_jobs=4)
        assert got == grid_rows

    def test_failed_cell_carries_diagnostics(self, syn_ticks, caplog):
        with caplog.at_level(logging.WARNING, logger="ofilab.backtest"):
            rows = run_grid(syn_ticks, GridSpec(hist_wins=(2,), horizons=(5, 100_000)))
        good, bad = rows
        assert good.error is None
        assert "no evaluation rows" in bad.error
        assert bad.mse is None and bad.totalpnl is None
        assert any("failed" in r.message for r in caplog.records)

    def test_njobs_validation(self, syn_ticks):
        with pytest.raises(ConfigError):
            run_grid(syn_ticks, GridSpec(hist_wins=(1,), horizons=(2,)), n_jobs=0)


class TestInvariance:
    def test_doubling_features_leaves_predictions_unchanged(self, syn_ticks):
        ds = build_dataset(syn_ticks, 2, 5)
        lam = 0.5 * lam_max(ds)
        base = predict(fit(ds, lam), ds.x)
        doubled = Dataset.from_arrays(2.0 * ds.x, ds.y, ds.columns)
        got = predict(fit(doubled, lam), doubled.x)
        assert (got == base).all()

    def test_sign_symmetry_swaps_long_and_short(self, syn_ticks):
        ds = build_dataset(syn_ticks, 2, 5)
        lam = 0.1 * lam_max(ds)
        pred = predict(fit(ds, lam), ds.x)
        flipped = Dataset.from_arrays(-ds.x, -ds.y, ds.columns)
        pred_f = predict(fit(flipped, lam), flipped.x)
        assert (pred_f == -pred).all()
        pnl = pnl_evaluate(pred, ds.y)
        pnl_f = pnl_evaluate(pred_f, -ds.y)
        assert pnl_f.long == pnl.short
        assert pnl_f.short == pnl.long


class TestRunCombo:
    def test_partner_rows_and_layout(self, syn_ticks):
        rows = run_combo(syn_ticks, combos=[ComboSpec("TI"), ComboSpec("DP")],
                         horizons=(2, 8))
        assert [(r.partner, r.horizon) for r in rows] == [
            ("TI", 2), ("TI", 8), ("DP", 2), ("DP", 8)]
        assert all(r.hist_win == 2 for r in rows)
        assert all(len(r.coef) == 2 for r in rows)
        for r in rows:
            assert r.totalpnl == r.trainpnl_l + r.testpnl_l + r.trainpnl_s + r.testpnl_s

    def test_zeroed_partner_matches_single_factor(self, syn_ticks):
        single = build_dataset(syn_ticks, 2, 5)
        paired = build_dataset(syn_ticks, 2, 5, partner="TI")
        assert (paired.x[:, 0] == single.x[:, 0]).all()
        lam = 0.1 * lam_max(paired)
        m_pair = fit(paired, lam)
        assert m_pair.coef[1] == 0.0  # penalty kills the partner column
        m_single = fit(single, lam)
        assert (predict(m_pair, paired.x) == predict(m_single, single.x)).all()

    def test_validation(self, syn_ticks):
        with pytest.raises(ConfigError, match="at least one combo"):
            run_combo(syn_ticks, combos=[])
        with pytest.raises(ConfigError):
            run_combo(syn_ticks, combos=[ComboSpec("TI")], horizons=(0,))


class TestSignRandomizedNull:
    def test_deterministic_per_seed(self, syn_ticks):
        a = sign_randomized_null(syn_ticks, 2, 5, lam=1e-4, n_draws=8, seed=3)
        b = sign_randomized_null(syn_ticks, 2, 5, lam=1e-4, n_draws=8, seed=3)
        c = sign_randomized_null(syn_ticks, 2, 5, lam=1e-4, n_draws=8, seed=4)
        assert a.shape == (8,)
        assert np.isfinite(a).all()
        assert (a == b).all()
        assert (a != c).any()

    def test_draw_count_validated(self, syn_ticks):
        with pytest.raises(ConfigError):
            sign_randomized_null(syn_ticks, 2, 5, lam=1e-4, n_draws=1)


class TestSpecs:
    def test_grid_spec_defaults(self):
        grid = GridSpec()
        assert grid.hist_wins == (1, 2, 5, 10, 20, 30, 60, 120, 240)
        assert grid.horizons == (1, 2, 5, 10, 20, 30, 60, 120, 240, 600, 1200, 3600)
        assert grid.train_frac == 0.8

    def test_grid_spec_validation(self):
        with pytest.raises(ConfigError):
            GridSpec(hist_wins=())
        with pytest.raises(ConfigError):
            GridSpec(horizons=(1, 0))
        with pytest.raises(ConfigError):
            GridSpec(hist_wins=(2.5,))
        with pytest.raises(ConfigError):
            GridSpec(train_frac=1.0)
        with pytest.raises(ConfigError):
            GridSpec(train_frac=0.0)

    def test_combo_spec_validation(self):
        assert ComboSpec("AvgEn").hist_win == 2
        with pytest.raises(ConfigError, match="unknown partner"):
            ComboSpec("VWAP")
        with pytest.raises(ConfigError):
            ComboSpec("TI", hist_win=0)

    def test_partner_registry(self):
        assert PARTNERS == ("OFI-lag", "TI", "DP", "Lambda", "AvgEn")


class TestCsvOutput:
    GOOD = BacktestRow(
        hist_win=1, horizon=1, mse=0.064, r2=0.01123, coef=(0.027,),
        intercept=0.5, trainpnl_l=1.5, testpnl_l=0.25, trainpnl_s=2.0,
        testpnl_s=0.75, totalpnl=4.5)
    BAD = BacktestRow(hist_win=2, horizon=5, error="boom")

    def test_grid_layout_byte_exact(self):
        buf = io.StringIO()
        write_backtest_csv([self.GOOD, self.BAD], buf)
        assert buf.getvalue() == (
            "HistWinSize,FcastHorzn,MSE,R2,Coef0,Intcpt,"
            "Trainpnl-l,Testpnl-l,Trainpnl-s,Testpnl-s,Totalpnl\n"
            "1,1,0.064,0.01123,0.027,0.5,1.5,0.25,2.0,0.75,4.5\n"
            "2,5,,,,,,,,,\n"
        )

    def test_combo_layout_byte_exact(self):
        row = BacktestRow(
            hist_win=2, horizon=10, mse=1.0, r2=0.5, coef=(0.1, -0.2),
            intercept=0.0, trainpnl_l=1.0, testpnl_l=2.0, trainpnl_s=3.0,
            testpnl_s=4.0, totalpnl=10.0, partner="TI")
        buf = io.StringIO()
        write_backtest_csv([row], buf, combo=True)
        assert buf.getvalue() == (
            "HistWinSize,FcastHorzn,MSE,R2,Coef0,Coef1,Intcpt,"
            "Trainpnl-l,Testpnl-l,Trainpnl-s,Testpnl-s,Totalpnl,Partner\n"
            "2,10,1.0,0.5,0.1,-0.2,0.0,1.0,2.0,3.0,4.0,10.0,TI\n"
        )

    def test_nan_cells_emitted_empty(self):
        row = BacktestRow(
            hist_win=1, horizon=2, mse=0.5, r2=math.nan, coef=(0.1,),
            intercept=0.0, trainpnl_l=0.0, testpnl_l=0.0, trainpnl_s=0.0,
            testpnl_s=0.0, totalpnl=0.0)
        buf = io.StringIO()
        write_backtest_csv([row], buf)
        assert buf.getvalue().splitlines()[1] == "1,2,0.5,,0.1,0.0,0.0,0.0,0.0,0.0,0.0"

    def test_file_destination(self, tmp_path):
        dest = tmp_path / "grid.csv"
        write_backtest_csv([self.GOOD], dest)
        text = dest.read_text()
        assert text.startswith(GRID_HEADER + "\n")
        assert text.endswith("4.5\n")

    def test_header_constants(self):
        assert GRID_HEADER == ("HistWinSize,FcastHorzn,MSE,R2,Coef0,Intcpt,"
                               "Trainpnl-l,Testpnl-l,Trainpnl-s,Testpnl-s,Totalpnl")
        assert COMBO_HEADER == ("HistWinSize,FcastHorzn,MSE,R2,Coef0,Coef1,Intcpt,"
                                "Trainpnl-l,Testpnl-l,Trainpnl-s,Testpnl-s,Totalpnl,Partner")


class TestReportAndCurves:
    def test_report_fields(self):
        rows = [TestCsvOutput.GOOD, TestCsvOutput.BAD]
        report = backtest_report(rows)
        assert report[0]["hist_win"] == 1
        assert report[0]["test"] == {"mse": 0.064, "r2": 0.01123}
        assert report[0]["pnl"]["total"] == 4.5
        assert report[0]["error"] is None
        assert report[1]["error"] == "boom"
        assert report[1]["coef"] is None

    def test_grid_curves_pivot(self):
        def row(h, t, pnl):
            return BacktestRow(hist_win=h, horizon=t, totalpnl=pnl)
        frame = grid_curves_frame([
            row(1, 2, 10.0), row(1, 8, 20.0), row(3, 2, 30.0), row(3, 8, 40.0),
            BacktestRow(hist_win=5, horizon=2, error="boom"),
        ])
        assert list(frame.columns) == ["horizon", "hist1", "hist3"]
        assert frame["horizon"].tolist() == [2, 8]
        assert frame["hist3"].tolist() == [30.0, 40.0]

    def test_combo_curves_pivot(self):
        def row(p, t, pnl):
            return BacktestRow(hist_win=2, horizon=t, partner=p, testpnl_l=pnl)
        frame = combo_curves_frame([row("TI", 2, 1.0), row("TI", 8, 2.0),
                                    row("DP", 2, 3.0), row("DP", 8, 4.0)])
        assert list(frame.columns) == ["horizon", "DP", "TI"]
        assert frame["DP"].tolist() == [3.0, 4.0]

    def test_empty_frames(self):
        assert grid_curves_frame([BacktestRow(1, 1, error="x")]).empty
        assert combo_curves_frame([]).empty
