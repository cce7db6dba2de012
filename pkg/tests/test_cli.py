import hashlib
import json
import subprocess
import sys
from types import SimpleNamespace

import pytest

from ofilab import COMBO_HEADER, GRID_HEADER, parse_ticks
from ofilab import cli


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture()
def out(tmp_path):
    return tmp_path / "out"


@pytest.fixture(scope="module")
def tk10(data_dir):
    return data_dir / "ticks_10k.csv"


@pytest.fixture(scope="module")
def tk1(data_dir):
    return data_dir / "ticks_1k.csv"


class TestExitCodes:
    def test_success(self, tk1, out):
        assert run_cli("describe", "--input", tk1, "--out", out) == 0

    def test_config_error_is_2(self, tk1, out):
        assert run_cli("metrics", "--input", tk1, "--out", out) == 2  # no window
        assert run_cli("metrics", "--input", tk1, "--window-ticks", 50,
                       "--window-seconds", 30, "--out", out) == 2
        assert run_cli("describe", "--out", out) == 2  # no data source

    def test_data_error_is_3(self, tmp_path, out):
        missing = tmp_path / "nope.csv"
        assert run_cli("describe", "--input", missing, "--out", out) == 3
        bad = tmp_path / "bad.csv"
        bad.write_text("wrong,header\n1,2\n")
        assert run_cli("describe", "--input", bad, "--out", out) == 3

    def test_numerical_error_is_4(self, out, monkeypatch):
        fake = SimpleNamespace(quantity="drift_mean", t=0.5, theory=1.0,
                               estimate=9.0, se=0.1, n_se=80.0, ok=False)
        monkeypatch.setattr(cli, "mc_report", lambda *a, **k: [fake])
        assert run_cli("simulate", "--n-paths", 100, "--times", "0.5",
                       "--out", out) == 4
        doc = json.loads((out / "simulate.json").read_text())
        assert doc["n_failed"] == 1

    def test_argparse_failures(self, capsys):
        with pytest.raises(SystemExit) as err:
            run_cli("no-such-command")
        assert err.value.code == 2
        with pytest.raises(SystemExit) as err:
            run_cli("--version")
        assert err.value.code == 0
        assert "ofilab 0.1.0" in capsys.readouterr().out

    def test_entry_point_installed(self):
        got = subprocess.run(["ofilab", "--version"], capture_output=True, text=True)
        assert got.returncode == 0
        assert got.stdout.strip() == "ofilab 0.1.0"


class TestConfigHandling:
    def test_flag_beats_config_beats_default(self, tk1, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"autocorr": {"max_lag": 4}}))
        d1, d2, d3 = tmp_path / "d1", tmp_path / "d2", tmp_path / "d3"
        assert run_cli("autocorr", "--input", tk1, "--out", d1) == 0
        assert run_cli("autocorr", "--input", tk1, "--config", cfg, "--out", d2) == 0
        assert run_cli("autocorr", "--input", tk1, "--config", cfg,
                       "--max-lag", 2, "--out", d3) == 0
        n_rows = lambda d: len((d / "autocorr.csv").read_text().splitlines()) - 1
        assert n_rows(d1) == 10  # default
        assert n_rows(d2) == 4   # config file
        assert n_rows(d3) == 2   # flag wins

    def test_input_and_out_dir_from_config(self, tk1, tmp_path):
        dest = tmp_path / "fromcfg"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"input": str(tk1), "out_dir": str(dest)}))
        assert run_cli("describe", "--config", cfg) == 0
        assert (dest / "describe.csv").exists()

    def test_bad_config_files(self, tk1, tmp_path, out):
        missing = tmp_path / "none.json"
        assert run_cli("describe", "--input", tk1, "--config", missing, "--out", out) == 2
        notjson = tmp_path / "a.json"
        notjson.write_text("{nope")
        assert run_cli("describe", "--input", tk1, "--config", notjson, "--out", out) == 2
        alist = tmp_path / "b.json"
        alist.write_text("[1,2]")
        assert run_cli("describe", "--input", tk1, "--config", alist, "--out", out) == 2

    def test_unknown_keys_rejected(self, tk1, tmp_path, out):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"autocorr": {"maxlag": 3}}))
        assert run_cli("autocorr", "--input", tk1, "--config", cfg, "--out", out) == 2
        cfg.write_text(json.dumps({"synth": {"n_ticks": 10, "params": {"thta": 1}}}))
        assert run_cli("synth", "--config", cfg, "--out", out) == 2

    def test_two_data_sources_rejected(self, tk1, tmp_path, out):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"synth": {"n_ticks": 100}}))
        assert run_cli("describe", "--input", tk1, "--config", cfg, "--out", out) == 2

    def test_synth_flags_equal_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(
            {"synth": {"n_ticks": 400, "params": {"theta": 0.3}}, "seed": 5}))
        d1, d2 = tmp_path / "d1", tmp_path / "d2"
        assert run_cli("synth", "--config", cfg, "--out", d1) == 0
        assert run_cli("synth", "--n-ticks", 400, "--theta", 0.3, "--seed", 5,
                       "--out", d2) == 0
        assert (d1 / "ticks.csv").read_bytes() == (d2 / "ticks.csv").read_bytes()


class TestManifest:
    def test_manifest_contents(self, tk1, out):
        assert run_cli("describe", "--input", tk1, "--seed", 9, "--out", out) == 0
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["subcommand"] == "describe"
        assert doc["input"] == str(tk1)
        assert doc["seed"] == 9
        assert doc["params"]["series"] == "e"
        assert doc["params"]["convention"] == "canonical"
        assert doc["params"]["trim_count"] == 60
        for lib in ("python", "ofilab", "numpy", "pandas", "scipy"):
            assert doc["versions"][lib]
        for name in doc["outputs"]:
            assert (out / name).exists()
        assert set(doc["outputs"]) == {"describe.csv", "describe.json"}

    def test_synth_manifest_echoes_model(self, out):
        assert run_cli("synth", "--n-ticks", 300, "--seed", 5, "--theta", 0.3,
                       "--out", out) == 0
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["synth"]["n_ticks"] == 300
        assert doc["synth"]["params"]["theta"] == 0.3
        assert doc["synth"]["params"]["sigma_levy_sq"] == 8.0
        assert doc["n_ticks"] == 300


class TestPipelines:
    def test_synth_then_backtest_deterministic(self, tmp_path):
        lines = {}
        for tag in ("a", "b"):
            syn = tmp_path / f"syn_{tag}"
            bt = tmp_path / f"bt_{tag}"
            assert run_cli("synth", "--n-ticks", 3000, "--seed", 7, "--out", syn) == 0
            assert run_cli("backtest", "--input", syn / "ticks.csv",
                           "--hist-wins", "1,2", "--horizons", "2,8",
                           "--out", bt) == 0
            lines[tag] = (bt / "backtest.csv").read_bytes()
            assert (syn / "ticks.csv").exists()
        assert lines["a"] == lines["b"]

    def test_backtest_parallel_matches_serial(self, tk10, tmp_path):
        outs = {}
        for jobs in (1, 4):
            d = tmp_path / f"j{jobs}"
            assert run_cli("backtest", "--input", tk10, "--hist-wins", "1,2",
                           "--horizons", "2,8", "--n-jobs", jobs, "--out", d) == 0
            outs[jobs] = (d / "backtest.csv").read_bytes()
        assert outs[1] == outs[4]

    def test_backtest_outputs(self, tk10, out):
        assert run_cli("backtest", "--input", tk10, "--hist-wins", "1,2",
                       "--horizons", "2,8", "--out", out) == 0
        csv_lines = (out / "backtest.csv").read_text().splitlines()
        assert csv_lines[0] == GRID_HEADER
        assert len(csv_lines) == 5
        report = json.loads((out / "backtest.json").read_text())
        assert len(report) == 4
        assert all(r["error"] is None for r in report)
        curves = (out / "backtest_curves.csv").read_text().splitlines()
        assert curves[0] == "horizon,hist1,hist2"
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["n_cells"] == 4 and doc["n_failed"] == 0

    def test_backtest_all_cells_failed_is_3(self, tk1, out):
        assert run_cli("backtest", "--input", tk1, "--hist-wins", "1",
                       "--horizons", "100000", "--out", out) == 3
        csv_lines = (out / "backtest.csv").read_text().splitlines()
        assert csv_lines[1].startswith("1,100000,")

    def test_combo_outputs(self, tk10, out):
        assert run_cli("combo", "--input", tk10, "--partners", "TI,DP",
                       "--horizons", "2,8", "--out", out) == 0
        csv_lines = (out / "combo.csv").read_text().splitlines()
        assert csv_lines[0] == COMBO_HEADER
        assert len(csv_lines) == 5
        assert csv_lines[1].endswith(",TI")
        curves = (out / "combo_curves.csv").read_text().splitlines()
        assert curves[0] == "horizon,DP,TI"

    def test_combo_bad_partner_is_2(self, tk10, out):
        assert run_cli("combo", "--input", tk10, "--partners", "VWAP",
                       "--horizons", "2", "--out", out) == 2

    def test_inputs_never_mutated(self, tk10, out):
        before = sha(tk10)
        assert run_cli("metrics", "--input", tk10, "--window-ticks", 100,
                       "--out", out) == 0
        assert sha(tk10) == before


class TestSubcommandOutputs:
    def test_metrics_layout(self, tk1, out):
        assert run_cli("metrics", "--input", tk1, "--window-ticks", 100,
                       "--out", out) == 0
        lines = (out / "metrics.csv").read_text().splitlines()
        assert lines[0] == "window_start_ms,window_end_ms,kind,value"
        assert len(lines) > 1

    def test_metrics_window_too_wide_is_3(self, tk1, out):
        assert run_cli("metrics", "--input", tk1, "--window-ticks", 10_000,
                       "--out", out) == 3

    def test_autocorr_outputs(self, tk10, out):
        assert run_cli("autocorr", "--input", tk10, "--max-lag", 5, "--out", out) == 0
        lines = (out / "autocorr.csv").read_text().splitlines()
        assert lines[0] == "lag,rho,cum_rho"
        assert len(lines) == 6
        rho1 = float(lines[1].split(",")[1])
        assert 0.5 < rho1 < 0.7  # generator targets e^{-0.5} ~ 0.607
        doc = json.loads((out / "autocorr.json").read_text())
        assert doc["series"] == "e" and doc["n"] > 9000

    def test_describe_matches_brute_script(self, tk1, out, data_dir):
        assert run_cli("describe", "--input", tk1, "--out", out) == 0
        cli_lines = (out / "describe.csv").read_text().splitlines()
        brute = subprocess.run(
            [sys.executable, str(data_dir / "describe_brute.py")],
            capture_output=True, text=True, check=True)
        brute_lines = brute.stdout.splitlines()
        assert cli_lines[0] == brute_lines[0] == "Mean,Std,Skewness,Kurtosis"
        got = [float(v) for v in cli_lines[1].split(",")]
        want = [float(v) for v in brute_lines[1].split(",")]
        # mean/std agree bitwise; skew/kurt only to summation order
        assert got == pytest.approx(want, rel=1e-12)
        assert got[:2] == want[:2]

    def test_describe_series_choice(self, tk1, out):
        assert run_cli("describe", "--input", tk1, "--series", "omega",
                       "--out", out) == 0
        doc = json.loads((out / "describe.json").read_text())
        assert doc["series"] == "omega"
        assert doc["moments_defined"] is True

    def test_correlate_layout(self, tk10, tmp_path, out):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"correlate": {"windows_seconds": [30, 60]}}))
        assert run_cli("correlate", "--input", tk10, "--config", cfg, "--out", out) == 0
        lines = (out / "correlate.csv").read_text().splitlines()
        assert lines[0] == "Metric,30s,1m"
        assert [ln.split(",")[0] for ln in lines[1:]] == ["OFI", "TI", "Lmda", "AgEn"]

    def test_regime_layout(self, tk10, out):
        assert run_cli("regime", "--input", tk10, "--out", out) == 0
        lines = (out / "regime.csv").read_text().splitlines()
        assert lines[0] == "Mon," + ",".join(f"lag{k}" for k in range(1, 11))
        assert len(lines) == 2
        assert lines[1].split(",")[0] == "2501"
        doc = json.loads((out / "regime.json").read_text())
        assert doc["kind"] == "e"
        assert doc["weak"] is False
        assert doc["months"][0]["month"] == 2501

    def test_theory_curves_outputs(self, out):
        assert run_cli("theory-curves", "--t-max", 2, "--t-step", 0.5,
                       "--out", out) == 0
        lines = (out / "theory_curves.csv").read_text().splitlines()
        assert lines[0] == "t,ExpLogReturn,StdLogReturn,QuasiSharpe"
        assert len(lines) == 5
        doc = json.loads((out / "theory_curves.json").read_text())
        assert doc["argmax"]["t_star"] == pytest.approx(5.991464547107982, rel=1e-12)
        assert doc["argmax"]["max_mean"] == pytest.approx(16.00426772644601, rel=1e-12)

    def test_simulate_outputs(self, out):
        assert run_cli("simulate", "--n-paths", 5000, "--times", "0.5",
                       "--seed", 1, "--out", out) == 0
        lines = (out / "simulate.csv").read_text().splitlines()
        assert lines[0] == "quantity,t,theory,estimate,se,n_se,ok"
        assert len(lines) == 5  # drift mean/var + logret mean/var
        doc = json.loads((out / "simulate.json").read_text())
        assert doc["n_checks"] == 4 and doc["n_failed"] == 0

    def test_synth_roundtrips_through_parser(self, out):
        assert run_cli("synth", "--n-ticks", 400, "--seed", 5, "--out", out) == 0
        ticks = parse_ticks(out / "ticks.csv")
        assert len(ticks) == 400
