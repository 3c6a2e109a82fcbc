import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pma_reach.cli import EXIT_CONFIG, EXIT_FAULT, EXIT_OK, main
from pma_reach.config import Mode, parse_config
from pma_reach.controller import PmaGains
from pma_reach.errors import ConfigurationError
from pma_reach.simulation import DEFAULT_GAINS, DisturbanceKind
from pma_reach.trajectory import TrajectoryLog, read_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestParseConfig:
    def test_minimal_defaults(self):
        cfg = parse_config('mode = "closed-loop"\n')
        assert cfg.mode is Mode.CLOSED_LOOP
        assert (cfg.integrator.h, cfg.integrator.mu, cfg.integrator.t_final) == (0.01, 0.99, 4.0)
        assert cfg.gains == DEFAULT_GAINS
        np.testing.assert_array_equal(cfg.model.attractor, [1.0, 0.5])
        np.testing.assert_array_equal(cfg.reference.target, cfg.model.attractor)
        np.testing.assert_array_equal(cfg.xi0, [0.0, 0.0])
        assert cfg.disturbance.kind is DisturbanceKind.NONE

    def test_window_accepted(self):
        cfg = parse_config('mode = "disturb"\n[disturbance]\nkind = "linear-recursive"\nt_alpha = 1.74\nt_beta = 1.81\n')
        assert (cfg.disturbance.t_alpha, cfg.disturbance.t_beta) == (1.74, 1.81)

    def test_reversed_window_rejected(self):
        text = 'mode = "disturb"\n[disturbance]\nkind = "linear-recursive"\nt_alpha = 1.81\nt_beta = 1.74\n'
        with pytest.raises(ConfigurationError) as info:
            parse_config(text)
        assert info.value.line is not None

    def test_unknown_key_names_key_and_line(self):
        text = '[model]\nkind = "linear-sink"\nattractr = [1.0]\n'
        with pytest.raises(ConfigurationError) as info:
            parse_config(text)
        assert info.value.key == "model.attractr" and info.value.line == 3
        assert "attractr" in str(info.value) and "line 3" in str(info.value)

    def test_type_mismatch_names_key_and_line(self):
        text = 'mode = "closed-loop"\n\n[integrator]\nh = 0.01\nmu = "high"\n'
        with pytest.raises(ConfigurationError) as info:
            parse_config(text)
        assert info.value.key == "integrator.mu" and info.value.line == 5

    def test_unknown_section(self):
        with pytest.raises(ConfigurationError) as info:
            parse_config("[plant]\nx = 1\n")
        assert info.value.line == 1

    def test_malformed_toml(self):
        with pytest.raises(ConfigurationError):
            parse_config("[model\n")

    def test_invalid_value_reports_position(self):
        with pytest.raises(ConfigurationError) as info:
            parse_config("[gains]\nkp = 1.0\nki = -1.0\n")
        assert info.value.line is not None

    def test_disturb_mode_needs_kind(self):
        with pytest.raises(ConfigurationError):
            parse_config('mode = "disturb"\n')

    def test_mode_override(self):
        assert parse_config('mode = "open-loop"\n', mode="closed-loop").mode is Mode.CLOSED_LOOP

    def test_per_channel_gains(self):
        cfg = parse_config("[gains]\nkp = [1.0, 2.0]\nki = 0.5\n")
        assert cfg.gains == (PmaGains(1.0, 0.5, 1.0, 0.1), PmaGains(2.0, 0.5, 1.0, 0.1))

    def test_optimizer_bounds(self):
        cfg = parse_config('mode = "optimize"\n[optimizer]\nbudget = 10\nk_beta = { lower = 0.0, upper = 0.5, mesh = 0.1 }\n')
        beta = cfg.optimizer.space.parameters[-1]
        assert (beta.name, beta.lower, beta.upper, beta.mesh) == ("k_beta", 0.0, 0.5, 0.1)
        assert cfg.optimizer.budget == 10

    @pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.toml")))
    def test_shipped_configs_parse(self, name):
        parse_config((CONFIGS / name).read_text())


class TestTrajectoryCsv:
    def test_roundtrip(self):
        cfg = parse_config((CONFIGS / "disturb_case1.toml").read_text())
        log = cfg.scenario(with_disturbance=True).run(cfg.gains)
        text = log.to_csv_text()
        back = read_csv(text)
        assert back.header() == log.header()
        assert back.header() == "t,xi_0,xi_1,ref_0,ref_1,u_0,u_1,udist,eps_0,eps_1".split(",")
        for a, b in ((back.xi, log.xi), (back.u, log.u), (back.udist, log.udist), (back.eps, log.eps)):
            np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-300)
        assert back.to_csv_text() == text

    def test_bad_header(self):
        with pytest.raises(ConfigurationError):
            read_csv("t,x,y\n0,1,2\n")


class TestCli:
    def run_cli(self, tmp_path, text, *extra):
        path = write(tmp_path, text)
        prefix = str(tmp_path / "out" / "run")
        return main([str(path), "--out", prefix, *extra]), prefix

    def test_open_loop_control_column_zero(self, tmp_path, capsys):
        code, prefix = self.run_cli(tmp_path, (CONFIGS / "open_loop.toml").read_text())
        assert code == EXIT_OK
        log = read_csv(Path(prefix + "_trajectory.csv"))
        assert not log.u.any()
        assert "final_error=" in capsys.readouterr().out

    def test_window_outside_horizon_exit_1(self, tmp_path):
        text = 'mode = "disturb"\n[disturbance]\nkind = "linear-recursive"\nt_alpha = 3.9\nt_beta = 4.5\n'
        code, prefix = self.run_cli(tmp_path, text)
        assert code == EXIT_CONFIG
        assert not Path(prefix + "_trajectory.csv").exists()

    def test_missing_file_exit_1(self, tmp_path):
        assert main([str(tmp_path / "nope.toml")]) == EXIT_CONFIG

    def test_fault_exit_2_writes_partial_log(self, tmp_path, capsys):
        text = "[gains]\nkp = 100.0\nki = 100.0\nk_alpha = 10.0\nk_beta = 0.0\n"
        code, prefix = self.run_cli(tmp_path, text)
        assert code == EXIT_FAULT
        log = read_csv(Path(prefix + "_trajectory.csv"))
        assert 0 < log.rows < 401 and np.all(np.isfinite(log.xi))
        assert "numeric fault" in capsys.readouterr().out

    def test_optimize_summary_matches_history(self, tmp_path, capsys):
        text = (CONFIGS / "optimize.toml").read_text().replace("budget = 2000", "budget = 25")
        code, prefix = self.run_cli(tmp_path, text)
        assert code == EXIT_OK
        rows = Path(prefix + "_history.csv").read_text().splitlines()
        header = rows[0].split(",")
        ise_col = header.index("objective")
        values = [float(r.split(",")[ise_col]) for r in rows[1:]]
        assert len(values) == 25
        out = capsys.readouterr().out
        best = float(out.split("best_ise=")[1].split()[0])
        assert best == pytest.approx(min(values), rel=1e-8)

    def test_disturb_summary(self, tmp_path, capsys):
        code, _ = self.run_cli(tmp_path, (CONFIGS / "disturb_case2.toml").read_text())
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "peak_error=" in out and "recovery_time=" in out

    def test_plot_data(self, tmp_path):
        code, prefix = self.run_cli(tmp_path, (CONFIGS / "closed_loop.toml").read_text(), "--plot-data")
        assert code == EXIT_OK
        time_rows = Path(prefix + "_time.csv").read_text().splitlines()
        phase_rows = Path(prefix + "_phase.csv").read_text().splitlines()
        assert time_rows[0] == "t,xi_0,xi_1,ref_0,ref_1"
        assert phase_rows[0] == "xi_0,xi_1,ref_0,ref_1"
        assert len(time_rows) == len(phase_rows) == 402

    def test_repeat_runs_byte_identical(self, tmp_path):
        text = (CONFIGS / "disturb_case1.toml").read_text()
        outputs = []
        for i in range(2):
            path = write(tmp_path, text, f"run{i}.toml")
            prefix = str(tmp_path / f"rep{i}")
            assert main([str(path), "--out", prefix]) == EXIT_OK
            outputs.append(Path(prefix + "_trajectory.csv").read_bytes())
        assert outputs[0] == outputs[1]

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "pma_reach", str(CONFIGS / "open_loop.toml"), "--out", str(tmp_path / "m")],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 0, proc.stderr
        assert proc.stdout.startswith("open-loop:")
