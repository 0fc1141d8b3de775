import numpy as np
import pytest

from adascale_lab import ConfigError
from adascale_lab import config as config_mod
from adascale_lab.cli import main

QUAD_CFG = """\
objective.kind = noisy_quadratic
objective.dim = 4
objective.a_diag = 1.0
objective.noise_diag = 0.5
schedule.family = constant
schedule.eta0 = 0.05
run.algorithm = adascale
run.scale = 4
run.T_SI = 40
run.w0 = 1,1,1,1
"""

DET_CFG = """\
objective.kind = noisy_quadratic
objective.dim = 2
objective.noise_diag = 0.0
schedule.family = constant
schedule.eta0 = 0.1
run.algorithm = adascale
run.scale = 4
run.T_SI = 30
run.w0 = 1,1
"""


def write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfigRoundTrip:
    def test_parse_serialize_round_trip(self):
        flat = config_mod.parse_config(QUAD_CFG)
        again = config_mod.parse_config(config_mod.serialize_config(flat))
        assert again == flat

    def test_comments_and_blanks_ignored(self):
        flat = config_mod.parse_config("# note\n\nrun.scale = 3\n")
        assert flat == {"run.scale": "3"}

    def test_parse_errors(self):
        with pytest.raises(ConfigError):
            config_mod.parse_config("no equals sign")
        with pytest.raises(ConfigError):
            config_mod.parse_config("a = 1\na = 2")

    def test_elastic_round_trip(self):
        elastic = config_mod.parse_elastic("0:2,250:8,500:32")
        assert elastic == [(0.0, 2), (250.0, 8), (500.0, 32)]
        assert config_mod.format_elastic(elastic) == "0:2,250:8,500:32"

    def test_elastic_parse_errors(self):
        with pytest.raises(ConfigError):
            config_mod.parse_elastic("250")
        with pytest.raises(ConfigError):
            config_mod.parse_elastic("")


class TestBuildTrainConfig:
    def test_quadratic_config(self):
        cfg = config_mod.build_train_config(config_mod.parse_config(QUAD_CFG))
        assert cfg.scale == 4
        assert cfg.total_si == 40
        assert cfg.objective.dim == 4
        np.testing.assert_array_equal(cfg.w0, np.ones(4))

    def test_classifier_config(self):
        flat = config_mod.parse_config(
            "objective.kind = classifier\n"
            "objective.model = mlp\n"
            "objective.n_features = 3\n"
            "objective.hidden = 4\n"
            "schedule.eta0 = 0.1\n"
            "run.T_SI = 10\n"
        )
        cfg = config_mod.build_train_config(flat)
        assert cfg.objective.dim == 4 * 3 + 4 + 4 + 1

    def test_both_horizons_rejected(self):
        flat = config_mod.parse_config(QUAD_CFG + "run.T = 10\n")
        with pytest.raises(ConfigError):
            config_mod.build_train_config(flat)

    def test_missing_required_key(self):
        with pytest.raises(ConfigError):
            config_mod.build_train_config({"objective.kind": "noisy_quadratic"})

    def test_unknown_objective(self):
        with pytest.raises(ConfigError):
            config_mod.build_objective({"objective.kind": "rosenbrock"})

    def test_sweep_axis(self):
        flat = {"sweep.axis": "scale", "sweep.values": "1,4,16"}
        axis, values = config_mod.build_sweep(flat)
        assert axis == "scale"
        assert values == [1.0, 4.0, 16.0]
        point = config_mod.apply_sweep_point(flat, axis, 4.0)
        assert point == {"run.scale": "4"}

    def test_sweep_validation(self):
        with pytest.raises(ConfigError):
            config_mod.build_sweep({"sweep.axis": "scale", "sweep.values": ""})
        with pytest.raises(ConfigError):
            config_mod.build_sweep({"sweep.axis": "spin", "sweep.values": "1"})


class TestTrainCommand:
    def test_writes_traces_and_summary(self, tmp_path):
        cfg = write(tmp_path, QUAD_CFG)
        out = tmp_path / "out"
        assert main(["train", "--config", cfg, "--out", str(out),
                     "--seeds", "3"]) == 0
        for seed in range(3):
            assert (out / f"trace_seed{seed}.csv").exists()
        summary = (out / "summary.txt").read_text()
        assert "final_F = " in summary
        assert "final_F_std = " in summary
        assert "config.run.scale = 4" in summary

    def test_reruns_are_bit_identical(self, tmp_path):
        cfg = write(tmp_path, QUAD_CFG)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["train", "--config", cfg, "--out", str(out1), "--seeds", "2"])
        main(["train", "--config", cfg, "--out", str(out2), "--seeds", "2",
              "--threads", "2"])
        for seed in range(2):
            name = f"trace_seed{seed}.csv"
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_s1_trace_has_t_si_rows(self, tmp_path):
        cfg = write(tmp_path, QUAD_CFG.replace("run.scale = 4", "run.scale = 1"))
        out = tmp_path / "out"
        main(["train", "--config", cfg, "--out", str(out), "--seeds", "1"])
        lines = (out / "trace_seed0.csv").read_text().splitlines()
        assert len(lines) == 2 + 40  # header lines + T_SI iterations

    def test_seed_list(self, tmp_path):
        cfg = write(tmp_path, QUAD_CFG)
        out = tmp_path / "out"
        main(["train", "--config", cfg, "--out", str(out),
              "--seed-list", "7,11"])
        assert (out / "trace_seed7.csv").exists()
        assert (out / "trace_seed11.csv").exists()

    def test_invalid_config_exits_2(self, tmp_path):
        cfg = write(tmp_path, QUAD_CFG + "run.T = 99\n")
        assert main(["train", "--config", cfg, "--out",
                     str(tmp_path / "o")]) == 2

    def test_missing_config_file_exits_2(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope.cfg"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_diverged_run_marked_na_exit_zero(self, tmp_path):
        text = QUAD_CFG.replace("schedule.eta0 = 0.05", "schedule.eta0 = 5.0")
        text = text.replace("run.T_SI = 40", "run.T_SI = 2000")
        cfg = write(tmp_path, text)
        out = tmp_path / "out"
        assert main(["train", "--config", cfg, "--out", str(out),
                     "--seeds", "1"]) == 0
        summary = (out / "summary.txt").read_text()
        assert "final_F = N/A" in summary
        assert "diverged_seeds = 1" in summary


class TestSweepCommand:
    def test_scale_sweep_iterations_non_increasing(self, tmp_path):
        text = QUAD_CFG.replace("run.scale = 4\n", "") + (
            "sweep.axis = scale\nsweep.values = 1,4,16\n"
        )
        cfg = write(tmp_path, text)
        out = tmp_path / "sw"
        assert main(["sweep", "--config", cfg, "--out", str(out),
                     "--seeds", "2"]) == 0
        rows = (out / "sweep.csv").read_text().splitlines()
        assert rows[0] == "scale,final_F,total_iterations,diverged_seeds"
        iters = [float(r.split(",")[2]) for r in rows[1:]]
        assert iters == sorted(iters, reverse=True)

    def test_theta_sweep_matrix_rows(self, tmp_path):
        scale = 32
        thetas = [0.0, 1 - scale / 100, 1 - scale / 1000]
        text = QUAD_CFG.replace("run.scale = 4", f"run.scale = {scale}") + (
            "sweep.axis = theta\n"
            f"sweep.values = {','.join(str(t) for t in thetas)}\n"
        )
        cfg = write(tmp_path, text)
        out = tmp_path / "sw"
        assert main(["sweep", "--config", cfg, "--out", str(out),
                     "--seeds", "1"]) == 0
        rows = (out / "sweep.csv").read_text().splitlines()
        assert len(rows) == 1 + 3

    def test_empty_axis_exits_2(self, tmp_path):
        cfg = write(tmp_path, QUAD_CFG + "sweep.axis = scale\nsweep.values =\n")
        assert main(["sweep", "--config", cfg, "--out",
                     str(tmp_path / "sw")]) == 2


class TestVerifyCommand:
    def test_prop1_suite_passes(self, tmp_path, capsys):
        out = tmp_path / "rep"
        assert main(["verify", "--suite", "prop1", "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert "PASS" in printed
        assert (out / "verify.txt").exists()

    def test_unknown_suite_exits_2(self):
        assert main(["verify", "--suite", "nope"]) == 2

    def test_no_subcommand_exits_2(self):
        assert main([]) == 2


class TestGainCompareCommand:
    def test_deterministic_objective_all_columns_one(self, tmp_path):
        cfg = write(tmp_path, DET_CFG)
        out = tmp_path / "gc"
        assert main(["gain-compare", "--config", cfg, "--out", str(out),
                     "--seeds", "1", "--every", "10"]) == 0
        rows = (out / "gain_compare_seed0.csv").read_text().splitlines()[2:]
        for row in rows:
            _, online, offline, exact = row.split(",")
            assert float(online) == 1.0
            assert float(offline) == 1.0
            assert float(exact) == 1.0

    def test_interval_larger_than_run_gives_single_row(self, tmp_path):
        cfg = write(tmp_path, DET_CFG)
        out = tmp_path / "gc"
        main(["gain-compare", "--config", cfg, "--out", str(out),
              "--seeds", "1", "--every", "1000"])
        rows = (out / "gain_compare_seed0.csv").read_text().splitlines()
        assert len(rows) == 3  # seed header, column header, t=0 row
        assert rows[2].startswith("0,")

    def test_online_tracks_analytic_after_burn_in(self, tmp_path):
        text = """\
objective.kind = noisy_quadratic
objective.dim = 64
objective.noise_diag = 1.0
schedule.family = constant
schedule.eta0 = 0.002
run.algorithm = adascale
run.scale = 16
run.T_SI = 20000
"""
        cfg = write(tmp_path, text)
        out = tmp_path / "gc"
        main(["gain-compare", "--config", cfg, "--out", str(out),
              "--seeds", "1", "--every", "50"])
        rows = (out / "gain_compare_seed0.csv").read_text().splitlines()[2:]
        burn_in = 1.0 / (1.0 - (1.0 - 16 / 1000.0))  # 62.5 iterations
        checked = 0
        for row in rows:
            t, online, _, exact = row.split(",")
            if float(t) >= 2 * burn_in:
                assert float(online) == pytest.approx(float(exact), rel=0.10)
                checked += 1
        assert checked > 10

    def test_requires_adascale(self, tmp_path):
        text = DET_CFG.replace("run.algorithm = adascale",
                               "run.algorithm = scaled_sgd")
        text = text.replace("run.T_SI = 30", "run.T = 30")
        cfg = write(tmp_path, text)
        assert main(["gain-compare", "--config", cfg, "--out",
                     str(tmp_path / "gc")]) == 2
