"""End-to-end command-line behaviour, exercised in process via entry()."""

import numpy as np
import pytest

from hetfl.cli import entry

TINY = [
    "--K", "6", "--M", "2", "--L", "3", "--C", "3",
    "--N_cu", "16", "--N_mec", "8",
    "--d_features", "4", "--samples_per_device", "16",
    "--test_per_class", "10", "--classes_per_device", "2",
]


def run_cli(argv, capsys):
    code = entry(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestVerify:
    def test_all_checks_pass(self, capsys):
        code, out, err = run_cli(["verify"], capsys)
        assert code == 0
        lines = out.strip().splitlines()
        assert sum(1 for l in lines if l.startswith("ok - ")) == 7
        assert lines[-1] == "all 7 checks passed"
        assert err == ""

    def test_rejects_stray_arguments(self, capsys):
        code, _, err = run_cli(["verify", "--fast"], capsys)
        assert code == 1
        assert err.startswith("ERROR:1:")


class TestRun:
    def test_outputs_and_determinism(self, tmp_path, capsys):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            code, text, _ = run_cli(["run", "--seed", "3", "--out", str(out), *TINY], capsys)
            assert code == 0
            assert "policy = h2rma" in text
            delta_line = next(l for l in text.splitlines() if l.startswith("delta = "))
            assert np.isfinite(float(delta_line.split("=")[1]))
        for name in ("manifest.cfg", "device_energy.csv", "mec_energy.csv",
                     "association.csv", "metrics.csv", "run.png"):
            assert (out_a / name).exists(), name
        assert (out_a / "device_energy.csv").read_bytes() == (out_b / "device_energy.csv").read_bytes()
        assert (out_a / "mec_energy.csv").read_bytes() == (out_b / "mec_energy.csv").read_bytes()

    def test_manifest_reproduces_the_run(self, tmp_path, capsys):
        first = tmp_path / "first"
        code, _, _ = run_cli(
            ["run", "--seed", "9", "--out", str(first), "--scheduling", "heuristic", *TINY], capsys
        )
        assert code == 0
        second = tmp_path / "second"
        code, _, _ = run_cli(
            ["run", "--config", str(first / "manifest.cfg"), "--out", str(second)], capsys
        )
        assert code == 0
        assert (first / "device_energy.csv").read_bytes() == (second / "device_energy.csv").read_bytes()
        assert (first / "association.csv").read_bytes() == (second / "association.csv").read_bytes()

    def test_mobility_writes_the_trace(self, tmp_path, capsys):
        out = tmp_path / "mob"
        code, _, _ = run_cli(
            ["run", "--seed", "4", "--out", str(out), "--mobility", "hmm",
             "--fl_enabled", "false", *TINY], capsys
        )
        assert code == 0
        assert (out / "mobility.csv").exists()
        assert not (out / "metrics.csv").exists()

    def test_unknown_key_is_a_config_error(self, tmp_path, capsys):
        code, _, err = run_cli(["run", "--out", str(tmp_path / "x"), "--warp", "9"], capsys)
        assert code == 1
        assert err.startswith("ERROR:1:")

    def test_overloaded_server_is_infeasible(self, tmp_path, capsys):
        # twenty devices forced onto one sixteen-antenna server cannot be
        # zero-forced
        with pytest.warns(UserWarning):
            code, _, err = run_cli(
                ["run", "--out", str(tmp_path / "x"), "--K", "20", "--M", "1",
                 "--L", "1", "--fl_enabled", "false"], capsys
            )
        assert code == 2
        assert err.startswith("ERROR:2:")


class TestSeedPriority:
    def test_flag_beats_file_and_env(self, tmp_path, capsys, monkeypatch):
        cfg = tmp_path / "seed.cfg"
        cfg.write_text("seed = 100\n")
        monkeypatch.setenv("HETFL_SEED", "200")
        out = tmp_path / "o"
        run_cli(["run", "--seed", "3", "--config", str(cfg), "--out", str(out), *TINY], capsys)
        assert "seed = 3" in (out / "manifest.cfg").read_text()

    def test_file_beats_env(self, tmp_path, capsys, monkeypatch):
        cfg = tmp_path / "seed.cfg"
        cfg.write_text("seed = 100\n")
        monkeypatch.setenv("HETFL_SEED", "200")
        out = tmp_path / "o"
        run_cli(["run", "--config", str(cfg), "--out", str(out), *TINY], capsys)
        assert "seed = 100" in (out / "manifest.cfg").read_text()

    def test_env_is_the_last_resort(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("HETFL_SEED", "200")
        out = tmp_path / "o"
        run_cli(["run", "--out", str(out), *TINY], capsys)
        assert "seed = 200" in (out / "manifest.cfg").read_text()

    def test_bad_env_seed(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("HETFL_SEED", "soon")
        code, _, err = run_cli(["run", "--out", str(tmp_path / "o"), *TINY], capsys)
        assert code == 1 and err.startswith("ERROR:1:")


class TestCompare:
    def test_default_policies_and_outputs(self, tmp_path, capsys):
        out = tmp_path / "cmp"
        code, text, _ = run_cli(
            ["compare", "--seed", "5", "--seeds", "2", "--out", str(out), *TINY], capsys
        )
        assert code == 0
        assert "h2rma: mean_delta = " in text and "random: mean_delta = " in text
        summary = (out / "summary.csv").read_text().splitlines()
        assert len(summary) == 3  # header + one row per default policy
        runs = (out / "runs.csv").read_text().splitlines()
        assert len(runs) == 1 + 2 * 2
        assert (out / "accuracy.png").exists()
        assert (out / "manifest.cfg").exists()


class TestSweep:
    def test_four_point_two_policy_sweep(self, tmp_path, capsys):
        out = tmp_path / "swp"
        code, text, _ = run_cli(
            ["sweep", "--param", "K", "--values", "5,6,7,8",
             "--policies", "h2rma,random", "--seeds", "1",
             "--seed", "7", "--out", str(out),
             "--K", "5", "--M", "2", "--L", "2", "--C", "3",
             "--N_cu", "16", "--N_mec", "8",
             "--fl_enabled", "false"], capsys
        )
        assert code == 0
        assert "8 aggregate rows" in text
        summary = (out / "summary.csv").read_text().splitlines()
        assert len(summary) == 9
        assert (out / "sweep.png").exists()

    def test_unsweepable_parameter(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["sweep", "--param", "nu", "--values", "3.0", "--out", str(tmp_path / "x")], capsys
        )
        assert code == 1 and err.startswith("ERROR:1:")

    def test_missing_required_flags(self, capsys):
        with pytest.raises(SystemExit):
            entry(["sweep"])


class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            entry(["--version"])
        assert exc.value.code == 0
        assert capsys.readouterr().out.startswith("hetfl ")

    def test_key_equals_value_form(self, tmp_path, capsys):
        out = tmp_path / "o"
        code, _, _ = run_cli(["run", "--seed", "3", "--out", str(out), "--K=6",
                              "--M", "2", "--L", "2", "--C", "3", "--N_cu", "16",
                              "--N_mec", "8", "--fl_enabled=false"], capsys)
        assert code == 0
        text = (out / "manifest.cfg").read_text()
        assert "K = 6" in text and "fl_enabled = false" in text

    def test_missing_value_after_flag(self, tmp_path, capsys):
        code, _, err = run_cli(["run", "--out", str(tmp_path / "o"), "--K"], capsys)
        assert code == 1 and err.startswith("ERROR:1:")
