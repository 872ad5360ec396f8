import json

import pytest

from app.surrogate.cli import run


class TestPipeline:
    """End-to-end runs of the command line on a simulated trial."""

    @pytest.fixture
    def trial(self, tmp_path_factory):
        """Directory holding a simulated panel with a known PTE."""
        out = tmp_path_factory.mktemp("trial")
        argv = ["simulate", "--n", "30", "--horizon", "3", "--target-pte", "0.5"]
        assert run([*argv, "--seed", "1", "--out", str(out)]) == 0
        return out

    def read(self, path):
        return json.loads(path.read_text(encoding="utf-8"))

    def test_truth_is_calibrated(self, trial):
        truth = self.read(trial / "truth.json")
        assert truth["pte"] == pytest.approx(0.5)

    def test_bootstrap_is_reproducible(self, trial, tmp_path, capsys):
        argv = ["bootstrap", "--panel", str(trial / "panel.csv"), "--b", "20"]
        assert run([*argv, "--seed", "4", "--out", str(tmp_path / "a")]) == 0
        assert run([*argv, "--seed", "4", "--out", str(tmp_path / "b")]) == 0
        first = (tmp_path / "a" / "bootstrap.json").read_bytes()
        assert first == (tmp_path / "b" / "bootstrap.json").read_bytes()

        report = json.loads(first)
        assert report["replicates"] == 20
        assert report["validity"]["level"] == pytest.approx(0.9)
        assert set(report["per_time"]) == {"delta", "delta_R", "lpte", "cpte"}
        assert "strong_surrogate=" in capsys.readouterr().out

    def test_bootstrap_from_config_file(self, trial, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("b = 10\nmax-lag = 1\nmethod = per_time\n")
        argv = ["bootstrap", "--panel", str(trial / "panel.csv")]
        argv += ["--config", str(config)]
        assert run([*argv, "--out", str(tmp_path)]) == 0
        report = self.read(tmp_path / "bootstrap.json")
        assert report["replicates"] == 10
        assert report["method"] == "per_time"
        manifest = self.read(tmp_path / "manifest.json")
        assert manifest["config"]["max_lag"] == 1
        assert str(config) in manifest["inputs"]

    def test_homogeneity(self, trial, tmp_path, capsys):
        argv = ["test-homogeneity", "--panel", str(trial / "panel.csv"), "--b", "40"]
        argv += ["--null-draws", "300", "--wald", "--out", str(tmp_path)]
        assert run(argv) == 0
        report = self.read(tmp_path / "homogeneity.json")
        assert len(report["delta_diff"]) == 4
        assert report["wald"]["df"] == 3
        out = capsys.readouterr().out
        assert "msd_p_value=" in out
        assert "wald_p_value=" in out

    def test_lag_sweep(self, trial, tmp_path, capsys):
        argv = ["lag-sweep", "--panel", str(trial / "panel.csv")]
        argv += ["--min-per-arm", "10", "--out", str(tmp_path)]
        assert run(argv) == 0
        report = self.read(tmp_path / "lag_sweep.json")
        assert [row["max_lag"] for row in report["rows"]] == [0, 1, 2, 3]
        assert "lags=4 lag_cap=3" in capsys.readouterr().out

    def test_benchmark(self, tmp_path, capsys):
        argv = ["benchmark", "--n", "10", "--horizon", "2", "--replications", "2"]
        argv += ["--b", "5", "--methods", "ssm,diff", "--out", str(tmp_path)]
        assert run(argv) == 0
        assert (tmp_path / "benchmark.csv").is_file()
        rows = self.read(tmp_path / "benchmark.json")["rows"]
        assert [row["method"] for row in rows] == ["ssm", "diff", "gee", "lmm"]
        assert "setting=monotone rows=4" in capsys.readouterr().out
