import numpy as np
import pytest

from ocfsim.cli import _coerce, build_exp_config, main, parse_config_file
from ocfsim.experiments import read_csv
from ocfsim.ingest import import_matrix_grid

SYNTH_ARGS = [
    "synth", "--n-users", "10", "--n-items", "30", "--n-types", "2",
    "--delta", "0.4", "--nu", "0.5", "--pf", "1.0",
    "--alpha", "0.5", "--eta", "0.7", "--batch-size", "3",
    "--k-neighbors", "3", "--horizon", "8", "--replicates", "2",
    "--seed", "1",
]


def run_cli(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return main(argv)


class TestCoercion:
    def test_scalars(self):
        assert _coerce("true") is True
        assert _coerce("False") is False
        assert _coerce("none") is None
        assert _coerce("3") == 3
        assert _coerce("0.5") == 0.5
        assert _coerce("debiased") == "debiased"

    def test_tuples(self):
        assert _coerce("1,0.5") == (1, 0.5)
        assert _coerce("0, 2, 4") == (0, 2, 4)

    def test_config_file(self, tmp_path):
        p = tmp_path / "cfg"
        p.write_text("# comment\nseed = 9\npf_list = 1.0,0.5  # inline\n\n")
        assert parse_config_file(p) == {"seed": "9", "pf_list": "1.0,0.5"}

    def test_config_file_bad_line(self, tmp_path):
        p = tmp_path / "cfg"
        p.write_text("just words\n")
        with pytest.raises(SystemExit):
            parse_config_file(p)


class TestConfigResolution:
    def test_flag_overrides_file(self, tmp_path):
        cfgfile = tmp_path / "cfg"
        cfgfile.write_text("seed = 3\nreplicates = 7\n")

        class Args:
            config = str(cfgfile)
            seed = 11  # CLI wins
        cfg = build_exp_config(Args())
        assert cfg.seed == 11
        assert cfg.replicates == 7

    def test_model_keys_build_params(self, tmp_path):
        cfgfile = tmp_path / "cfg"
        cfgfile.write_text(
            "n_users = 12\nn_items = 20\nn_types = 2\ndelta = 0.3\n"
            "nu = 0.5\npf = 1.0\n")

        class Args:
            config = str(cfgfile)
        cfg = build_exp_config(Args())
        assert cfg.model is not None
        assert cfg.model.n_users == 12

    def test_unknown_key_rejected(self, tmp_path):
        cfgfile = tmp_path / "cfg"
        cfgfile.write_text("typo_key = 1\n")

        class Args:
            config = str(cfgfile)
        with pytest.raises(SystemExit, match="typo_key"):
            build_exp_config(Args())

    def test_scalar_pf_list_becomes_tuple(self):
        class Args:
            config = None
            pf_list = 0.5
        cfg = build_exp_config(Args())
        assert cfg.pf_list == (0.5,)


class TestSynthCommand:
    def test_end_to_end(self, tmp_path, monkeypatch):
        argv = SYNTH_ARGS + ["--output", "out.csv",
                             "--export-model", "model.txt"]
        assert run_cli(argv, tmp_path, monkeypatch) == 0
        table = read_csv(tmp_path / "out.csv")
        assert "likable_frac" in table.labels()
        meta = (tmp_path / "out.csv.meta").read_text()
        assert "flag.batch_ratio" in meta
        assert (tmp_path / "model.txt").exists()

    def test_byte_identical_rerun(self, tmp_path, monkeypatch):
        argv = SYNTH_ARGS + ["--output", "a.csv"]
        run_cli(argv, tmp_path, monkeypatch)
        first = (tmp_path / "a.csv").read_bytes()
        run_cli(SYNTH_ARGS + ["--output", "b.csv"], tmp_path, monkeypatch)
        assert (tmp_path / "b.csv").read_bytes() == first

    def test_seed_changes_output(self, tmp_path, monkeypatch):
        run_cli(SYNTH_ARGS + ["--output", "a.csv"], tmp_path, monkeypatch)
        argv = [a if a != "1" else "2" for a in SYNTH_ARGS]
        run_cli(argv + ["--output", "b.csv"], tmp_path, monkeypatch)
        assert (tmp_path / "a.csv").read_bytes() != \
            (tmp_path / "b.csv").read_bytes()

    def test_plot_renders_png(self, tmp_path, monkeypatch):
        argv = SYNTH_ARGS + ["--output", "out.csv", "--plot"]
        run_cli(argv, tmp_path, monkeypatch)
        png = tmp_path / "out.png"
        assert png.exists() and png.stat().st_size > 0

    def test_missing_model_params(self, tmp_path, monkeypatch):
        with pytest.raises(SystemExit):
            run_cli(["synth", "--seed", "1"], tmp_path, monkeypatch)


def write_ratings(tmp_path, n_users=12, n_items=10, seed=0):
    rng = np.random.default_rng(seed)
    lines = []
    t = 0
    for u in range(1, n_users + 1):
        for i in range(1, n_items + 1):
            if rng.random() < 0.8:
                t += 1
                lines.append(f"{u}::{i}::{rng.integers(1, 6)}::{t}")
    p = tmp_path / "ratings.dat"
    p.write_text("\n".join(lines) + "\n")
    return p


class TestIngestCommand:
    def test_end_to_end(self, tmp_path, monkeypatch):
        ratings = write_ratings(tmp_path)
        argv = ["ingest", "--ratings", str(ratings), "--out", "corpus.txt",
                "--n-users-out", "6", "--n-items-out", "5",
                "--bias-tolerance", "1.0"]
        assert run_cli(argv, tmp_path, monkeypatch) == 0
        grid = import_matrix_grid(tmp_path / "corpus.txt")
        assert grid.shape == (6, 5)
        assert "filter_order" in (tmp_path / "corpus.txt.meta").read_text()

    def test_export_matrix_defaults_most_rated(self, tmp_path, monkeypatch):
        ratings = write_ratings(tmp_path)
        argv = ["export-matrix", "--ratings", str(ratings),
                "--out", "grid.txt", "--n-users-out", "6",
                "--n-items-out", "5", "--plot"]
        run_cli(argv, tmp_path, monkeypatch)
        assert (tmp_path / "grid.txt").exists()
        assert (tmp_path / "grid.png").exists()


class TestExpCommand:
    def test_one_vs_two_synthetic_fallback(self, tmp_path, monkeypatch):
        argv = ["exp", "one-vs-two", "--n-users", "8", "--n-items", "12",
                "--n-types", "2", "--delta", "0.4", "--nu", "0.5",
                "--pf", "1.0", "--alpha", "0.5", "--eta", "0.7",
                "--batch-size", "3", "--k-neighbors", "3",
                "--replicates", "2", "--seed", "4", "--output", "ovt.csv"]
        assert run_cli(argv, tmp_path, monkeypatch) == 0
        table = read_csv(tmp_path / "ovt.csv")
        assert set(table.labels()) == {"one-class", "two-class"}

    def test_one_vs_two_replay_corpus(self, tmp_path, monkeypatch):
        rng = np.random.default_rng(0)
        grid = rng.choice([-1, 0, 1], size=(8, 10))
        corpus = tmp_path / "grid.txt"
        corpus.write_text(
            "\n".join(" ".join(str(v) for v in row) for row in grid) + "\n")
        argv = ["exp", "one-vs-two", "--corpus-path", str(corpus),
                "--alpha", "0.5", "--eta", "0.7", "--batch-size", "3",
                "--k-neighbors", "3", "--replicates", "2", "--seed", "0",
                "--output", "ovt.csv"]
        run_cli(argv, tmp_path, monkeypatch)
        xs, _ = read_csv(tmp_path / "ovt.csv").curve("one-class")
        assert len(xs) == 10  # horizon = item count

    def test_sim_scaling_with_config_file(self, tmp_path, monkeypatch):
        cfgfile = tmp_path / "cfg"
        cfgfile.write_text(
            "n_users = 10\nn_items = 60\nn_types = 2\ndelta = 0.4\n"
            "nu = 0.5\npf = 1.0\nseed = 2\nreplicates = 2\n"
            "pf_list = 1.0\nts_grid = 0,2\nalpha = 0.5\neta = 0.7\n"
            "batch_size = 3\nk_neighbors = 6\n")
        argv = ["exp", "sim-scaling", "--config", str(cfgfile),
                "--output", "sim.csv", "--plot"]
        assert run_cli(argv, tmp_path, monkeypatch) == 0
        table = read_csv(tmp_path / "sim.csv")
        assert table.labels() == ["pf=1"]
        assert (tmp_path / "sim.png").exists()


class TestBoundsCommand:
    ARGS = ["bounds", "--n-users", "1000", "--n-items", "500",
            "--n-types", "10", "--delta", "0.25", "--nu", "0.3",
            "--pf", "0.5", "--gamma", "0.5", "--alpha", "0.1",
            "--eta", "0.15", "--batch-size", "50", "--k-neighbors", "50",
            "--horizon", "100000"]

    def test_stdout_report(self, tmp_path, monkeypatch, capsys):
        assert run_cli(self.ARGS, tmp_path, monkeypatch) == 0
        out = capsys.readouterr().out
        assert "t_start" in out and "flag" in out

    def test_csv_output(self, tmp_path, monkeypatch):
        run_cli(self.ARGS + ["--csv", "bounds.csv"], tmp_path, monkeypatch)
        lines = (tmp_path / "bounds.csv").read_text().splitlines()
        assert lines[0] == "key,value"
        assert any(line.startswith("t_start,") for line in lines)
