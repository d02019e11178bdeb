import json

import numpy as np
import pytest

from dmgsl.cli import main
from dmgsl.evaluate import read_pgm
from dmgsl.graphops import read_adjacency_csv, write_adjacency_csv

TINY_SYNTH = [
    "synth", "--seed", "0", "--nodes", "12", "--classes", "3", "--edge-types", "2",
    "--snapshots", "3", "--dim", "8", "--planted", "8",
]

TINY_CFG = (
    "epochs=4\nlr=0.001\nhat_hidden=8\nhead_dim=4\nn_heads=2\n"
    "encoder_dim=8\nprojector_dim=4\nbootstrap_every=2\nseed=0\n"
)


def _dir_bytes(root):
    return {p.name: p.read_bytes() for p in sorted(root.iterdir())}


class TestTc:
    def test_park_vehicle_value(self, capsys):
        assert main(["tc", "--freq-hz", "3.55e9", "--speed-mps", "2.7778"]) == 0
        out = capsys.readouterr().out
        tc = float(out.strip().splitlines()[-1].split("=")[1])
        assert tc == pytest.approx(5.44e-3, rel=1e-2)

    def test_missing_flag_exits_two(self, capsys):
        assert main(["tc", "--freq-hz", "3.55e9"]) == 2
        assert "--speed-mps" in capsys.readouterr().err

    def test_zero_speed_exits_two(self, capsys):
        assert main(["tc", "--freq-hz", "3.55e9", "--speed-mps", "0"]) == 2
        assert "infinite coherence time" in capsys.readouterr().err


class TestUsage:
    def test_unknown_flag_exits_one(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--bogus"])
        assert exc.value.code == 1

    def test_unknown_command_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    @pytest.mark.parametrize("cmd", ["synth", "ingest", "train", "eval", "ablate", "heatmap", "tc"])
    def test_help_exits_zero(self, cmd, capsys):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
        assert "--" in capsys.readouterr().out


class TestSynth:
    def test_byte_identical_repeats(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(TINY_SYNTH + ["--out", str(a)]) == 0
        assert main(TINY_SYNTH + ["--out", str(b)]) == 0
        assert _dir_bytes(a) == _dir_bytes(b)

    def test_writes_expected_files(self, tmp_path):
        out = tmp_path / "ds"
        assert main(TINY_SYNTH + ["--out", str(out)]) == 0
        names = {p.name for p in out.iterdir()}
        assert names == {"telemetry.csv", "edges.csv", "labels.csv", "truth_edges.csv", "dataset.json", "manifest.json"}

    def test_missing_out_exits_two(self, capsys):
        assert main(["synth"]) == 2
        assert "--out" in capsys.readouterr().err


class TestTrainEvalPipeline:
    @pytest.fixture
    def dataset_dir(self, tmp_path):
        out = tmp_path / "ds"
        assert main(TINY_SYNTH + ["--out", str(out)]) == 0
        return out

    @pytest.fixture
    def run_dir(self, tmp_path, dataset_dir):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CFG)
        run = tmp_path / "run"
        assert main(["train", "--data", str(dataset_dir), "--config", str(cfg), "--out", str(run)]) == 0
        return run

    def test_train_missing_data_exits_two(self, capsys):
        assert main(["train", "--out", "/tmp/x"]) == 2
        assert "--data" in capsys.readouterr().err

    def test_train_artifacts(self, run_dir):
        names = {p.name for p in run_dir.iterdir()}
        assert {
            "checkpoint.dmgsl", "learned_adjacency.csv", "learned_adjacency_raw.csv",
            "embeddings.csv", "loss.csv", "loss.png", "config.txt", "manifest.json",
        } <= names
        loss_lines = (run_dir / "loss.csv").read_text().splitlines()
        assert loss_lines[0] == "epoch,loss"
        assert len(loss_lines) == 5  # header + 4 epochs
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["command"] == "train"
        assert "config_hash" in manifest

    def test_train_reproducible(self, tmp_path, dataset_dir):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CFG)
        r1, r2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["train", "--data", str(dataset_dir), "--config", str(cfg), "--out", str(r1)]) == 0
        assert main(["train", "--data", str(dataset_dir), "--config", str(cfg), "--out", str(r2)]) == 0
        assert (r1 / "loss.csv").read_bytes() == (r2 / "loss.csv").read_bytes()
        assert (r1 / "checkpoint.dmgsl").read_bytes() == (r2 / "checkpoint.dmgsl").read_bytes()

    def test_eval_writes_metrics(self, run_dir, capsys):
        assert main(["eval", "--run", str(run_dir), "--seeds", "2"]) == 0
        metrics = json.loads((run_dir / "metrics.json").read_text())
        assert set(metrics) >= {"accuracy", "precision", "recall", "f1", "stddevs", "seeds"}
        assert metrics["seeds"] == [0, 1]
        assert (run_dir / "metrics.txt").exists()

    def test_eval_gcn_probe(self, run_dir):
        assert main(["eval", "--run", str(run_dir), "--seeds", "1", "--probe", "gcn"]) == 0
        metrics = json.loads((run_dir / "metrics.json").read_text())
        assert 0.0 <= metrics["accuracy"] <= 1.0

    def test_eval_missing_run_exits_two(self, tmp_path):
        assert main(["eval", "--run", str(tmp_path / "nope")]) == 2


class TestNumericFailureExit:
    def test_diverged_training_exits_three(self, tmp_path, monkeypatch):
        import dmgsl.cli as cli_mod
        from dmgsl.errors import NumericError

        ds = tmp_path / "ds"
        assert main(TINY_SYNTH + ["--out", str(ds)]) == 0

        def diverge(dataset, cfg):
            raise NumericError("loss diverged (non-finite) at epoch 3")

        monkeypatch.setattr(cli_mod, "train", diverge)
        assert main(["train", "--data", str(ds), "--out", str(tmp_path / "run")]) == 3


class TestIngest:
    def test_roundtrip_from_synth_files(self, tmp_path):
        src = tmp_path / "src"
        assert main(TINY_SYNTH + ["--out", str(src)]) == 0
        out = tmp_path / "ingested"
        assert (
            main(
                [
                    "ingest",
                    "--telemetry", str(src / "telemetry.csv"),
                    "--edges", str(src / "edges.csv"),
                    "--labels", str(src / "labels.csv"),
                    "--window", "8",
                    "--out", str(out),
                ]
            )
            == 0
        )
        assert (out / "dataset.json").exists()
        assert (out / "telemetry.csv").read_bytes() == (src / "telemetry.csv").read_bytes()

    def test_bad_window_exits_two(self, tmp_path, capsys):
        src = tmp_path / "src"
        assert main(TINY_SYNTH + ["--out", str(src)]) == 0
        code = main(
            [
                "ingest",
                "--telemetry", str(src / "telemetry.csv"),
                "--edges", str(src / "edges.csv"),
                "--labels", str(src / "labels.csv"),
                "--window", "2",
                "--out", str(tmp_path / "x"),
            ]
        )
        assert code == 2


class TestHeatmap:
    def test_writes_three_formats(self, tmp_path):
        a = np.random.default_rng(0).random((5, 5))
        src = tmp_path / "adj.csv"
        write_adjacency_csv(a, src)
        out = tmp_path / "hm.pgm"
        assert main(["heatmap", "--adjacency", str(src), "--out", str(out)]) == 0
        base = tmp_path / "hm"
        pixels = read_pgm(base.with_suffix(".pgm"))
        assert pixels.shape == (5, 5)
        assert base.with_suffix(".csv").exists()
        assert base.with_suffix(".png").exists()

    def test_out_of_range_exits_two(self, tmp_path):
        src = tmp_path / "adj.csv"
        src.write_text("1.5,0\n0,1\n")
        assert main(["heatmap", "--adjacency", str(src), "--out", str(tmp_path / "x")]) == 2


class TestAblateCommand:
    def test_table_files(self, tmp_path):
        ds = tmp_path / "ds"
        assert main(TINY_SYNTH + ["--out", str(ds)]) == 0
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_CFG.replace("epochs=4", "epochs=2"))
        out = tmp_path / "abl"
        assert main(["ablate", "--data", str(ds), "--config", str(cfg), "--out", str(out), "--seeds", "1"]) == 0
        lines = (out / "ablation.csv").read_text().splitlines()
        assert lines[0] == "name,accuracy,precision,recall,f1"
        assert len(lines) == 5
        rows = json.loads((out / "ablation.json").read_text())
        assert len(rows) == 4
        assert (out / "ablation.png").exists()
