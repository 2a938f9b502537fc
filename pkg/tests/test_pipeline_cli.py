import json

import pytest

from trust_siot.cli import main
from trust_siot.config import ExperimentConfig
from trust_siot.pipeline import StageError, run_pipeline, run_stage, sweep
from trust_siot.synthetic import SyntheticSpec, write_dataset

FAST = {"kge.dim": "8", "kge.epochs": "3", "mlp.grid": "8", "mlp.max_epochs": "60", "mlp.lr": "0.01"}


@pytest.fixture(scope="module")
def manifest(tmp_path_factory):
    return write_dataset(tmp_path_factory.mktemp("data"), SyntheticSpec(n_objects=60), seed=1)


def config(manifest, out, **extra):
    return ExperimentConfig().with_values({**FAST, "manifest": str(manifest), "output": str(out), **extra})


def test_pipeline_artifacts_and_determinism(manifest, tmp_path):
    a = run_pipeline(config(manifest, tmp_path / "a"))
    b = run_pipeline(config(manifest, tmp_path / "b"))
    assert (a.f1_micro, a.mae) == (b.f1_micro, b.mae)
    for name in ("metrics.csv", "features.tsv", "model.tsv", "scores.csv", "entities.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    meta = json.loads((tmp_path / "a" / "run.json").read_text())
    assert "metrics.csv" in meta["artifacts"] and meta["dataset"] == "synthetic"
    assert 0.0 <= a.f1_micro <= 1.0


def test_stages_individually(manifest, tmp_path):
    cfg = config(manifest, tmp_path)
    with pytest.raises(StageError, match="missing artifact"):
        run_stage(cfg, "dtm")
    for stage in ("ingest", "dtm", "credibility", "kge-train", "features", "train"):
        assert run_stage(cfg, stage) is None
    assert run_stage(cfg, "evaluate").n_test > 0


def test_tampered_artifact_rejected(manifest, tmp_path):
    cfg = config(manifest, tmp_path)
    run_pipeline(cfg)
    with open(tmp_path / "entities.tsv", "a") as fh:
        fh.write("\n")
    with pytest.raises(StageError, match="checksum mismatch"):
        run_stage(cfg, "features")


def test_weighted_mode(manifest, tmp_path):
    report = run_pipeline(config(manifest, tmp_path, mode="weighted"))
    assert not (tmp_path / "model.tsv").exists()
    assert report.n_test > 0


class TestSweep:
    def test_rows_follow_input_order(self, manifest, tmp_path):
        rows = sweep(config(manifest, tmp_path), "train_fraction", [0.4, 0.8, 1.5])
        assert [r[1] for r in rows] == ["0.4", "0.8", "1.5"]
        assert rows[2][-1] == "invalid value"

    def test_single_value_matches_pipeline(self, manifest, tmp_path):
        report = run_pipeline(config(manifest, tmp_path / "p"))
        rows = sweep(config(manifest, tmp_path / "s"), "train_fraction", [0.8])
        assert rows[0][4:7] == report.row("synthetic", 0.8)[2:]

    def test_interaction_buckets(self, manifest, tmp_path):
        rows = sweep(config(manifest, tmp_path), "interactions", [0.5, 1.0, 0.7])
        assert rows[2][-1] == "invalid value"
        assert sum(int(r[7]) for r in rows) > 0

    def test_unknown_axis(self, manifest, tmp_path):
        with pytest.raises(StageError):
            sweep(config(manifest, tmp_path), "epochs", [1])


class TestCli:
    def test_synth_and_pipeline(self, tmp_path, capsys):
        assert main(["synth", str(tmp_path / "d"), "--objects", "50"]) == 0
        args = ["pipeline", "-m", str(tmp_path / "d" / "manifest.txt"), "-o", str(tmp_path / "run")]
        for kv in FAST.items():
            args += ["-s", "=".join(kv)]
        assert main(args) == 0
        assert "f1=" in capsys.readouterr().out
        assert (tmp_path / "run" / "metrics.csv").exists()

    def test_config_error_exit_code(self, tmp_path):
        assert main(["ingest", "-s", "bogus=1", "-o", str(tmp_path)]) == 1
        assert main(["ingest", "-s", "novalue", "-o", str(tmp_path)]) == 1

    def test_stage_error_exit_code(self, tmp_path, capsys):
        assert main(["ingest", "-o", str(tmp_path)]) == 2
        assert "no dataset manifest" in capsys.readouterr().err

    def test_sweep_prints_rows(self, manifest, tmp_path, capsys):
        args = ["sweep", "-m", str(manifest), "-o", str(tmp_path), "--values", "0.6"]
        for kv in FAST.items():
            args += ["-s", "=".join(kv)]
        assert main(args) == 0
        assert capsys.readouterr().out.startswith("train_fraction,0.6,synthetic")
