import pytest

from trust_siot.config import ExperimentConfig


def test_defaults():
    cfg = ExperimentConfig()
    assert (cfg.lam, cfg.epsilon, cfg.max_iter, cfg.th) == (1.0, 1e-6, 200, 0.5)
    assert cfg.mlp_grid == (8, 16, 32) and cfg.k_folds == 5


def test_file_env_and_override_precedence(tmp_path):
    (tmp_path / "c.txt").write_text("kge.dim = 8\nth = 0.4\nmanifest = data/m.txt\n# comment\n")
    cfg = ExperimentConfig.load(tmp_path / "c.txt", {"th": "0.7"}, environ={"TRUSTSIOT_KGE_DIM": "16"})
    assert cfg.kge_dim == 16
    assert cfg.th == 0.7
    assert cfg.manifest == str(tmp_path / "data" / "m.txt")


def test_env_ignored_when_absent():
    assert ExperimentConfig.load(environ={}).kge_dim == 32


@pytest.mark.parametrize("values", [{"nope": "1"}, {"kge.dim": "x"}, {"mode": "svm"},
                                    {"train_fraction": "1.5"}, {"dtm.smoothed": "maybe"}])
def test_invalid(values):
    with pytest.raises((KeyError, ValueError)):
        ExperimentConfig().with_values(values)


def test_optional_values():
    cfg = ExperimentConfig().with_values({"max_k": "3", "t0": "auto", "mlp.grid": "4, 8"})
    assert cfg.max_k == 3 and cfg.t0 is None and cfg.mlp_grid == (4, 8)


def test_text_round_trip(tmp_path):
    cfg = ExperimentConfig().with_values({"baseline.weights": "0.1,0.2,0.3,0.2,0.2", "now": "12.5"})
    (tmp_path / "c.txt").write_text(cfg.as_text())
    assert ExperimentConfig.load(tmp_path / "c.txt", environ={}) == cfg
