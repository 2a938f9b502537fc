import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import numeric_grad, relative_error, toy_kg
from trust_siot.graph import RelationKG
from trust_siot.kge import (
    TrainConfig,
    alpha_add,
    cdor,
    corrupt,
    empty_table,
    init_table,
    kge_loss,
    loss_and_grads,
    negative_samples,
    phi,
    read_embeddings,
    rotate,
    rotl_score,
    train_kge,
    write_embeddings,
)


def random_instance(rng, n_ent=6, n_rel=2, d=4, batch=3, k=2):
    params = {
        "entity": rng.uniform(-0.5, 0.5, size=(n_ent, d)),
        "angle": rng.uniform(-math.pi, math.pi, size=(n_rel, d // 2)),
        "bias": rng.normal(0, 0.1, size=n_ent),
        "alpha": rng.uniform(0.5, 1.5, size=n_rel),
    }
    pos = np.stack([rng.integers(n_ent, size=batch), rng.integers(n_rel, size=batch),
                    rng.integers(n_ent, size=batch)], axis=1)
    neg = corrupt(pos, n_ent, k, rng)
    return params, pos, neg


class TestPrimitives:
    def test_zero_vectors_score_bias_only(self):
        assert rotl_score(np.zeros(4), np.zeros(2), np.zeros(4), 1.0) == 0.0
        assert rotl_score(np.zeros(4), np.ones(2), np.zeros(4), 1.0, 0.25, 0.5) == 0.75

    def test_phi(self):
        assert phi(0.0) == 0.0
        assert phi(1.0) == pytest.approx(math.e)

    @given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0.1, 2))
    def test_add_zero_is_scaling(self, x, a):
        x = np.array(x)
        np.testing.assert_allclose(alpha_add(x, np.zeros(4), a), a * x)

    def test_quarter_turn(self):
        np.testing.assert_allclose(rotate(np.array([1.0, 0.0, 0.0, 2.0]), np.array([math.pi / 2, math.pi / 2])),
                                   [0.0, 1.0, -2.0, 0.0], atol=1e-15)

    @given(st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.lists(st.floats(-4, 4), min_size=3, max_size=3))
    def test_rotation_preserves_norm(self, x, ang):
        x = np.array(x)
        assert np.linalg.norm(rotate(x, np.array(ang))) == pytest.approx(np.linalg.norm(x), abs=1e-9)

    def test_denominator_guard(self):
        out = alpha_add(np.array([1.0]), np.array([-1.0]), 1.0)
        assert np.isfinite(out).all()

    def test_loss_at_zero_scores(self):
        assert kge_loss([0.0], [[0.0]]) == pytest.approx(2 * math.log(2))

    def test_loss_clamped(self):
        assert math.isfinite(kge_loss([-1e6], [[1e6]]))


class TestNegativeSampling:
    def test_one_side_changes(self, rng):
        triples = np.array([[0, 1, 2], [3, 0, 4], [5, 2, 1]])
        neg = corrupt(triples, 6, 5, rng)
        assert neg.shape == (3, 5, 3)
        for orig, rows in zip(triples, neg):
            for row in rows:
                assert row[1] == orig[1]
                changed = (row[0] != orig[0]) + (row[2] != orig[2])
                assert changed == 1
                assert 0 <= row[0] < 6 and 0 <= row[2] < 6

    def test_deterministic(self):
        a = negative_samples((0, 0, 1), 10, 4, np.random.default_rng(3))
        b = negative_samples((0, 0, 1), 10, 4, np.random.default_rng(3))
        assert a == b and len(a) == 4

    def test_needs_two_entities(self, rng):
        with pytest.raises(ValueError):
            corrupt(np.array([[0, 0, 0]]), 1, 1, rng)


class TestGradients:
    @pytest.mark.parametrize("seed", range(20))
    def test_finite_difference(self, seed):
        params, pos, neg = random_instance(np.random.default_rng(seed))
        _, grads = loss_and_grads(params, pos, neg)
        numeric = numeric_grad(lambda: loss_and_grads(params, pos, neg)[0], params)
        assert relative_error(grads, numeric) < 1e-4

    def test_clamped_scores_have_zero_gradient(self, rng):
        params, pos, neg = random_instance(rng)
        params["bias"][:] = 100.0
        _, grads = loss_and_grads(params, pos, neg)
        for g in grads.values():
            assert not g.any()


class TestTraining:
    def test_loss_decreases_on_toy_graph(self):
        table = train_kge(toy_kg(), TrainConfig(dim=8, epochs=100, batch_size=16, learning_rate=1e-2))
        trace = table.loss_trace
        assert len(trace) == 100
        assert np.mean(trace[-10:]) < np.mean(trace[:10])

    def test_regression_trace(self):
        trace = train_kge(toy_kg(), TrainConfig(dim=8, epochs=3, batch_size=16, learning_rate=1e-2)).loss_trace
        np.testing.assert_allclose(trace, [1.9385782394001558, 1.859145588510663, 1.8554740481390875], rtol=1e-9)

    def test_zero_epochs_is_init(self):
        kg = toy_kg()
        cfg = TrainConfig(dim=4, epochs=0)
        trained, init = train_kge(kg, cfg), init_table(kg, cfg)
        assert np.array_equal(trained.entity_vecs, init.entity_vecs)
        assert trained.loss_trace == []

    def test_same_seed_identical(self):
        cfg = TrainConfig(dim=4, epochs=5, batch_size=8)
        a, b = train_kge(toy_kg(), cfg), train_kge(toy_kg(), cfg)
        assert np.array_equal(a.entity_vecs, b.entity_vecs)
        assert np.array_equal(a.relation_angles, b.relation_angles)

    def test_init_ranges(self):
        t = init_table(toy_kg(), TrainConfig(dim=16))
        assert np.abs(t.entity_vecs).max() <= 0.5 / 4
        assert np.all(t.relation_alpha == 1.0) and not t.entity_bias.any()

    def test_empty_graph_rejected(self):
        with pytest.raises(ValueError):
            train_kge(RelationKG.from_triples([]))

    @pytest.mark.parametrize("dim", [0, 3, -2])
    def test_bad_dimension(self, dim):
        with pytest.raises(ValueError):
            TrainConfig(dim=dim)


def _table(vectors: dict):
    t = empty_table(2)
    ids = sorted(vectors)
    t.entities = np.array(ids)
    t.entity_vecs = np.array([vectors[i] for i in ids], dtype=float)
    t.entity_bias = np.zeros(len(ids))
    t.__post_init__()
    return t


class TestCdor:
    def test_values(self):
        t = _table({1: [1, 0], 2: [2, 0], 3: [-1, 0], 4: [0, 3], 5: [0, 0]})
        assert cdor(t, 1, 2) == 1.0
        assert cdor(t, 1, 3) == -1.0
        assert cdor(t, 1, 4) == 0.0
        assert cdor(t, 1, 99) == 0.0
        assert cdor(t, 1, 5) == 0.0 and t.zero_norm_hits == 1

    def test_symmetric_and_bounded(self):
        t = train_kge(toy_kg(), TrainConfig(dim=4, epochs=2))
        for i in t.entities:
            for j in t.entities:
                v = cdor(t, i, j)
                assert -1.0 <= v <= 1.0
                assert v == pytest.approx(cdor(t, j, i), abs=1e-15)


class TestEmbeddingFiles:
    def test_round_trip(self, tmp_path):
        t = train_kge(toy_kg(), TrainConfig(dim=4, epochs=1))
        write_embeddings(t, tmp_path / "e.tsv", tmp_path / "r.tsv")
        back = read_embeddings(tmp_path / "e.tsv", tmp_path / "r.tsv")
        assert np.array_equal(back.entity_vecs, t.entity_vecs)
        assert np.array_equal(back.relation_angles, t.relation_angles)
        assert back.relations == t.relations

    @pytest.mark.parametrize("row, match", [
        ("1\t0.1\t0.2\tnan\n", "non-finite"),
        ("1\t0.1\tabc\t0.0\n", "malformed"),
        ("1\t0.1\t0.0\n", "not positive and even"),
    ])
    def test_corrupt_rows(self, tmp_path, row, match):
        (tmp_path / "e.tsv").write_text(row)
        (tmp_path / "r.tsv").write_text("SOR\t0.5\t1.0\n")
        with pytest.raises(ValueError, match=match):
            read_embeddings(tmp_path / "e.tsv", tmp_path / "r.tsv")

    def test_ragged_rows(self, tmp_path):
        (tmp_path / "e.tsv").write_text("1\t0.1\t0.2\t0.0\n2\t0.1\t0.0\n")
        (tmp_path / "r.tsv").write_text("")
        with pytest.raises(ValueError, match="inconsistent"):
            read_embeddings(tmp_path / "e.tsv", tmp_path / "r.tsv")
