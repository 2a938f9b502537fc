import itertools

import numpy as np
import pytest

from conftest import brute_force_metrics, separable_blobs
from trust_siot.evaluation import (
    METRIC_HEADER,
    evaluate,
    grid_search_hidden,
    kfold_split,
    report_from_labels,
    train_test_split,
)
from trust_siot.mlp import train_mlp

T, N, U = 2, 1, 0


class TestMetrics:
    def test_perfect(self):
        r = report_from_labels([T, N, U], [T, N, U])
        assert (r.f1_micro, r.mae, r.mse) == (1.0, 0.0, 0.0)

    def test_one_full_miss(self):
        r = report_from_labels([T, T, T], [T, U, T])
        assert r.mae == pytest.approx(1 / 3)
        assert r.mse == pytest.approx(1 / 3)
        assert r.f1_micro == pytest.approx(2 / 3)

    def test_half_miss(self):
        r = report_from_labels([N], [T])
        assert (r.mae, r.mse) == (0.5, 0.25)

    @pytest.mark.parametrize("truth", list(itertools.product(range(3), repeat=3)))
    def test_micro_f1_is_accuracy(self, truth):
        for pred in itertools.product(range(3), repeat=3):
            acc = np.mean(np.array(truth) == np.array(pred))
            assert report_from_labels(truth, pred).f1_micro == pytest.approx(acc, abs=1e-15)

    def test_against_brute_force(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 40))
            t, p = rng.integers(3, size=n), rng.integers(3, size=n)
            r = report_from_labels(t, p)
            assert (r.f1_micro, r.mae, r.mse) == brute_force_metrics(t.tolist(), p.tolist())

    def test_confusion_counts(self):
        r = report_from_labels([0, 0, 1, 2], [0, 2, 1, 1])
        assert r.confusion.tolist() == [[1, 0, 1], [0, 1, 0], [0, 1, 0]]
        assert r.n_test == 4

    def test_empty(self):
        with pytest.raises(ValueError):
            report_from_labels([], [])

    def test_row_format(self):
        r = report_from_labels([T, U], [T, T])
        assert r.row("toy", 0.8) == ["toy", "0.8", "0.500000", "0.500000", "0.500000"]
        assert len(METRIC_HEADER) == 5


class TestSplits:
    def test_kfold_sizes(self):
        folds = kfold_split(10, 3)
        assert sorted(len(v) for _, v in folds) == [3, 3, 4]
        assert sorted(np.concatenate([v for _, v in folds]).tolist()) == list(range(10))
        for tr, va in folds:
            assert not set(tr) & set(va)
            assert len(tr) + len(va) == 10

    def test_kfold_accepts_sequence(self):
        assert len(kfold_split(list("abcde"), 5)) == 5

    def test_kfold_too_many_folds(self):
        with pytest.raises(ValueError):
            kfold_split(3, 4)

    def test_kfold_deterministic(self):
        a, b = kfold_split(20, 5, seed=7), kfold_split(20, 5, seed=7)
        assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))

    def test_split_nests(self):
        big, _ = train_test_split(100, 0.8, seed=3)
        small, _ = train_test_split(100, 0.4, seed=3)
        assert set(small) <= set(big)
        assert len(big) == 80 and len(small) == 40

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.5])
    def test_split_bad_fraction(self, frac):
        with pytest.raises(ValueError):
            train_test_split(10, frac)


class TestGridSearch:
    def test_picks_from_grid(self):
        X, y = separable_blobs(0, n=60)
        best, scores = grid_search_hidden(X, y, grid=(4, 8), k=3, max_epochs=50)
        assert best in (4, 8) and set(scores) == {4, 8}
        assert all(0.0 <= s <= 1.0 for s in scores.values())

    def test_tie_prefers_smaller(self, monkeypatch):
        import trust_siot.evaluation as ev

        monkeypatch.setattr(ev, "evaluate", lambda *a: report_from_labels([0, 1], [0, 0]))
        X, y = separable_blobs(1, n=30)
        best, scores = grid_search_hidden(X, y, grid=(16, 8, 32), k=3, max_epochs=2)
        assert set(scores.values()) == {0.5}
        assert best == 8


def test_evaluate_uses_model():
    X, y = separable_blobs(5)
    model = train_mlp(X, y)
    assert evaluate(model, X, y).f1_micro == 1.0
