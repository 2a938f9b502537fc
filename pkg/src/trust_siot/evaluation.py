"""Metrics, data splits and the hidden-size grid search."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingest import TrustLabel
from .mlp import MlpModel, predict_labels, train_mlp
from .rng import substream

log = logging.getLogger(__name__)

LABEL_SCORES = np.array([lbl.score for lbl in TrustLabel])


@dataclass(frozen=True, eq=False)
class EvalReport:
    f1_micro: float
    mae: float
    mse: float
    confusion: np.ndarray
    n_test: int

    def row(self, dataset: str, train_frac: float) -> list[str]:
        return [dataset, f"{train_frac:g}", f"{self.f1_micro:.6f}", f"{self.mae:.6f}", f"{self.mse:.6f}"]


METRIC_HEADER = ["dataset", "train_frac", "f1", "mae", "mse"]


def report_from_labels(y_true, y_pred) -> EvalReport:
    """Micro-F1 from the pooled confusion matrix; MAE/MSE on the {0, 0.5, 1} label encoding."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    n = len(y_true)
    if n == 0:
        raise ValueError("empty test set")
    confusion = np.zeros((3, 3), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    tp = np.trace(confusion)
    fp = confusion.sum(axis=0).sum() - tp
    fn = confusion.sum(axis=1).sum() - tp
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    err = LABEL_SCORES[y_true] - LABEL_SCORES[y_pred]
    return EvalReport(float(f1), float(np.mean(np.abs(err))), float(np.mean(err ** 2)), confusion, n)


def evaluate(model: MlpModel, X_test, y_test) -> EvalReport:
    return report_from_labels(y_test, predict_labels(model, X_test))


def kfold_split(samples: int | Sequence, k: int = 5, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled k-fold partition as ``(train_idx, validation_idx)`` pairs; fold sizes differ by at most one."""
    n = samples if isinstance(samples, (int, np.integer)) else len(samples)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    perm = substream(seed, "kfold").permutation(n)
    folds = np.array_split(perm, k)
    return [(np.sort(np.concatenate(folds[:i] + folds[i + 1:])), np.sort(f)) for i, f in enumerate(folds)]


def train_test_split(n: int, train_fraction: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Random split; every fraction shares one permutation so smaller training sets nest in larger ones."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    perm = substream(seed, "split").permutation(n)
    cut = int(round(train_fraction * n))
    cut = min(max(cut, 1), n - 1)
    return np.sort(perm[:cut]), np.sort(perm[cut:])


def grid_search_hidden(X, y, grid: Sequence[int] = (8, 16, 32), k: int = 5, seed: int = 0,
                       **train_kw) -> tuple[int, dict[int, float]]:
    """Pick the hidden size with the best mean validation micro-F1 (ties to the smaller size)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    folds = kfold_split(len(X), k, seed)
    scores = {}
    for h in grid:
        f1s = []
        for tr, va in folds:
            if len(np.unique(y[tr])) < 2:
                continue
            model = train_mlp(X[tr], y[tr], hidden_size=h, seed=seed, **train_kw)
            f1s.append(evaluate(model, X[va], y[va]).f1_micro)
        scores[h] = float(np.mean(f1s)) if f1s else float("nan")
        log.info("hidden=%d cv micro-F1 %.4f", h, scores[h])
    valid = [h for h in grid if np.isfinite(scores[h])]
    if not valid:
        raise ValueError("degenerate labels: no fold had two classes")
    best = max(valid, key=lambda h: (scores[h], -h))
    return best, scores
