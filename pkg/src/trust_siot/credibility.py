"""Reliability / benevolence fixed point and credibility scores."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .graph import TrustGraph

log = logging.getLogger(__name__)

INITIAL_SCORE = 0.5


@dataclass(frozen=True, eq=False)
class CredibilityScores:
    """Per-node scores aligned with ``ids`` (the graph's ascending id order)."""

    ids: np.ndarray
    reliability: np.ndarray
    benevolence: np.ndarray
    credibility: np.ndarray
    iterations: int
    converged: bool

    def __post_init__(self):
        object.__setattr__(self, "_index", {int(i): k for k, i in enumerate(self.ids)})

    def of(self, obj: int) -> tuple[float, float, float]:
        k = self._index[int(obj)]
        return float(self.reliability[k]), float(self.benevolence[k]), float(self.credibility[k])

    def cr(self, obj: int) -> float:
        return float(self.credibility[self._index[int(obj)]])

    def as_dict(self) -> dict[int, tuple[float, float, float]]:
        return {int(i): self.of(i) for i in self.ids}


def _mean_by(groups: np.ndarray, values: np.ndarray, n: int):
    counts = np.bincount(groups, minlength=n)
    sums = np.bincount(groups, weights=values, minlength=n)
    has = counts > 0
    return np.divide(sums, counts, out=np.zeros(n), where=has), has


def benevolence_step(g: TrustGraph, r_prev: np.ndarray, b_prev: np.ndarray | None = None) -> np.ndarray:
    """Mean of ``R(rater) * DTM(rater, S)`` over incoming edges; nodes without any keep ``b_prev``."""
    n = g.n_nodes
    b_prev = np.full(n, INITIAL_SCORE) if b_prev is None else b_prev
    mean, has = _mean_by(g.dst, r_prev[g.src] * g.dtm, n)
    return np.where(has, mean, b_prev)


def reliability_step(g: TrustGraph, b_curr: np.ndarray, r_prev: np.ndarray | None = None) -> np.ndarray:
    """``1 - mean |DTM(S, i) - B(i)| / 2`` over outgoing edges; nodes without any keep ``r_prev``."""
    n = g.n_nodes
    r_prev = np.full(n, INITIAL_SCORE) if r_prev is None else r_prev
    mean, has = _mean_by(g.src, np.abs(g.dtm - b_curr[g.dst]), n)
    return np.where(has, 1.0 - 0.5 * mean, r_prev)


def solve_credibility(g: TrustGraph, epsilon: float = 1e-6, max_iter: int = 200) -> CredibilityScores:
    """Alternate benevolence and reliability updates until both move less than ``epsilon``.

    Benevolence is computed from the previous reliability, reliability from the
    fresh benevolence. Hitting ``max_iter`` returns the last iterate with
    ``converged=False``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    n = g.n_nodes
    r = np.full(n, INITIAL_SCORE)
    b = np.full(n, INITIAL_SCORE)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        b_new = benevolence_step(g, r, b)
        r_new = reliability_step(g, b_new, r)
        delta = max(np.max(np.abs(b_new - b), initial=0.0), np.max(np.abs(r_new - r), initial=0.0))
        r, b = r_new, b_new
        assert np.all((r >= 0) & (r <= 1) & (b >= 0) & (b <= 1)), "score left [0, 1]"
        if delta < epsilon:
            converged = True
            break
    if not converged:
        log.warning("credibility did not converge in %d iterations", max_iter)
    return CredibilityScores(g.ids.copy(), r, b, r * b, it, converged)


def write_scores(path, scores: CredibilityScores) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "reliability", "benevolence", "credibility"])
        for i, r, b, c in zip(scores.ids, scores.reliability, scores.benevolence, scores.credibility):
            w.writerow([int(i), repr(float(r)), repr(float(b)), repr(float(c))])


def read_scores(path) -> CredibilityScores:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    col = lambda k: np.array([float(row[k]) for row in rows])  # noqa: E731
    ids = np.array([int(row["id"]) for row in rows], dtype=np.int64)
    return CredibilityScores(ids, col("reliability"), col("benevolence"), col("credibility"), 0, True)
