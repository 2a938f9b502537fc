"""Recommendation trust from credible neighbours, with a global-reputation fallback."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .credibility import CredibilityScores
from .graph import TrustGraph, neighbors

UNRATED_PRIOR = 0.5


@dataclass(frozen=True)
class RecommenderSet:
    members: tuple[int, ...]
    threshold: float
    is_global_fallback: bool
    global_raters: int = 0


def select_credible(g: TrustGraph, scores: CredibilityScores, trustor: int, trustee: int,
                    th: float = 0.5, max_k: int | None = None) -> RecommenderSet:
    """Trustor's out-neighbours that rated the trustee and have credibility >= ``th``.

    With ``max_k`` only the most credible ``max_k`` are kept (ties to the lower
    id). Members are returned in ascending id order.
    """
    candidates = [
        k for k in neighbors(g, trustor, "out")
        if k != trustee and g.has_edge(k, trustee) and scores.cr(k) >= th
    ]
    if max_k is not None and len(candidates) > max_k:
        candidates = sorted(sorted(candidates, key=lambda k: (-scores.cr(k), k))[:max_k])
    if candidates:
        return RecommenderSet(tuple(candidates), th, False)
    return RecommenderSet((), th, True, len(neighbors(g, trustee, "in")))


def rtm_local(g: TrustGraph, rset: RecommenderSet, trustor: int, trustee: int) -> float:
    if rset.is_global_fallback or not rset.members:
        raise ValueError("empty recommender set: use global fallback")
    return float(np.mean([g.weight(trustor, k) * g.weight(k, trustee) for k in rset.members]))


def rtm_global(g: TrustGraph, trustee: int) -> float:
    """Mean direct trust the trustee receives; the prior 0.5 if nobody rated it."""
    i = g.idx(trustee)
    incoming = g.in_edges(i)
    if len(incoming) == 0:
        return UNRATED_PRIOR
    return float(np.mean(g.dtm[incoming]))


def rtm(g: TrustGraph, scores: CredibilityScores, trustor: int, trustee: int,
        th: float = 0.5, max_k: int | None = None) -> tuple[float, RecommenderSet]:
    rset = select_credible(g, scores, trustor, trustee, th, max_k)
    if rset.is_global_fallback:
        return rtm_global(g, trustee), rset
    return rtm_local(g, rset, trustor, trustee), rset
