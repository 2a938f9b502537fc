"""Five-feature trust samples ``(DTM, R, B, RTM, C-DoR)`` per ordered pair."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .credibility import CredibilityScores
from .graph import TrustGraph
from .ingest import TrustLabel
from .kge import EmbeddingTable, cdor
from .recommendation import rtm

log = logging.getLogger(__name__)

FEATURE_NAMES = ("dtm", "reliability", "benevolence", "rtm", "cdor")
NO_EDGE_DTM = 0.5


@dataclass(frozen=True, eq=False)
class TrustSample:
    trustor: int
    trustee: int
    features: np.ndarray
    label: TrustLabel | None = None


def pair_features(g: TrustGraph, scores: CredibilityScores, table: EmbeddingTable,
                  trustor: int, trustee: int, th: float = 0.5, max_k: int | None = None) -> np.ndarray:
    if trustee not in g or trustor not in g:
        raise ValueError(f"pair ({trustor}, {trustee}) has no scores; was it in the trust graph?")
    e = g.edge_id(trustor, trustee)
    direct = NO_EDGE_DTM if e is None else float(g.dtm[e])
    r, b, _ = scores.of(trustee)
    rec, _ = rtm(g, scores, trustor, trustee, th, max_k)
    return np.array([direct, r, b, rec, cdor(table, trustor, trustee)])


def build_features(g: TrustGraph, scores: CredibilityScores, table: EmbeddingTable,
                   pairs: Mapping[tuple[int, int], TrustLabel] | Iterable[tuple[int, int]],
                   th: float = 0.5, max_k: int | None = None) -> list[TrustSample]:
    """One sample per pair, in the iteration order of ``pairs``.

    A mapping supplies the ground-truth label of each pair.
    """
    labelled = isinstance(pairs, Mapping)
    out = []
    for pair in pairs:
        i, j = pair
        x = pair_features(g, scores, table, i, j, th, max_k)
        out.append(TrustSample(int(i), int(j), x, pairs[pair] if labelled else None))
    log.info("built %d samples (%d zero-norm embeddings)", len(out), table.zero_norm_hits)
    return out


def to_arrays(samples: list[TrustSample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([s.features for s in samples], dtype=float).reshape(len(samples), len(FEATURE_NAMES))
    y = np.array([-1 if s.label is None else int(s.label) for s in samples], dtype=np.int64)
    return X, y


def write_features(path, samples: list[TrustSample]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(("trustor", "trustee") + FEATURE_NAMES + ("label",)) + "\n")
        for s in samples:
            vals = "\t".join(repr(float(v)) for v in s.features)
            label = "" if s.label is None else s.label.title
            fh.write(f"{s.trustor}\t{s.trustee}\t{vals}\t{label}\n")


def read_features(path) -> list[TrustSample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header != ["trustor", "trustee", *FEATURE_NAMES, "label"]:
            raise ValueError(f"{path}: unexpected feature header {header}")
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 8:
                raise ValueError(f"{path}:{lineno}: expected 8 columns, got {len(parts)}")
            label = TrustLabel.parse(parts[7]) if parts[7] else None
            out.append(TrustSample(int(parts[0]), int(parts[1]),
                                   np.array([float(v) for v in parts[2:7]]), label))
    return out
