"""Rating-dataset loaders, SIoT relation merge and ground-truth labelling."""

from __future__ import annotations

import enum
import heapq
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .graph import InteractionRecord, RelationKG, RelationTriple, read_triples
from .rng import substream

log = logging.getLogger(__name__)

ADVOGATO_LEVELS = {
    "observer": 0.1,
    "apprentice": 0.5,
    "apprentices": 0.5,
    "journeyer": 0.7,
    "master": 1.0,
}

_DOT_EDGE = re.compile(r'^\s*"?([^"\s]+)"?\s*->\s*"?([^"\s]+)"?\s*\[\s*level\s*=\s*"?(\w+)"?\s*\]\s*;?\s*$')


class TrustLabel(enum.IntEnum):
    UNTRUSTWORTHY = 0
    NEUTRAL = 1
    TRUSTWORTHY = 2

    @property
    def score(self) -> float:
        """Numeric encoding used by the regression-style metrics."""
        return self.value / 2.0

    @property
    def title(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> "TrustLabel":
        return cls[text.strip().upper()]


@dataclass(frozen=True)
class RawRating:
    rater: int
    rated: int
    value: float
    time: int | None = None


@dataclass
class IngestDiagnostics:
    bad_lines: int = 0
    unknown_levels: int = 0
    duplicates: int = 0
    self_loops: int = 0
    names: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "bad_lines": self.bad_lines,
            "unknown_levels": self.unknown_levels,
            "duplicates": self.duplicates,
            "self_loops": self.self_loops,
            "named_objects": len(self.names),
        }


def _split(line: str) -> list[str]:
    return line.split("\t") if "\t" in line else line.split(",")


def _finish(rows, diagnostics: IngestDiagnostics) -> list[RawRating]:
    """Intern ids, drop self-loops and keep the last rating per ordered pair."""
    tokens = [(a, b) for a, b, _, _ in rows]
    numeric = all(a.isdigit() and b.isdigit() for a, b in tokens)
    names = diagnostics.names

    def oid(tok: str) -> int:
        if numeric:
            return int(tok)
        if tok not in names:
            names[tok] = len(names)
        return names[tok]

    latest: dict[tuple[int, int], RawRating] = {}
    for a, b, value, time in rows:
        r = RawRating(oid(a), oid(b), value, time)
        if r.rater == r.rated:
            diagnostics.self_loops += 1
            continue
        key = (r.rater, r.rated)
        if key in latest:
            diagnostics.duplicates += 1
            del latest[key]
        latest[key] = r
    if diagnostics.duplicates:
        log.info("duplicate ratings resolved last-write-wins: %d", diagnostics.duplicates)
    return list(latest.values())


def _parse_time(parts: list[str]) -> int | None:
    if len(parts) < 4 or not parts[3].strip():
        return None
    return int(float(parts[3]))


def load_advogato(path, diagnostics: IngestDiagnostics | None = None) -> list[RawRating]:
    """Advogato certifications as ratings in {0.1, 0.5, 0.7, 1.0}.

    Accepts tab-separated ``rater rated level [time]`` lines as well as the
    Graphviz edge lines of the trustlet dump (``"a" -> "b" [level="Master"];``).
    """
    diagnostics = diagnostics if diagnostics is not None else IngestDiagnostics()
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("digraph") or line in ("{", "}"):
                continue
            m = _DOT_EDGE.match(line)
            if m:
                a, b, level, time = m.group(1), m.group(2), m.group(3), None
            else:
                parts = line.split("\t")
                if len(parts) not in (3, 4):
                    diagnostics.bad_lines += 1
                    continue
                a, b, level = (p.strip() for p in parts[:3])
                try:
                    time = _parse_time(parts)
                except ValueError:
                    diagnostics.bad_lines += 1
                    continue
            value = ADVOGATO_LEVELS.get(level.lower())
            if value is None:
                diagnostics.unknown_levels += 1
                continue
            rows.append((a, b, value, time))
    return _finish(rows, diagnostics)


def minmax_normalize(values, lo: float, hi: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if hi == lo:
        return np.full_like(values, 0.5)
    return (values - lo) / (hi - lo)


def load_btc_alpha(path, diagnostics: IngestDiagnostics | None = None) -> list[RawRating]:
    """Bitcoin-Alpha style ``src,dst,rating,time`` rows, min-max normalized to [0, 1]."""
    diagnostics = diagnostics if diagnostics is not None else IngestDiagnostics()
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in _split(line)]
            try:
                if len(parts) not in (3, 4):
                    raise ValueError
                rows.append((parts[0], parts[1], float(parts[2]), _parse_time(parts)))
            except ValueError:
                diagnostics.bad_lines += 1
    ratings = _finish(rows, diagnostics)
    if not ratings:
        raise ValueError("no ratings")
    raw = np.array([r.value for r in ratings])
    norm = minmax_normalize(raw, raw.min(), raw.max())
    return [RawRating(r.rater, r.rated, float(v), r.time) for r, v in zip(ratings, norm)]


def load_ratings_tsv(path, diagnostics: IngestDiagnostics | None = None) -> list[RawRating]:
    """Generic ``rater<TAB>rated<TAB>rating[<TAB>time]`` with ratings already in [0, 1]."""
    diagnostics = diagnostics if diagnostics is not None else IngestDiagnostics()
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            try:
                if len(parts) not in (3, 4):
                    raise ValueError
                value = float(parts[2])
                if not 0.0 <= value <= 1.0:
                    raise ValueError
                rows.append((parts[0].strip(), parts[1].strip(), value, _parse_time(parts)))
            except ValueError:
                diagnostics.bad_lines += 1
    return _finish(rows, diagnostics)


LOADERS = {"advogato": load_advogato, "btc": load_btc_alpha, "tsv": load_ratings_tsv}


def ratings_to_interactions(ratings: Iterable[RawRating], positive_threshold: float = 0.5) -> list[InteractionRecord]:
    return [
        InteractionRecord(r.rater, r.rated, r.time or 0, r.value >= positive_threshold)
        for r in ratings
    ]


def label_of(value: float, low: float = 1 / 3, high: float = 2 / 3) -> TrustLabel:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"rating {value} outside [0, 1]")
    if value < low:
        return TrustLabel.UNTRUSTWORTHY
    if value < high:
        return TrustLabel.NEUTRAL
    return TrustLabel.TRUSTWORTHY


def label_pairs(ratings: Iterable[RawRating], low: float = 1 / 3, high: float = 2 / 3) -> dict[tuple[int, int], TrustLabel]:
    return {(r.rater, r.rated): label_of(r.value, low, high) for r in ratings}


# -- SIoT merge ---------------------------------------------------------------

def _undirected_adjacency(pairs: Iterable[tuple[int, int]]) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = defaultdict(set)
    for a, b in pairs:
        if a == b:
            continue
        adj[a].add(b)
        adj[b].add(a)
    return adj


def sample_subnetwork(adj: dict[int, set[int]], size: int, rng: np.random.Generator) -> list[int]:
    """Degree-biased breadth-first sample of ``size`` nodes.

    The start node is drawn from the top decile by degree; the frontier is
    expanded highest-degree first. An exhausted component is continued from
    the highest-degree unvisited node.
    """
    if size > len(adj):
        raise ValueError(f"insufficient relation coverage: need {size} objects, relation graph has {len(adj)}")
    by_degree = sorted(adj, key=lambda v: (-len(adj[v]), v))
    top = by_degree[: max(1, len(by_degree) // 10)]
    start = top[int(rng.integers(len(top)))]
    seen = {start}
    order = []
    heap = [(-len(adj[start]), start)]
    restart = iter(by_degree)
    while len(order) < size:
        if not heap:
            nxt = next(v for v in restart if v not in seen)
            seen.add(nxt)
            heap.append((-len(adj[nxt]), nxt))
        _, v = heapq.heappop(heap)
        order.append(v)
        for w in sorted(adj[v]):
            if w not in seen:
                seen.add(w)
                heapq.heappush(heap, (-len(adj[w]), w))
    return order


def merge_siot_relations(
    ratings: Sequence[RawRating],
    siot_triples: Sequence[RelationTriple],
    seed: int,
    positive_threshold: float = 0.5,
) -> tuple[list[InteractionRecord], RelationKG]:
    """Graft a sampled SIoT relation sub-network onto the rating dataset's objects.

    Sampled relation-graph objects are paired with rating objects by descending
    degree (ties by ascending id) and the triples among them are relabelled.
    """
    if not ratings or not siot_triples:
        raise ValueError("merge needs non-empty ratings and relation triples")
    interactions = ratings_to_interactions(ratings, positive_threshold)

    rating_adj = _undirected_adjacency((r.rater, r.rated) for r in ratings)
    rating_nodes = sorted(rating_adj, key=lambda v: (-len(rating_adj[v]), v))

    siot_adj = _undirected_adjacency((t.head, t.tail) for t in siot_triples)
    sample = sample_subnetwork(siot_adj, len(rating_nodes), substream(seed, "sampling"))
    chosen = set(sample)
    induced = {v: len(siot_adj[v] & chosen) for v in sample}
    siot_order = sorted(sample, key=lambda v: (-induced[v], v))
    mapping = dict(zip(siot_order, rating_nodes))

    relabelled = [
        RelationTriple(mapping[t.head], t.relation, mapping[t.tail])
        for t in siot_triples
        if t.head in mapping and t.tail in mapping and t.head != t.tail
    ]
    kg = RelationKG.from_triples(relabelled)
    log.info("merged %d relation triples onto %d objects", kg.n_T, len(rating_nodes))
    return interactions, kg


# -- manifests ----------------------------------------------------------------

def read_keyvalue(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


@dataclass
class Dataset:
    name: str
    ratings: list[RawRating]
    triples: list[RelationTriple]
    merge: bool
    diagnostics: IngestDiagnostics
    inputs: list[Path]


def load_manifest(path) -> Dataset:
    """Load the dataset described by a ``ratings=/triples=/format=`` manifest."""
    path = Path(path)
    spec = read_keyvalue(path)
    fmt = spec.get("format", "tsv")
    if fmt not in LOADERS:
        raise ValueError(f"unknown dataset format {fmt!r}; expected advogato|btc|tsv")
    if "ratings" not in spec:
        raise ValueError(f"{path}: manifest lacks ratings=")
    base = path.parent
    ratings_path = base / spec["ratings"]
    diagnostics = IngestDiagnostics()
    ratings = LOADERS[fmt](ratings_path, diagnostics)
    inputs = [ratings_path]
    triples: list[RelationTriple] = []
    if spec.get("triples"):
        triples_path = base / spec["triples"]
        triples = read_triples(triples_path)
        inputs.append(triples_path)
    merge = spec.get("merge", "true").lower() in ("1", "true", "yes")
    return Dataset(spec.get("name", path.stem), ratings, triples, merge, diagnostics, inputs)


def dataset_statistics(ratings: Sequence[RawRating]) -> dict[str, float]:
    objects = {r.rater for r in ratings} | {r.rated for r in ratings}
    n, e = len(objects), len(ratings)
    return {"objects": n, "edges": e, "avg_degree": 2 * e / n if n else 0.0}
