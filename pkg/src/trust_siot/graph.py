"""Graph data model shared by every stage of the pipeline.

Objects carry opaque non-negative integer ids. At build time the ids are
remapped onto a dense ``0..n-1`` index (ascending id order), so arrays indexed
by the dense position iterate in ascending-id order everywhere downstream.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)


class Relation(str, enum.Enum):
    CLOR = "CLOR"
    POR = "POR"
    OOR = "OOR"
    SOR = "SOR"
    SOR2 = "SOR2"

    @property
    def code(self) -> int:
        return _RELATION_CODES[self]

    @classmethod
    def parse(cls, text: str) -> "Relation":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown relation {text!r}; expected one of CLOR|POR|OOR|SOR|SOR2") from None


RELATIONS: tuple[Relation, ...] = tuple(Relation)
_RELATION_CODES = {r: i for i, r in enumerate(RELATIONS)}


@dataclass(frozen=True)
class InteractionRecord:
    trustor: int
    trustee: int
    time: int
    positive: bool

    def __post_init__(self):
        if self.time < 0:
            raise ValueError(f"negative timestamp {self.time}")


@dataclass(frozen=True)
class RelationTriple:
    head: int
    relation: Relation
    tail: int


class ObjectNotFound(KeyError):
    def __init__(self, obj):
        super().__init__(f"object not found: {obj}")
        self.obj = obj


@dataclass(frozen=True)
class InteractionLog:
    """Columnar copy of the interaction records, in input order."""

    trustor: np.ndarray
    trustee: np.ndarray
    time: np.ndarray
    positive: np.ndarray

    @classmethod
    def from_records(cls, records: Iterable[InteractionRecord]) -> "InteractionLog":
        records = [r for r in records if r.trustor != r.trustee]
        return cls(
            trustor=np.array([r.trustor for r in records], dtype=np.int64),
            trustee=np.array([r.trustee for r in records], dtype=np.int64),
            time=np.array([r.time for r in records], dtype=np.int64),
            positive=np.array([r.positive for r in records], dtype=bool),
        )

    def __len__(self) -> int:
        return len(self.trustor)

    def records(self) -> list[InteractionRecord]:
        return [
            InteractionRecord(int(a), int(b), int(t), bool(p))
            for a, b, t, p in zip(self.trustor, self.trustee, self.time, self.positive)
        ]


@dataclass(frozen=True, eq=False)
class TrustGraph:
    """Directed graph with one edge per ordered pair that ever interacted.

    Edges are stored sorted by ``(src, dst)`` in dense-index space. ``dtm`` is
    the edge weight; ``pos``/``neg`` are the raw interaction counters.
    """

    ids: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    dtm: np.ndarray
    pos: np.ndarray
    neg: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    index: dict = field(init=False, repr=False)
    out_ptr: np.ndarray = field(init=False, repr=False)
    in_order: np.ndarray = field(init=False, repr=False)
    in_ptr: np.ndarray = field(init=False, repr=False)
    _edge_pos: dict = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.ids)
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("index", {int(i): k for k, i in enumerate(self.ids)})
        set_("out_ptr", np.concatenate([[0], np.cumsum(np.bincount(self.src, minlength=n))]).astype(np.int64))
        order = np.lexsort((self.src, self.dst))
        set_("in_order", order)
        set_("in_ptr", np.concatenate([[0], np.cumsum(np.bincount(self.dst, minlength=n))]).astype(np.int64))
        set_("_edge_pos", {(int(a), int(b)): k for k, (a, b) in enumerate(zip(self.src, self.dst))})
        if len(self.dtm) and (np.any(self.dtm < 0) or np.any(self.dtm > 1)):
            raise ValueError("edge weights must lie in [0, 1]")

    @property
    def n_nodes(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def idx(self, obj: int) -> int:
        try:
            return self.index[int(obj)]
        except KeyError:
            raise ObjectNotFound(obj) from None

    def __contains__(self, obj) -> bool:
        return int(obj) in self.index

    def has_edge(self, u: int, v: int) -> bool:
        return (self.index.get(int(u), -1), self.index.get(int(v), -1)) in self._edge_pos

    def edge_id(self, u: int, v: int) -> int | None:
        """Position of edge ``u -> v`` (original ids) or None."""
        return self._edge_pos.get((self.index.get(int(u), -1), self.index.get(int(v), -1)))

    def weight(self, u: int, v: int) -> float:
        e = self.edge_id(u, v)
        if e is None:
            raise KeyError(f"no edge {u} -> {v}")
        return float(self.dtm[e])

    def out_edges(self, i: int) -> np.ndarray:
        """Edge positions leaving dense node ``i``, ascending by target."""
        return np.arange(self.out_ptr[i], self.out_ptr[i + 1])

    def in_edges(self, i: int) -> np.ndarray:
        """Edge positions entering dense node ``i``, ascending by source."""
        return self.in_order[self.in_ptr[i]:self.in_ptr[i + 1]]

    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_ptr)

    def in_degree(self) -> np.ndarray:
        return np.diff(self.in_ptr)

    def with_weights(self, dtm: np.ndarray) -> "TrustGraph":
        dtm = np.asarray(dtm, dtype=float)
        if dtm.shape != self.dtm.shape:
            raise ValueError(f"expected {self.dtm.shape} weights, got {dtm.shape}")
        return TrustGraph(self.ids, self.src, self.dst, dtm, self.pos, self.neg, dict(self.diagnostics))

    def edges(self) -> Iterable[tuple[int, int, float]]:
        for a, b, w in zip(self.ids[self.src], self.ids[self.dst], self.dtm):
            yield int(a), int(b), float(w)


def neighbors(g: TrustGraph, s: int, direction: str) -> list[int]:
    """Neighbour ids of ``s`` in ascending order.

    ``direction="in"`` gives sources of incoming edges, ``"out"`` targets of
    outgoing ones.
    """
    i = g.idx(s)
    if direction == "out":
        return [int(x) for x in g.ids[g.dst[g.out_edges(i)]]]
    if direction == "in":
        return [int(x) for x in g.ids[g.src[g.in_edges(i)]]]
    raise ValueError(f"direction must be 'in' or 'out', got {direction!r}")


@dataclass(frozen=True, eq=False)
class RelationKG:
    """Deduplicated relation triples, stored as ``(head, relation code, tail)`` rows."""

    triples: np.ndarray
    entities: np.ndarray
    relations: tuple[Relation, ...]

    @classmethod
    def from_triples(cls, triples: Iterable[RelationTriple]) -> "RelationKG":
        rows = sorted({(int(t.head), t.relation.code, int(t.tail)) for t in triples if t.head != t.tail})
        arr = np.array(rows, dtype=np.int64).reshape(-1, 3)
        ents = np.unique(np.concatenate([arr[:, 0], arr[:, 2]])) if len(arr) else np.zeros(0, np.int64)
        rels = tuple(RELATIONS[c] for c in np.unique(arr[:, 1])) if len(arr) else ()
        return cls(arr, ents, rels)

    @property
    def n_T(self) -> int:
        return len(self.triples)

    @property
    def n_V(self) -> int:
        return len(self.entities)

    @property
    def n_R(self) -> int:
        return len(self.relations)

    def __len__(self) -> int:
        return self.n_T

    def entity_index(self) -> dict[int, int]:
        return {int(e): k for k, e in enumerate(self.entities)}

    def relation_index(self) -> dict[Relation, int]:
        return {r: k for k, r in enumerate(self.relations)}

    def by_relation(self, relation: Relation) -> np.ndarray:
        return self.triples[self.triples[:, 1] == relation.code]

    def iter_triples(self) -> Iterable[RelationTriple]:
        for h, c, t in self.triples:
            yield RelationTriple(int(h), RELATIONS[c], int(t))


def _dtm_laplace(p, n):
    return (p + 1.0) / (p + n + 2.0)


def build_graph(
    interactions: Sequence[InteractionRecord],
    triples: Sequence[RelationTriple] = (),
) -> tuple[TrustGraph, RelationKG]:
    """Build the trust graph and relation KG.

    Self-loop interactions are dropped and counted in
    ``graph.diagnostics["self_loops"]``; duplicate triples collapse silently.
    Initial edge weights are the smoothed direct trust of the raw counts.
    """
    kept = [r for r in interactions if r.trustor != r.trustee]
    self_loops = len(interactions) - len(kept)
    if self_loops:
        log.warning("rejected %d self-loop interaction(s)", self_loops)
    kg = RelationKG.from_triples(triples)

    ids = set()
    for r in kept:
        ids.add(int(r.trustor))
        ids.add(int(r.trustee))
    ids.update(int(e) for e in kg.entities)
    ids_arr = np.array(sorted(ids), dtype=np.int64)
    index = {i: k for k, i in enumerate(ids_arr)}

    counts: dict[tuple[int, int], list[int]] = {}
    for r in kept:
        c = counts.setdefault((index[r.trustor], index[r.trustee]), [0, 0])
        c[0 if r.positive else 1] += 1
    pairs = sorted(counts)
    src = np.array([p[0] for p in pairs], dtype=np.int64)
    dst = np.array([p[1] for p in pairs], dtype=np.int64)
    pos = np.array([counts[p][0] for p in pairs], dtype=np.int64)
    neg = np.array([counts[p][1] for p in pairs], dtype=np.int64)
    g = TrustGraph(ids_arr, src, dst, _dtm_laplace(pos, neg).astype(float), pos, neg,
                   {"self_loops": self_loops, "records": len(kept)})
    return g, kg


# -- flat-file formats -------------------------------------------------------

def write_interactions(path, records: Iterable[InteractionRecord]) -> None:
    """Edge-list TSV ``trustor<TAB>trustee<TAB>rating<TAB>time``; rating is 1 or 0."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(f"{r.trustor}\t{r.trustee}\t{1 if r.positive else 0}\t{r.time}\n")


def read_interactions(path, positive_threshold: float = 0.5) -> list[InteractionRecord]:
    records = []
    for lineno, parts in _tsv_rows(path):
        if len(parts) not in (3, 4):
            raise ValueError(f"{path}:{lineno}: expected 3 or 4 columns, got {len(parts)}")
        time = int(parts[3]) if len(parts) == 4 else 0
        records.append(InteractionRecord(int(parts[0]), int(parts[1]), time,
                                         float(parts[2]) >= positive_threshold))
    return records


def write_triples(path, triples: Iterable[RelationTriple]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in triples:
            fh.write(f"{t.head}\t{t.relation.value}\t{t.tail}\n")


def read_triples(path) -> list[RelationTriple]:
    out = []
    for lineno, parts in _tsv_rows(path):
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected head<TAB>relation<TAB>tail")
        out.append(RelationTriple(int(parts[0]), Relation.parse(parts[1]), int(parts[2])))
    return out


def _tsv_rows(path):
    with open(Path(path), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line.split("\t")
