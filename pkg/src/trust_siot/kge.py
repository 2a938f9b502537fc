"""RotL knowledge-graph embeddings and the embedding-similarity feature.

A triple ``(h, r, t)`` scores ``-phi(||Rot(r) e_h (+)_a e_t||) + b_h + b_t``
with ``phi(x) = x * exp(x)`` and the elementwise "addition"
``x (+)_a y = a * (x + y) / (1 + x * y)``. ``Rot(r)`` is a block of d/2 planar
rotations over coordinate pairs ``(2k, 2k+1)``. Gradients are analytic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Relation, RelationKG
from .optim import Adam
from .rng import substream

log = logging.getLogger(__name__)

DENOM_GUARD = 1e-9
LOGIT_CLAMP = 30.0


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 32
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3
    neg_samples: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.dim <= 0 or self.dim % 2:
            raise ValueError(f"embedding dimension must be positive and even, got {self.dim}")
        if self.epochs < 0 or self.batch_size <= 0 or self.neg_samples <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs must be >= 0 and batch_size, neg_samples, learning_rate > 0")


@dataclass(eq=False)
class EmbeddingTable:
    entities: np.ndarray
    entity_vecs: np.ndarray
    entity_bias: np.ndarray
    relations: tuple[Relation, ...]
    relation_angles: np.ndarray
    relation_alpha: np.ndarray
    loss_trace: list[float] = field(default_factory=list)
    zero_norm_hits: int = 0

    def __post_init__(self):
        self._index = {int(e): k for k, e in enumerate(self.entities)}

    @property
    def dim(self) -> int:
        return self.entity_vecs.shape[1]

    def vector(self, obj: int) -> np.ndarray | None:
        k = self._index.get(int(obj))
        return None if k is None else self.entity_vecs[k]

    def params(self) -> dict[str, np.ndarray]:
        return {"entity": self.entity_vecs, "angle": self.relation_angles,
                "bias": self.entity_bias, "alpha": self.relation_alpha}


# -- scoring ------------------------------------------------------------------

def rotate(x: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Apply planar rotations ``angles[..., k]`` to coordinate pairs ``(2k, 2k+1)`` of ``x``."""
    x0, x1 = x[..., 0::2], x[..., 1::2]
    c, s = np.cos(angles), np.sin(angles)
    out = np.empty(np.broadcast_shapes(x.shape[:-1], np.shape(angles)[:-1]) + x.shape[-1:])
    out[..., 0::2] = c * x0 - s * x1
    out[..., 1::2] = s * x0 + c * x1
    return out


def _guard(den):
    return np.where(np.abs(den) < DENOM_GUARD, den + DENOM_GUARD, den)


def alpha_add(x, y, alpha):
    return alpha * (x + y) / _guard(1.0 + x * y)


def phi(x):
    return x * np.exp(x)


def rotl_score(h_vec, rel_angles, t_vec, alpha, b_h=0.0, b_t=0.0) -> float:
    z = alpha_add(rotate(np.asarray(h_vec, float), np.asarray(rel_angles, float)), np.asarray(t_vec, float), alpha)
    return float(-phi(np.linalg.norm(z)) + b_h + b_t)


def _forward(params, h, r, t):
    E, A = params["entity"], params["angle"]
    x = E[h]
    theta = A[r]
    u = rotate(x, theta)
    et = E[t]
    den = _guard(1.0 + u * et)
    num = u + et
    a = params["alpha"][r][:, None]
    z = a * num / den
    n = np.linalg.norm(z, axis=1)
    with np.errstate(over="ignore"):
        en = np.exp(n)
    f = -n * en + params["bias"][h] + params["bias"][t]
    cache = (h, r, t, theta, u, et, den, num, a, z, n, en)
    return f, cache


def _backward(params, cache, g_f, grads):
    h, r, t, theta, u, et, den, num, a, z, n, en = cache
    # clamped scores carry g_f == 0; mask exp(n) there since it may be inf
    g_n = g_f * -(1.0 + n) * np.where(g_f != 0, en, 0.0)
    safe_n = np.where(n > 0, n, 1.0)
    g_z = np.where((n > 0)[:, None], (g_n / safe_n)[:, None] * z, 0.0)
    np.add.at(grads["alpha"], r, np.sum(g_z * num / den, axis=1))
    den2 = den * den
    g_u = g_z * a * (den - num * et) / den2
    g_et = g_z * a * (den - num * u) / den2
    c, s = np.cos(theta), np.sin(theta)
    gu0, gu1 = g_u[:, 0::2], g_u[:, 1::2]
    g_x = np.empty_like(g_u)
    g_x[:, 0::2] = c * gu0 + s * gu1
    g_x[:, 1::2] = -s * gu0 + c * gu1
    np.add.at(grads["angle"], r, gu0 * -u[:, 1::2] + gu1 * u[:, 0::2])
    np.add.at(grads["entity"], h, g_x)
    np.add.at(grads["entity"], t, g_et)
    np.add.at(grads["bias"], h, g_f)
    np.add.at(grads["bias"], t, g_f)


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def kge_loss(positive_scores, negative_scores) -> float:
    """Mean per-positive binary cross-entropy over a positive and its negatives."""
    pos = np.asarray(positive_scores, dtype=float).ravel()
    neg = np.asarray(negative_scores, dtype=float).reshape(len(pos), -1)
    pos = np.clip(pos, -LOGIT_CLAMP, LOGIT_CLAMP)
    neg = np.clip(neg, -LOGIT_CLAMP, LOGIT_CLAMP)
    return float(-(np.sum(_log_sigmoid(pos)) + np.sum(_log_sigmoid(-neg))) / len(pos))


def loss_and_grads(params: dict[str, np.ndarray], pos: np.ndarray, neg: np.ndarray):
    """Loss and gradient for positives ``pos`` (B, 3) with negatives ``neg`` (B, k, 3).

    Triples are dense ``(head, relation, tail)`` indices. Scores outside the
    logit clamp contribute zero gradient.
    """
    B, k = neg.shape[0], neg.shape[1]
    allt = np.concatenate([pos, neg.reshape(-1, 3)])
    f, cache = _forward(params, allt[:, 0], allt[:, 1], allt[:, 2])
    fp, fn = f[:B], f[B:].reshape(B, k)
    loss = kge_loss(fp, fn)
    inside = np.abs(f) <= LOGIT_CLAMP
    fc = np.clip(f, -LOGIT_CLAMP, LOGIT_CLAMP)
    sig = 1.0 / (1.0 + np.exp(-fc))
    g_f = np.empty_like(f)
    g_f[:B] = -(1.0 - sig[:B]) / B
    g_f[B:] = sig[B:] / B
    g_f = np.where(inside, g_f, 0.0)
    grads = {name: np.zeros_like(v) for name, v in params.items()}
    _backward(params, cache, g_f, grads)
    return loss, grads


# -- negative sampling --------------------------------------------------------

def corrupt(triples: np.ndarray, n_entities: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` corruptions per triple: head or tail (fair coin) swapped for a different entity."""
    if n_entities < 2:
        raise ValueError("negative sampling needs at least two entities")
    if k < 1:
        raise ValueError("k must be >= 1")
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    out = np.repeat(triples[:, None, :], k, axis=1)
    side = np.where(rng.random(out.shape[:2]) < 0.5, 0, 2)
    orig = np.take_along_axis(out, side[..., None], axis=2)[..., 0]
    repl = rng.integers(0, n_entities - 1, size=orig.shape)
    repl += repl >= orig
    np.put_along_axis(out, side[..., None], repl[..., None], axis=2)
    return out


def negative_samples(triple, n_entities: int, k: int, rng: np.random.Generator) -> list[tuple[int, int, int]]:
    return [tuple(int(v) for v in row) for row in corrupt(np.array([triple]), n_entities, k, rng)[0]]


# -- training -----------------------------------------------------------------

def init_table(kg: RelationKG, cfg: TrainConfig) -> EmbeddingTable:
    rng = substream(cfg.seed, "kge-init")
    d = cfg.dim
    bound = 0.5 / math.sqrt(d)
    return EmbeddingTable(
        entities=kg.entities.copy(),
        entity_vecs=rng.uniform(-bound, bound, size=(kg.n_V, d)),
        entity_bias=np.zeros(kg.n_V),
        relations=kg.relations,
        relation_angles=rng.uniform(-math.pi, math.pi, size=(kg.n_R, d // 2)),
        relation_alpha=np.ones(kg.n_R),
    )


def dense_triples(kg: RelationKG) -> np.ndarray:
    ent = kg.entity_index()
    rel = {r.code: k for k, r in enumerate(kg.relations)}
    return np.array([(ent[int(h)], rel[int(c)], ent[int(t)]) for h, c, t in kg.triples],
                    dtype=np.int64).reshape(-1, 3)


def train_kge(kg: RelationKG, cfg: TrainConfig = TrainConfig()) -> EmbeddingTable:
    """Minibatch Adam on the negative-sampling loss; fills ``table.loss_trace`` per epoch."""
    if kg.n_T == 0:
        raise ValueError("cannot train embeddings on an empty knowledge graph")
    table = init_table(kg, cfg)
    params = table.params()
    data = dense_triples(kg)
    rng = substream(cfg.seed, "kge-sampling")
    opt = Adam(params, lr=cfg.learning_rate)
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(data))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = data[order[start:start + cfg.batch_size]]
            neg = corrupt(batch, kg.n_V, cfg.neg_samples, rng)
            loss, grads = loss_and_grads(params, batch, neg)
            if not np.isfinite(loss):
                raise FloatingPointError(f"embedding loss diverged at epoch {epoch}")
            opt.step(grads)
            total += loss * len(batch)
        table.loss_trace.append(total / len(data))
        log.debug("kge epoch %d loss %.6f", epoch, table.loss_trace[-1])
    return table


# -- similarity ---------------------------------------------------------------

def cdor(table: EmbeddingTable, s_i: int, s_j: int) -> float:
    """Cosine similarity of two object embeddings; 0 for unembedded or zero-norm objects."""
    vi, vj = table.vector(s_i), table.vector(s_j)
    if vi is None or vj is None:
        return 0.0
    ni, nj = np.linalg.norm(vi), np.linalg.norm(vj)
    if ni == 0 or nj == 0:
        table.zero_norm_hits += 1
        log.warning("zero-norm embedding for pair (%s, %s)", s_i, s_j)
        return 0.0
    return float(np.clip(np.dot(vi, vj) / (ni * nj), -1.0, 1.0))


# -- serialisation ------------------------------------------------------------

def _fmt(values) -> str:
    return "\t".join(repr(float(v)) for v in values)


def write_embeddings(table: EmbeddingTable, entity_path, relation_path) -> None:
    """``entity<TAB>v0..v{d-1}<TAB>bias`` and ``relation<TAB>angle0..<TAB>alpha`` TSV files."""
    with open(entity_path, "w", encoding="utf-8", newline="\n") as fh:
        for e, vec, b in zip(table.entities, table.entity_vecs, table.entity_bias):
            fh.write(f"{int(e)}\t{_fmt(vec)}\t{float(b)!r}\n")
    with open(relation_path, "w", encoding="utf-8", newline="\n") as fh:
        for r, ang, a in zip(table.relations, table.relation_angles, table.relation_alpha):
            fh.write(f"{r.value}\t{_fmt(ang)}\t{float(a)!r}\n")


def _read_rows(path, what):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            try:
                vals = [float(p) for p in parts[1:]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed {what} row") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{path}:{lineno}: non-finite {what} value")
            rows.append((parts[0], vals))
    widths = {len(v) for _, v in rows}
    if len(widths) > 1:
        raise ValueError(f"{path}: inconsistent {what} row widths {sorted(widths)}")
    return rows


def read_embeddings(entity_path, relation_path) -> EmbeddingTable:
    ent_rows = _read_rows(entity_path, "entity")
    rel_rows = _read_rows(relation_path, "relation")
    d = len(ent_rows[0][1]) - 1 if ent_rows else 0
    if ent_rows and (d <= 0 or d % 2):
        raise ValueError(f"{entity_path}: embedding dimension {d} is not positive and even")
    if rel_rows and len(rel_rows[0][1]) - 1 != d // 2:
        raise ValueError(f"{relation_path}: expected {d // 2} angles per relation")
    ent = np.array([v for _, v in ent_rows]).reshape(len(ent_rows), d + 1)
    rel = np.array([v for _, v in rel_rows]).reshape(len(rel_rows), d // 2 + 1)
    return EmbeddingTable(
        entities=np.array([int(e) for e, _ in ent_rows], dtype=np.int64),
        entity_vecs=ent[:, :d].copy(),
        entity_bias=ent[:, d].copy(),
        relations=tuple(Relation.parse(r) for r, _ in rel_rows),
        relation_angles=rel[:, :-1].copy(),
        relation_alpha=rel[:, -1].copy(),
    )


def empty_table(dim: int = 2) -> EmbeddingTable:
    return EmbeddingTable(np.zeros(0, np.int64), np.zeros((0, dim)), np.zeros(0), (),
                          np.zeros((0, dim // 2)), np.zeros(0))

