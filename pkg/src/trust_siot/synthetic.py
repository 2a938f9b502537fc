"""Planted-trust toy datasets in the Advogato + SIoT-relations file formats.

Every object gets a hidden trust level. Honest raters certify a trustee at a
level matching its hidden class (with some noise); dishonest raters invert it.
The relation graph is an independent preferential-attachment graph over more
objects than the rating network, as the merge step expects.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import RELATIONS
from .rng import substream

LEVELS_BY_CLASS = {0: ("Observer",), 1: ("Apprentice",), 2: ("Journeyer", "Master")}


@dataclass(frozen=True)
class SyntheticSpec:
    n_objects: int = 300
    mean_out_degree: float = 8.0
    class_mix: tuple[float, float, float] = (0.2, 0.3, 0.5)
    dishonest_fraction: float = 0.1
    noise: float = 0.1
    time_span: int = 1000
    siot_factor: float = 1.5
    siot_edges_per_node: int = 3


def generate(spec: SyntheticSpec = SyntheticSpec(), seed: int = 0):
    """Return ``(rating_rows, triple_rows, hidden_class)``.

    Rating rows are ``(rater, rated, level, time)``; triple rows ``(head, relation, tail)``.
    """
    rng = substream(seed, "synthetic")
    n = spec.n_objects
    hidden = rng.choice(3, size=n, p=np.asarray(spec.class_mix) / sum(spec.class_mix))
    dishonest = rng.random(n) < spec.dishonest_fraction
    # popular objects attract more ratings
    popularity = rng.pareto(2.0, size=n) + 1.0
    popularity /= popularity.sum()

    rows = []
    for a in range(n):
        k = min(n - 1, max(1, int(rng.poisson(spec.mean_out_degree))))
        targets = rng.choice(n, size=k + 1, replace=False, p=popularity)
        for b in [int(t) for t in targets if t != a][:k]:
            cls = int(hidden[b])
            if dishonest[a]:
                cls = 2 - cls
            if rng.random() < spec.noise:
                cls = int(rng.integers(3))
            levels = LEVELS_BY_CLASS[cls]
            rows.append((a, b, levels[int(rng.integers(len(levels)))], int(rng.integers(spec.time_span))))

    m = int(n * spec.siot_factor)
    triples = set()
    degree = np.ones(m)
    for v in range(1, m):
        p = degree[:v] / degree[:v].sum()
        for u in rng.choice(v, size=min(v, spec.siot_edges_per_node), replace=False, p=p):
            rel = RELATIONS[int(rng.integers(len(RELATIONS)))]
            triples.add((v, rel.value, int(u)))
            degree[v] += 1
            degree[u] += 1
    return rows, sorted(triples), hidden


def write_dataset(out_dir, spec: SyntheticSpec = SyntheticSpec(), seed: int = 0) -> Path:
    """Write ``ratings.tsv``, ``siot_triples.tsv`` and ``manifest.txt``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, triples, _ = generate(spec, seed)
    with open(out / "ratings.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for a, b, level, t in rows:
            fh.write(f"{a}\t{b}\t{level}\t{t}\n")
    with open(out / "siot_triples.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for h, r, t in triples:
            fh.write(f"{h}\t{r}\t{t}\n")
    manifest = out / "manifest.txt"
    manifest.write_text(
        "name = synthetic\nformat = advogato\nratings = ratings.tsv\ntriples = siot_triples.tsv\n",
        encoding="utf-8",
    )
    return manifest
