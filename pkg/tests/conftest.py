import numpy as np
import pytest

from trust_siot.graph import InteractionRecord, Relation, RelationTriple, build_graph


def weighted_graph(weights: dict, isolated=()):
    """Trust graph whose edge ``(u, v)`` carries DTM ``weights[(u, v)]``.

    ``isolated`` pairs add interaction-free nodes via relation triples.
    """
    records = [InteractionRecord(u, v, 0, True) for u, v in weights]
    g, _ = build_graph(records, [RelationTriple(a, Relation.SOR, b) for a, b in isolated])
    return g.with_weights(np.array([weights[(u, v)] for u, v, _ in g.edges()], dtype=float))


def random_graph(rng, n, p=0.5):
    weights = {}
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < p:
                weights[(u, v)] = float(rng.uniform(0, 1))
    return weighted_graph(weights)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def numeric_grad(loss_fn, params: dict, eps: float = 1e-6) -> dict:
    """Central finite differences of ``loss_fn()`` w.r.t. every entry of ``params`` (mutated in place, restored)."""
    out = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + eps
            up = loss_fn()
            arr[idx] = old - eps
            down = loss_fn()
            arr[idx] = old
            g[idx] = (up - down) / (2 * eps)
        out[name] = g
    return out


def relative_error(analytic: dict, numeric: dict) -> float:
    a = np.concatenate([analytic[k].ravel() for k in sorted(analytic)])
    n = np.concatenate([numeric[k].ravel() for k in sorted(numeric)])
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12))


def toy_kg(seed: int = 0, n_entities: int = 20, n_triples: int = 60):
    from trust_siot.graph import RELATIONS, RelationKG

    rng = np.random.default_rng(seed)
    triples = set()
    while len(triples) < n_triples:
        h, t = rng.choice(n_entities, size=2, replace=False)
        triples.add((int(h), int(rng.integers(3)), int(t)))
    return RelationKG.from_triples([RelationTriple(h, RELATIONS[r], t) for h, r, t in sorted(triples)])


def separable_blobs(seed: int = 0, n: int = 50):
    """Three tight Gaussian blobs in five dimensions, one per trust class."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 3
    centers = np.array([[0, 0, 0, 0, 0], [1, 1, 0, 0, 0], [2, 2, 0, 0, 0]], dtype=float) / 2
    return centers[y] + rng.normal(0, 0.05, size=(n, 5)), y


def brute_force_metrics(y_true, y_pred):
    """Loop-based micro-F1 (pooled over classes), MAE and MSE on the {0, 0.5, 1} encoding."""
    score = {0: 0.0, 1: 0.5, 2: 1.0}
    tp = fp = fn = 0
    for c in (0, 1, 2):
        for t, p in zip(y_true, y_pred):
            tp += t == c and p == c
            fp += t != c and p == c
            fn += t == c and p != c
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    abs_err = sq_err = 0.0
    for t, p in zip(y_true, y_pred):
        d = score[int(t)] - score[int(p)]
        abs_err += abs(d)
        sq_err += d * d
    return f1, abs_err / len(y_true), sq_err / len(y_true)


ACCEPTANCE_LINES: list[str] = []


def acceptance_line(status: str, criterion: str, detail: str = "") -> str:
    line = f"{status:4s}  {criterion}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
