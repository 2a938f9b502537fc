"""Single-hidden-layer ReLU network that maps the five trust features to a trust level."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .ingest import TrustLabel, label_of
from .optim import Adam
from .rng import substream

log = logging.getLogger(__name__)

N_FEATURES = 5
N_CLASSES = 3


@dataclass(eq=False)
class MlpModel:
    hidden_weights: np.ndarray
    hidden_bias: np.ndarray
    output_weights: np.ndarray
    output_bias: np.ndarray
    l2_penalty: float = 1e-4
    feature_mean: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    feature_scale: np.ndarray = field(default_factory=lambda: np.ones(N_FEATURES))
    loss_trace: list[float] = field(default_factory=list)

    @property
    def hidden_size(self) -> int:
        return self.hidden_weights.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.hidden_weights, "b1": self.hidden_bias,
                "W2": self.output_weights, "b2": self.output_bias}

    @classmethod
    def zeros(cls, hidden_size: int = 16, n_features: int = N_FEATURES) -> "MlpModel":
        return cls(np.zeros((n_features, hidden_size)), np.zeros(hidden_size),
                   np.zeros((hidden_size, N_CLASSES)), np.zeros(N_CLASSES),
                   feature_mean=np.zeros(n_features), feature_scale=np.ones(n_features))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(model: MlpModel, X: np.ndarray):
    Xs = (X - model.feature_mean) / model.feature_scale
    z1 = Xs @ model.hidden_weights + model.hidden_bias
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ model.output_weights + model.output_bias
    return Xs, z1, a1, z2


def loss_and_grads(model: MlpModel, X: np.ndarray, y: np.ndarray):
    """Mean softmax cross-entropy plus ``l2 * (|W1|^2 + |W2|^2)``, with its gradient.

    ReLU's derivative at exactly 0 is taken as 0.
    """
    n = len(X)
    Xs, z1, a1, z2 = _forward(model, X)
    p = softmax(z2)
    logp = z2 - z2.max(axis=1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
    W1, W2 = model.hidden_weights, model.output_weights
    lam = model.l2_penalty
    loss = -np.mean(logp[np.arange(n), y]) + lam * (np.sum(W1 * W1) + np.sum(W2 * W2))
    dz2 = p.copy()
    dz2[np.arange(n), y] -= 1.0
    dz2 /= n
    da1 = dz2 @ W2.T
    dz1 = da1 * (z1 > 0)
    grads = {
        "W1": Xs.T @ dz1 + 2 * lam * W1,
        "b1": dz1.sum(axis=0),
        "W2": a1.T @ dz2 + 2 * lam * W2,
        "b2": dz2.sum(axis=0),
    }
    return float(loss), grads


def init_model(n_features: int, hidden_size: int, l2: float, rng: np.random.Generator) -> MlpModel:
    def glorot(fan_in, fan_out):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    return MlpModel(glorot(n_features, hidden_size), np.zeros(hidden_size),
                    glorot(hidden_size, N_CLASSES), np.zeros(N_CLASSES), l2,
                    np.zeros(n_features), np.ones(n_features))


def train_mlp(X, y, hidden_size: int = 16, l2: float = 1e-4, max_epochs: int = 500,
              cost_threshold: float = 1e-3, seed: int = 0, learning_rate: float = 1e-3,
              standardize: bool = True) -> MlpModel:
    """Full-batch Adam until the epoch loss drops below ``cost_threshold`` or ``max_epochs``.

    With ``standardize`` the features are z-scored using training statistics,
    which are stored on the model and reapplied at prediction time.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if hidden_size < 1:
        raise ValueError("hidden_size must be >= 1")
    if len(X) == 0 or len(np.unique(y)) < 2:
        raise ValueError("degenerate labels: training data needs at least two classes")
    if len(np.unique(y)) < N_CLASSES:
        log.warning("training data lacks class(es) %s", sorted(set(range(N_CLASSES)) - set(y.tolist())))
    model = init_model(X.shape[1], hidden_size, l2, substream(seed, "mlp-init"))
    if standardize:
        model.feature_mean = X.mean(axis=0)
        scale = X.std(axis=0)
        model.feature_scale = np.where(scale > 1e-12, scale, 1.0)
    opt = Adam(model.params(), lr=learning_rate)
    for epoch in range(max_epochs):
        loss, grads = loss_and_grads(model, X, y)
        if not np.isfinite(loss):
            raise FloatingPointError(f"classifier loss diverged at epoch {epoch}")
        model.loss_trace.append(loss)
        if loss < cost_threshold:
            break
        opt.step(grads)
    return model


def predict_proba(model: MlpModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature value")
    return softmax(_forward(model, X)[3])


def predict(model: MlpModel, features) -> tuple[TrustLabel, np.ndarray]:
    """Label and class probabilities for one feature vector; ties go to the lower class."""
    features = np.asarray(features, dtype=float)
    if features.shape != (model.hidden_weights.shape[0],):
        raise ValueError(f"expected {model.hidden_weights.shape[0]} features, got shape {features.shape}")
    p = predict_proba(model, features)[0]
    return TrustLabel(int(np.argmax(p))), p


def predict_labels(model: MlpModel, X) -> np.ndarray:
    return np.argmax(predict_proba(model, X), axis=1)


# -- weighted-sum baseline ----------------------------------------------------

def weighted_trust(X, weights) -> np.ndarray:
    """Fixed-weight combination of the five metrics; weights must sum to 1."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (N_FEATURES,) or np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("weighted trust needs five non-negative weights summing to 1")
    return np.asarray(X, dtype=float) @ w


def weighted_labels(X, weights, low: float = 1 / 3, high: float = 2 / 3) -> np.ndarray:
    scores = np.clip(weighted_trust(X, weights), 0.0, 1.0)
    return np.array([int(label_of(float(s), low, high)) for s in scores], dtype=np.int64)


# -- serialisation ------------------------------------------------------------

_BLOCKS = ("hidden_weights", "hidden_bias", "output_weights", "output_bias", "feature_mean", "feature_scale")


def write_model(path, model: MlpModel) -> None:
    """Flat TSV: ``param`` lines, then ``block<TAB>name<TAB>rows<TAB>cols`` headers each followed by rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# trust-siot mlp v1\n")
        fh.write(f"param\thidden_size\t{model.hidden_size}\n")
        fh.write(f"param\tl2_penalty\t{model.l2_penalty!r}\n")
        for name in _BLOCKS:
            arr = np.atleast_2d(getattr(model, name))
            fh.write(f"block\t{name}\t{arr.shape[0]}\t{arr.shape[1]}\n")
            for row in arr:
                fh.write("\t".join(repr(float(v)) for v in row) + "\n")


def read_model(path) -> MlpModel:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    params, blocks = {}, {}
    i = 0
    while i < len(lines):
        parts = lines[i].split("\t")
        if parts[0] == "param":
            params[parts[1]] = parts[2]
            i += 1
        elif parts[0] == "block":
            name, rows, cols = parts[1], int(parts[2]), int(parts[3])
            body = [[float(v) for v in ln.split("\t")] for ln in lines[i + 1:i + 1 + rows]]
            if len(body) != rows or any(len(r) != cols for r in body):
                raise ValueError(f"{path}: block {name} does not match its declared shape {rows}x{cols}")
            blocks[name] = np.array(body)
            i += 1 + rows
        else:
            raise ValueError(f"{path}: unexpected line {lines[i][:40]!r}")
    missing = set(_BLOCKS) - set(blocks)
    if missing:
        raise ValueError(f"{path}: missing blocks {sorted(missing)}")
    model = MlpModel(blocks["hidden_weights"], blocks["hidden_bias"][0], blocks["output_weights"],
                     blocks["output_bias"][0], float(params.get("l2_penalty", 1e-4)),
                     blocks["feature_mean"][0], blocks["feature_scale"][0])
    if model.hidden_size != int(params.get("hidden_size", model.hidden_size)):
        raise ValueError(f"{path}: hidden_size does not match weight shapes")
    return model
