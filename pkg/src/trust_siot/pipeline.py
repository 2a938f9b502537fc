"""Stage-by-stage experiment runner.

Each stage reads its inputs from, and writes its artifacts to, the run's output
directory. ``run.json`` records the config, input hashes and the sha256 of
every artifact; downstream stages refuse artifacts whose hash no longer
matches.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import credibility as cred
from .config import ExperimentConfig
from .direct_trust import compute_all_dtm
from .evaluation import METRIC_HEADER, EvalReport, grid_search_hidden, report_from_labels, train_test_split
from .features import build_features, read_features, to_arrays, write_features
from .graph import InteractionLog, TrustGraph, build_graph, read_interactions, read_triples, write_interactions, write_triples
from .ingest import TrustLabel, dataset_statistics, label_pairs, load_manifest, merge_siot_relations, ratings_to_interactions
from .kge import empty_table, read_embeddings, train_kge, write_embeddings
from .mlp import predict_labels, read_model, train_mlp, weighted_labels, write_model

log = logging.getLogger(__name__)

STAGES = ("ingest", "dtm", "credibility", "kge-train", "features", "train", "evaluate")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Output directory plus its ``run.json`` manifest."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.dir = Path(cfg.output)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.dir / "run.json"
        if self.manifest_path.exists():
            self.manifest = json.loads(self.manifest_path.read_text(encoding="utf-8"))
        else:
            self.manifest = {"config": [], "dataset": None, "inputs": {}, "artifacts": {}}
        self.manifest["config"] = cfg.as_text().splitlines()

    def path(self, name: str) -> Path:
        return self.dir / name

    def record(self, *names: str) -> None:
        for name in names:
            self.manifest["artifacts"][name] = sha256(self.path(name))
        self.save()

    def save(self) -> None:
        self.manifest_path.write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def consume(self, stage: str, name: str) -> Path:
        p = self.path(name)
        if not p.exists():
            raise StageError(stage, f"missing artifact {name}; run the producing stage first")
        expected = self.manifest["artifacts"].get(name)
        if expected is not None and sha256(p) != expected:
            raise StageError(stage, f"checksum mismatch for {name}: artifact changed since it was written")
        return p

    @property
    def dataset_name(self) -> str:
        return self.manifest.get("dataset") or "dataset"


def _guard(stage: str, fn: Callable, *args):
    try:
        return fn(*args)
    except StageError:
        raise
    except (ValueError, KeyError, OSError, FloatingPointError) as exc:
        raise StageError(stage, str(exc)) from exc


# -- stages -------------------------------------------------------------------

def stage_ingest(run: Run) -> None:
    cfg = run.cfg
    if not cfg.manifest:
        raise StageError("ingest", "no dataset manifest configured (set manifest = path)")
    ds = load_manifest(cfg.manifest)
    if not ds.ratings:
        raise StageError("ingest", "dataset has no usable ratings")
    if ds.triples and ds.merge:
        interactions, kg = merge_siot_relations(ds.ratings, ds.triples, cfg.seed, cfg.positive_threshold)
    else:
        interactions = ratings_to_interactions(ds.ratings, cfg.positive_threshold)
        _, kg = build_graph([], ds.triples)
    labels = label_pairs(ds.ratings, cfg.label_low, cfg.label_high)

    write_interactions(run.path("interactions.tsv"), interactions)
    write_triples(run.path("triples.tsv"), kg.iter_triples())
    with open(run.path("labels.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        for (a, b), lbl in sorted(labels.items()):
            fh.write(f"{a}\t{b}\t{lbl.title}\n")
    report = {"diagnostics": ds.diagnostics.as_dict(), "statistics": dataset_statistics(ds.ratings),
              "kg": {"n_T": kg.n_T, "n_V": kg.n_V, "n_R": kg.n_R}}
    run.path("ingest.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    run.manifest["dataset"] = ds.name
    run.manifest["inputs"] = {p.name: sha256(p) for p in ds.inputs}
    run.record("interactions.tsv", "triples.tsv", "labels.tsv", "ingest.json")


def _load_log_and_graph(run: Run, stage: str) -> tuple[InteractionLog, TrustGraph]:
    records = read_interactions(run.consume(stage, "interactions.tsv"))
    triples = read_triples(run.consume(stage, "triples.tsv"))
    g, _ = build_graph(records, triples)
    return InteractionLog.from_records(records), g


def stage_dtm(run: Run) -> None:
    log_, g = _load_log_and_graph(run, "dtm")
    cfg = run.cfg
    g = compute_all_dtm(g, log_, cfg.decay(log_), cfg.now, cfg.dtm_smoothed)
    with open(run.path("edges.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("trustor\ttrustee\tpositive\tnegative\tdtm\n")
        for (a, b, w), p, n in zip(g.edges(), g.pos, g.neg):
            fh.write(f"{a}\t{b}\t{int(p)}\t{int(n)}\t{w!r}\n")
    run.record("edges.tsv")


def _weighted_graph(run: Run, stage: str) -> TrustGraph:
    _, g = _load_log_and_graph(run, stage)
    weights = {}
    with open(run.consume(stage, "edges.tsv"), encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            a, b, _, _, w = line.rstrip("\n").split("\t")
            weights[(int(a), int(b))] = float(w)
    if len(weights) != g.n_edges:
        raise StageError(stage, f"edges.tsv has {len(weights)} edges, graph has {g.n_edges}")
    return g.with_weights(np.array([weights[(a, b)] for a, b, _ in g.edges()]))


def stage_credibility(run: Run) -> None:
    g = _weighted_graph(run, "credibility")
    scores = cred.solve_credibility(g, run.cfg.epsilon, run.cfg.max_iter)
    log.info("credibility: %d iterations, converged=%s", scores.iterations, scores.converged)
    cred.write_scores(run.path("scores.csv"), scores)
    run.manifest["credibility"] = {"iterations": scores.iterations, "converged": scores.converged}
    run.record("scores.csv")


def stage_kge(run: Run) -> None:
    _, kg = build_graph([], read_triples(run.consume("kge-train", "triples.tsv")))
    if kg.n_T == 0:
        log.warning("empty relation graph: every embedding similarity will be 0")
        table = empty_table(run.cfg.kge_dim)
    else:
        table = train_kge(kg, run.cfg.kge())
    write_embeddings(table, run.path("entities.tsv"), run.path("relations.tsv"))
    with open(run.path("kge_loss.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,loss\n")
        for i, v in enumerate(table.loss_trace):
            fh.write(f"{i},{v!r}\n")
    run.record("entities.tsv", "relations.tsv", "kge_loss.csv")


def _labels(run: Run, stage: str) -> dict[tuple[int, int], TrustLabel]:
    out = {}
    with open(run.consume(stage, "labels.tsv"), encoding="utf-8") as fh:
        for line in fh:
            a, b, lbl = line.rstrip("\n").split("\t")
            out[(int(a), int(b))] = TrustLabel.parse(lbl)
    return out


def stage_features(run: Run) -> None:
    stage = "features"
    g = _weighted_graph(run, stage)
    scores = cred.read_scores(run.consume(stage, "scores.csv"))
    if not np.array_equal(scores.ids, g.ids):
        raise StageError(stage, "scores.csv does not cover the graph's objects")
    table = read_embeddings(run.consume(stage, "entities.tsv"), run.consume(stage, "relations.tsv"))
    if table.entity_vecs.shape[0] and table.dim != run.cfg.kge_dim:
        raise StageError(stage, f"embedding dimension {table.dim} != configured kge.dim {run.cfg.kge_dim}")
    samples = build_features(g, scores, table, _labels(run, stage), run.cfg.th, run.cfg.max_k)
    write_features(run.path("features.tsv"), samples)
    run.record("features.tsv")


def _split(run: Run, n: int, fraction: float):
    return train_test_split(n, fraction, run.cfg.seed)


def fit(cfg: ExperimentConfig, X: np.ndarray, y: np.ndarray):
    """Grid-search the hidden size with k-fold CV on the training data, then refit on all of it."""
    if len(cfg.mlp_grid) > 1 and len(X) >= cfg.k_folds:
        hidden, cv = grid_search_hidden(X, y, cfg.mlp_grid, cfg.k_folds, cfg.seed, **cfg.mlp_kwargs())
    else:
        hidden, cv = (cfg.mlp_grid[0] if cfg.mlp_grid else cfg.mlp_hidden), {}
    return train_mlp(X, y, hidden_size=hidden, seed=cfg.seed, **cfg.mlp_kwargs()), cv


def stage_train(run: Run) -> None:
    if run.cfg.mode == "weighted":
        log.info("weighted-sum mode: nothing to train")
        return
    X, y = to_arrays(read_features(run.consume("train", "features.tsv")))
    tr, _ = _split(run, len(X), run.cfg.train_fraction)
    model, cv = fit(run.cfg, X[tr], y[tr])
    write_model(run.path("model.tsv"), model)
    with open(run.path("cv.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("hidden,cv_f1\n")
        for h, s in cv.items():
            fh.write(f"{h},{s:.6f}\n")
    run.record("model.tsv", "cv.csv")


def _predict(run: Run, stage: str, X: np.ndarray, model=None) -> np.ndarray:
    cfg = run.cfg
    if cfg.mode == "weighted":
        return weighted_labels(X, cfg.baseline_weights, cfg.label_low, cfg.label_high)
    if model is None:
        model = read_model(run.consume(stage, "model.tsv"))
    return predict_labels(model, X)


def write_metrics(path, rows: Sequence[Sequence[str]], header=METRIC_HEADER) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def stage_evaluate(run: Run) -> EvalReport:
    X, y = to_arrays(read_features(run.consume("evaluate", "features.tsv")))
    _, te = _split(run, len(X), run.cfg.train_fraction)
    report = report_from_labels(y[te], _predict(run, "evaluate", X[te]))
    write_metrics(run.path("metrics.csv"), [report.row(run.dataset_name, run.cfg.train_fraction)])
    run.record("metrics.csv")
    log.info("micro-F1 %.4f  MAE %.4f  MSE %.4f  (n_test=%d)", report.f1_micro, report.mae, report.mse, report.n_test)
    return report


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "dtm": stage_dtm,
    "credibility": stage_credibility,
    "kge-train": stage_kge,
    "features": stage_features,
    "train": stage_train,
    "evaluate": stage_evaluate,
}


def run_stage(cfg: ExperimentConfig, stage: str):
    run = Run(cfg)
    return _guard(stage, STAGE_FUNCS[stage], run)


def run_pipeline(cfg: ExperimentConfig) -> EvalReport:
    report = None
    for stage in STAGES:
        report = run_stage(cfg, stage)
    return report


# -- sweeps -------------------------------------------------------------------

SWEEP_HEADER = ["axis", "value", "dataset", "train_frac", "f1", "mae", "mse", "n_test", "note"]


def _sweep_row(axis, value, run: Run, frac, report: EvalReport | None, note=""):
    if report is None:
        return [axis, f"{value:g}", run.dataset_name, f"{frac:g}", "", "", "", "0", note]
    return [axis, f"{value:g}", *report.row(run.dataset_name, frac), str(report.n_test), note]


def pair_activity(run: Run, samples) -> np.ndarray:
    """Interactions touching either endpoint of each pair."""
    records = read_interactions(run.consume("sweep", "interactions.tsv"))
    touch: dict[int, int] = {}
    for r in records:
        touch[r.trustor] = touch.get(r.trustor, 0) + 1
        touch[r.trustee] = touch.get(r.trustee, 0) + 1
    return np.array([touch.get(s.trustor, 0) + touch.get(s.trustee, 0) for s in samples], dtype=float)


def sweep(cfg: ExperimentConfig, axis: str | None = None, values: Sequence[float] | None = None) -> list[list[str]]:
    return _guard("sweep", _sweep, cfg, axis, values)


def _sweep(cfg: ExperimentConfig, axis, values) -> list[list[str]]:
    """One metrics row per sweep value; upstream artifacts are computed once and shared.

    ``train_fraction`` retrains the classifier per value. ``interactions``
    treats values as increasing quantile edges in (0, 1] of per-pair
    interaction activity and scores the test pairs of each bucket.
    """
    axis = axis or cfg.sweep_axis
    values = list(values if values is not None else cfg.sweep_values)
    if not values:
        raise StageError("sweep", "no sweep values")
    if axis not in ("train_fraction", "interactions"):
        raise StageError("sweep", f"unknown sweep axis {axis!r}")
    run = Run(cfg)
    if not run.path("features.tsv").exists():
        for stage in STAGES[:5]:
            run_stage(cfg, stage)
        run = Run(cfg)
    samples = read_features(run.consume("sweep", "features.tsv"))
    X, y = to_arrays(samples)
    rows = []
    if axis == "train_fraction":
        for v in values:
            if not 0.0 < v < 1.0:
                log.warning("skipping train_fraction %s outside (0, 1)", v)
                rows.append(_sweep_row(axis, v, run, v, None, "invalid value"))
                continue
            tr, te = _split(run, len(X), v)
            try:
                model = None if cfg.mode == "weighted" else fit(cfg, X[tr], y[tr])[0]
            except ValueError as exc:
                rows.append(_sweep_row(axis, v, run, v, None, str(exc)))
                continue
            report = report_from_labels(y[te], _predict(run, "sweep", X[te], model))
            rows.append(_sweep_row(axis, v, run, v, report))
    else:
        tr, te = _split(run, len(X), cfg.train_fraction)
        model = None if cfg.mode == "weighted" else fit(cfg, X[tr], y[tr])[0]
        activity = pair_activity(run, samples)
        pred = _predict(run, "sweep", X[te], model)
        prev_q, prev_edge = 0.0, -np.inf
        for v in values:
            if not prev_q < v <= 1.0:
                log.warning("skipping interaction quantile %s (must increase within (0, 1])", v)
                rows.append(_sweep_row(axis, v, run, cfg.train_fraction, None, "invalid value"))
                continue
            edge = float(np.quantile(activity, v))
            mask = (activity[te] > prev_edge) & (activity[te] <= edge)
            prev_q, prev_edge = v, edge
            if not mask.any():
                rows.append(_sweep_row(axis, v, run, cfg.train_fraction, None, "empty bucket"))
                continue
            report = report_from_labels(y[te][mask], pred[mask])
            rows.append(_sweep_row(axis, v, run, cfg.train_fraction, report, f"activity<={edge:g}"))
    write_metrics(run.path("sweep.csv"), rows, SWEEP_HEADER)
    run.record("sweep.csv")
    return rows
