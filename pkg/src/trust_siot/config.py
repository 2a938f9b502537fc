"""Experiment configuration: ``key = value`` files with dotted keys.

Precedence, lowest first: built-in defaults, config file, ``TRUSTSIOT_*``
environment variables, explicit overrides. The environment name of a key is
the key upper-cased with dots replaced by underscores
(``kge.dim`` -> ``TRUSTSIOT_KGE_DIM``).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

from .direct_trust import DecayParams
from .graph import InteractionLog
from .ingest import read_keyvalue
from .kge import TrainConfig

ENV_PREFIX = "TRUSTSIOT_"


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _opt(parse):
    def inner(text: str):
        return None if text.strip().lower() in ("", "none", "auto") else parse(text)
    return inner


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _key(name: str, parse, default, **kw):
    return field(default=default, metadata={"key": name, "parse": parse}, **kw)


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: str | None = _key("manifest", _opt(str), None)
    output: str = _key("output", str, "runs/default")
    seed: int = _key("seed", int, 0)

    positive_threshold: float = _key("positive_threshold", float, 0.5)
    label_low: float = _key("label.low", float, 1 / 3)
    label_high: float = _key("label.high", float, 2 / 3)

    lam: float = _key("lambda", float, 1.0)
    t0: float | None = _key("t0", _opt(float), None)
    horizon: float | None = _key("horizon", _opt(float), None)
    now: float | None = _key("now", _opt(float), None)
    dtm_smoothed: bool = _key("dtm.smoothed", _bool, True)

    epsilon: float = _key("epsilon", float, 1e-6)
    max_iter: int = _key("max_iter", int, 200)

    th: float = _key("th", float, 0.5)
    max_k: int | None = _key("max_k", _opt(int), None)

    kge_dim: int = _key("kge.dim", int, 32)
    kge_epochs: int = _key("kge.epochs", int, 100)
    kge_lr: float = _key("kge.lr", float, 1e-3)
    kge_neg: int = _key("kge.neg", int, 2)
    kge_batch: int = _key("kge.batch", int, 256)

    mode: str = _key("mode", str, "ann")
    mlp_hidden: int = _key("mlp.hidden", int, 16)
    mlp_grid: tuple[int, ...] = _key("mlp.grid", _ints, (8, 16, 32))
    mlp_l2: float = _key("mlp.l2", float, 1e-4)
    mlp_max_epochs: int = _key("mlp.max_epochs", int, 500)
    mlp_cost_threshold: float = _key("mlp.cost_threshold", float, 1e-3)
    mlp_lr: float = _key("mlp.lr", float, 1e-3)
    baseline_weights: tuple[float, ...] = _key("baseline.weights", _floats, (0.2, 0.2, 0.2, 0.2, 0.2))

    train_fraction: float = _key("train_fraction", float, 0.8)
    k_folds: int = _key("k_folds", int, 5)

    sweep_axis: str = _key("sweep.axis", str, "train_fraction")
    sweep_values: tuple[float, ...] = _key("sweep.values", _floats, (0.8, 0.6, 0.4))

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.mode not in ("ann", "weighted"):
            raise ValueError(f"mode must be ann or weighted, got {self.mode!r}")
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")
        if not self.label_low <= self.label_high:
            raise ValueError("label.low must not exceed label.high")

    # -- construction --------------------------------------------------------

    @classmethod
    def keys(cls) -> dict[str, str]:
        """Dotted config key -> attribute name."""
        return {f.metadata["key"]: f.name for f in fields(cls)}

    def with_values(self, values: Mapping[str, str]) -> "ExperimentConfig":
        by_key = {f.metadata["key"]: f for f in fields(self)}
        changes = {}
        for k, text in values.items():
            if k not in by_key:
                raise KeyError(f"unknown config key {k!r}")
            f = by_key[k]
            try:
                changes[f.name] = f.metadata["parse"](text)
            except ValueError as exc:
                raise ValueError(f"bad value for {k}: {exc}") from None
        return replace(self, **changes)

    @classmethod
    def load(cls, path=None, overrides: Mapping[str, str] | None = None,
             environ: Mapping[str, str] | None = None) -> "ExperimentConfig":
        cfg = cls()
        if path is not None:
            values = read_keyvalue(path)
            if _opt(str)(values.get("manifest", "")) is not None:
                mpath = Path(values["manifest"])
                if not mpath.is_absolute():
                    values["manifest"] = str(Path(path).parent / mpath)
            cfg = cfg.with_values(values)
        environ = os.environ if environ is None else environ
        env_values = {}
        for key in cls.keys():
            name = ENV_PREFIX + key.upper().replace(".", "_")
            if name in environ:
                env_values[key] = environ[name]
        cfg = cfg.with_values(env_values)
        return cfg.with_values(overrides or {})

    def as_text(self) -> str:
        """Canonical ``key = value`` rendering, one key per line in declaration order."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            elif v is None:
                v = "none"
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{f.metadata['key']} = {v}")
        return "\n".join(lines) + "\n"

    # -- derived stage configs -----------------------------------------------

    def decay(self, log: InteractionLog) -> DecayParams:
        return DecayParams.for_log(log, self.lam, self.t0, self.horizon)

    def kge(self) -> TrainConfig:
        return TrainConfig(self.kge_dim, self.kge_epochs, self.kge_batch, self.kge_lr, self.kge_neg, self.seed)

    def mlp_kwargs(self) -> dict:
        return {"l2": self.mlp_l2, "max_epochs": self.mlp_max_epochs,
                "cost_threshold": self.mlp_cost_threshold, "learning_rate": self.mlp_lr}
