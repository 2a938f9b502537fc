"""Direct trust from decayed positive/negative interaction counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import InteractionLog, TrustGraph


@dataclass(frozen=True)
class DecayParams:
    """Power-law decay of past interactions.

    Interactions at ``time <= t0`` are "past" and are scaled by the trust
    factor; later ones count in full. ``horizon`` maps an elapsed span onto
    [0, 1] before exponentiation.

    A larger trust factor keeps *more* of the past bucket; recent-only trust
    corresponds to a factor of 0 (elapsed >= horizon).
    """

    lam: float = 1.0
    t0: float = 0.0
    horizon: float = 1.0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be > 0")
        if self.horizon <= 0:
            raise ValueError("horizon must be > 0")

    @classmethod
    def for_log(cls, log: InteractionLog, lam: float = 1.0, t0: float | None = None,
                horizon: float | None = None) -> "DecayParams":
        """Defaults from the data: horizon is the full time span, t0 its midpoint."""
        if len(log):
            lo, hi = float(log.time.min()), float(log.time.max())
        else:
            lo = hi = 0.0
        span = hi - lo
        return cls(lam, lo + span / 2 if t0 is None else t0, (span or 1.0) if horizon is None else horizon)


@dataclass(frozen=True)
class PairCounters:
    p_current: float = 0
    n_current: float = 0
    p_past: float = 0
    n_past: float = 0


def trust_factor(elapsed, params: DecayParams):
    """``1 - (elapsed / horizon) ** lambda`` clamped to [0, 1]. Vectorises over ``elapsed``."""
    x = np.clip(np.asarray(elapsed, dtype=float) / params.horizon, 0.0, 1.0)
    phi = np.clip(1.0 - x ** params.lam, 0.0, 1.0)
    return float(phi) if phi.ndim == 0 else phi


def effective_counts(c: PairCounters, phi: float) -> tuple[float, float]:
    return phi * c.p_past + c.p_current, phi * c.n_past + c.n_current


def dtm(p_eff, n_eff):
    """Laplace-smoothed direct trust ``(p + 1) / (p + n + 2)``."""
    return (np.asarray(p_eff, dtype=float) + 1.0) / (np.asarray(p_eff, dtype=float) + n_eff + 2.0)


def dtm_ratio(p_eff, n_eff):
    """Unsmoothed ``p / (p + n)``, 0.5 when the pair has no evidence."""
    p = np.asarray(p_eff, dtype=float)
    total = p + n_eff
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, p / np.where(total > 0, total, 1.0), 0.5)


def pair_counters(g: TrustGraph, log: InteractionLog, t0: float) -> tuple[np.ndarray, ...]:
    """Per-edge ``(p_current, n_current, p_past, n_past)`` arrays aligned with ``g``'s edges."""
    m = g.n_edges
    edge = np.fromiter(
        (g.edge_id(a, b) for a, b in zip(log.trustor.tolist(), log.trustee.tolist())),
        dtype=np.int64, count=len(log),
    )
    past = log.time <= t0
    out = []
    for bucket in (~past, past):
        for outcome in (log.positive, ~log.positive):
            out.append(np.bincount(edge[bucket & outcome], minlength=m).astype(float))
    return tuple(out)


def compute_all_dtm(g: TrustGraph, log: InteractionLog, params: DecayParams,
                    now: float | None = None, smoothed: bool = True) -> TrustGraph:
    """Return ``g`` with every edge weight recomputed from the decayed counts.

    ``now`` defaults to the latest timestamp in the log.
    """
    if now is None:
        now = float(log.time.max()) if len(log) else 0.0
    phi = trust_factor(max(0.0, now - params.t0), params)
    p_cur, n_cur, p_past, n_past = pair_counters(g, log, params.t0)
    p_eff = phi * p_past + p_cur
    n_eff = phi * n_past + n_cur
    weights = dtm(p_eff, n_eff) if smoothed else dtm_ratio(p_eff, n_eff)
    return g.with_weights(weights)
