"""Five-metric trust evaluation for social IoT objects."""

from .credibility import CredibilityScores, solve_credibility
from .direct_trust import DecayParams, compute_all_dtm, dtm, trust_factor
from .graph import InteractionRecord, Relation, RelationKG, RelationTriple, TrustGraph, build_graph, neighbors
from .ingest import TrustLabel
from .kge import EmbeddingTable, TrainConfig, cdor, train_kge
from .recommendation import rtm_global, rtm_local, select_credible

__version__ = "0.1.0"
