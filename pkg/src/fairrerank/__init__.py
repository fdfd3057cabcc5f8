"""Exact producer-fairness re-ranking with novelty weighting.

The pipeline runs in five stages: interaction logs (:mod:`~fairrerank.dataio`),
the popularity catalog (:mod:`~fairrerank.catalog`), base candidates
(:mod:`~fairrerank.baselines`), the exact re-ranker
(:mod:`~fairrerank.reranker`) and evaluation (:mod:`~fairrerank.metrics`).
"""

__version__ = "0.1.0"

from .baselines import CandidateList, MFHyper, mf_candidates, mf_train, mostpop_candidates
from .catalog import ItemCatalog, build_catalog, novelty, popularity
from .dataio import InteractionSet, dataset_stats, gini, kcore_filter, load_interactions, split
from .metrics import EvalReport, MetricWeights, all_metric, delta, evaluate_run, gf_metric, harm, ndcg_at_k, sgf
from .reranker import PRESETS, TARGETS, RerankConfig, brute_force_rerank, rerank_all, rerank_user

__all__ = [
    "CandidateList", "MFHyper", "mf_candidates", "mf_train", "mostpop_candidates",
    "ItemCatalog", "build_catalog", "novelty", "popularity",
    "InteractionSet", "dataset_stats", "gini", "kcore_filter", "load_interactions", "split",
    "EvalReport", "MetricWeights", "all_metric", "delta", "evaluate_run", "gf_metric", "harm", "ndcg_at_k", "sgf",
    "PRESETS", "TARGETS", "RerankConfig", "brute_force_rerank", "rerank_all", "rerank_user",
]
