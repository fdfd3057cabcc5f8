"""Seeded popularity-skewed corpora and a noisy popularity ranker for experiments."""

from __future__ import annotations

import numpy as np

from .baselines import CandidateList, _item_order, _seen_mask, _top_unseen
from .dataio import Interaction, InteractionSet


def zipf_corpus(
    n_users: int = 2000,
    n_items: int = 1500,
    exponent: float = 1.0,
    min_len: int = 20,
    max_len: int = 60,
    seed: int = 0,
) -> InteractionSet:
    """Implicit log where item ``r`` (1-based) is drawn with weight ``r ** -exponent``.

    Each user gets a uniform random history length in ``[min_len, max_len]``,
    sampled without replacement. Ids are zero-padded so string order is
    numeric order.
    """
    rng = np.random.default_rng(seed)
    w = np.arange(1, n_items + 1, dtype=np.float64) ** -exponent
    p = w / w.sum()
    iw = len(str(n_items - 1))
    uw = len(str(n_users - 1))
    rows = []
    for u in range(n_users):
        size = int(rng.integers(min_len, max_len + 1))
        for j in rng.choice(n_items, size=size, replace=False, p=p):
            rows.append(Interaction(f"u{u:0{uw}d}", f"i{j:0{iw}d}", 1.0))
    return InteractionSet.from_interactions(rows)


def noisy_popularity_candidates(
    train: InteractionSet, n: int, noise: float = 0.1, seed: int = 0
) -> list[CandidateList]:
    """MostPop with per-user Gaussian jitter: ``count / max_count + noise * N(0, 1)``."""
    rng = np.random.default_rng(seed)
    items = list(train.item_index)
    counts = train.item_counts()
    pop = np.array([counts[i] for i in items], dtype=np.float64)
    pop /= pop.max()
    seen = _seen_mask(train)
    id_rank = _item_order(items)
    out = []
    for u, ui in train.user_index.items():
        scores = pop + noise * rng.standard_normal(len(items))
        out.append(_top_unseen(u, scores, seen[ui], id_rank, items, n))
    return out
