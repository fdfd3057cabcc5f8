"""Base rankers and the candidate-list file format.

Candidate files are headerless TSV, ``user<TAB>item<TAB>score<TAB>rank`` with
1-based ranks and ``repr``-precision scores, so export and import round-trip
exactly. External rankers integrate by writing this format.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataio import InteractionSet
from .errors import DataError, TrainingError, ValidationError

_log = logging.getLogger(__name__)


@dataclass
class CandidateList:
    user: str
    entries: list[tuple[str, float]]
    requested_n: int | None = field(default=None, compare=False)

    def __post_init__(self):
        self.entries = sorted(((i, float(s)) for i, s in self.entries), key=lambda e: (-e[1], e[0]))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def items(self) -> list[str]:
        return [i for i, _ in self.entries]

    @property
    def scores(self) -> list[float]:
        return [s for _, s in self.entries]

    @property
    def is_short(self) -> bool:
        return self.requested_n is not None and len(self.entries) < self.requested_n

    def top(self, k: int) -> list[str]:
        return self.items[:k]


def _item_order(items: Sequence[str]) -> np.ndarray:
    """Rank of each item id in ascending identifier order, for tie-breaks."""
    rank = np.empty(len(items), dtype=np.int64)
    rank[np.argsort(np.asarray(items, dtype=object), kind="stable")] = np.arange(len(items))
    return rank


def _top_unseen(
    user: str, scores: np.ndarray, seen: np.ndarray, id_rank: np.ndarray, items: Sequence[str], n: int
) -> CandidateList:
    cand = np.flatnonzero(~seen)
    order = cand[np.lexsort((id_rank[cand], -scores[cand]))][:n]
    return CandidateList(user, [(items[j], float(scores[j])) for j in order], requested_n=n)


def _seen_mask(train: InteractionSet) -> np.ndarray:
    mask = np.zeros((train.n_users, train.n_items), dtype=bool)
    for it in train:
        mask[train.user_index[it.user], train.item_index[it.item]] = True
    return mask


def _report_short(lists: list[CandidateList]) -> None:
    short = sum(c.is_short for c in lists)
    if short:
        _log.warning("%d of %d users received fewer candidates than requested", short, len(lists))


def mostpop_candidates(train: InteractionSet, n: int) -> list[CandidateList]:
    """Top-``n`` unseen items per user by training count, scored ``count / max_count``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    items = list(train.item_index)
    counts = train.item_counts()
    raw = np.array([counts[i] for i in items], dtype=np.float64)
    scores = raw / raw.max()
    seen = _seen_mask(train)
    id_rank = _item_order(items)
    lists = [_top_unseen(u, scores, seen[ui], id_rank, items, n) for u, ui in train.user_index.items()]
    _report_short(lists)
    return lists


@dataclass
class MFHyper:
    dim: int = 32
    lr: float = 0.05
    epochs: int = 20
    n_neg: int = 1
    reg: float = 0.01
    seed: int = 0


@dataclass
class MFModel:
    user_factors: np.ndarray
    item_factors: np.ndarray
    hyper: MFHyper
    users: list[str] = field(default_factory=list)
    items: list[str] = field(default_factory=list)

    def score(self, user: str, item: str) -> float:
        u = self.users.index(user)
        i = self.items.index(item)
        return float(self.user_factors[u] @ self.item_factors[i])

    def score_matrix(self) -> np.ndarray:
        return self.user_factors @ self.item_factors.T


def _init_factors(n_users: int, n_items: int, hyper: MFHyper) -> tuple[np.ndarray, np.ndarray, np.random.Generator]:
    rng = np.random.default_rng(hyper.seed)
    P = rng.uniform(-0.05, 0.05, size=(n_users, hyper.dim))
    Q = rng.uniform(-0.05, 0.05, size=(n_items, hyper.dim))
    return P, Q, rng


def mf_train(train: InteractionSet, hyper: MFHyper | None = None) -> MFModel:
    """Matrix factorization fit by stochastic pairwise (BPR) updates.

    Each epoch visits the positives in a seeded random order and pairs each one
    with ``n_neg`` negatives drawn uniformly from the user's unseen items. The
    updates are sequential so a given seed always yields the same factors.
    """
    hyper = hyper or MFHyper()
    if train.is_empty:
        raise DataError("cannot train on an empty interaction set")
    if hyper.dim < 1 or hyper.epochs < 1 or hyper.n_neg < 1:
        raise ValueError("dim, epochs and n_neg must all be >= 1")

    n_users, n_items = train.n_users, train.n_items
    P, Q, rng = _init_factors(n_users, n_items, hyper)
    us = np.array([train.user_index[it.user] for it in train], dtype=np.int64)
    its = np.array([train.item_index[it.item] for it in train], dtype=np.int64)
    seen = _seen_mask(train)
    full = seen.all(axis=1)
    lr, reg = hyper.lr, hyper.reg

    # overflow surfaces through the finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, hyper.epochs + 1):
            for idx in rng.permutation(len(us)):
                u, i = us[idx], its[idx]
                if full[u]:
                    continue
                for _ in range(hyper.n_neg):
                    j = rng.integers(n_items)
                    while seen[u, j]:
                        j = rng.integers(n_items)
                    pu = P[u].copy()
                    diff = Q[i] - Q[j]
                    x = pu @ diff
                    # d/dx log sigmoid(x) = sigmoid(-x)
                    g = 1.0 / (1.0 + math.exp(min(x, 700.0)))
                    P[u] += lr * (g * diff - reg * pu)
                    Q[i] += lr * (g * pu - reg * Q[i])
                    Q[j] += lr * (-g * pu - reg * Q[j])
            if not (np.isfinite(P).all() and np.isfinite(Q).all()):
                raise TrainingError(f"factors diverged in epoch {epoch}", epoch=epoch)

    return MFModel(P, Q, hyper, list(train.user_index), list(train.item_index))


def pairwise_loss(model: MFModel, probes: Iterable[tuple[int, int, int]]) -> float:
    """Mean ``-log sigmoid(s_ui - s_uj)`` over ``(u, i, j)`` index triples."""
    losses = []
    for u, i, j in probes:
        x = model.user_factors[u] @ (model.item_factors[i] - model.item_factors[j])
        losses.append(math.log1p(math.exp(-x)) if x > -30 else -x)
    return float(np.mean(losses))


def mf_candidates(model: MFModel, train: InteractionSet, n: int) -> list[CandidateList]:
    if n < 1:
        raise ValueError("n must be >= 1")
    if model.users != list(train.user_index) or model.items != list(train.item_index):
        raise ValidationError("model was trained on a different user/item index space")
    scores = model.score_matrix()
    seen = _seen_mask(train)
    id_rank = _item_order(model.items)
    lists = [
        _top_unseen(u, scores[ui], seen[ui], id_rank, model.items, n)
        for u, ui in train.user_index.items()
    ]
    _report_short(lists)
    return lists


def write_candidates(lists: Iterable[CandidateList], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for cl in lists:
            for rank, (item, score) in enumerate(cl.entries, 1):
                fh.write(f"{cl.user}\t{item}\t{score!r}\t{rank}\n")


def load_candidates(path: str | os.PathLike, catalog=None, train: InteractionSet | None = None) -> list[CandidateList]:
    """Parse a candidate file, re-sort each list and validate it.

    With ``catalog`` every item must be catalogued; with ``train`` no list may
    contain one of its user's training items. Users keep first-seen order.
    """
    by_user: dict[str, list[tuple[str, float]]] = {}
    pairs: set[tuple[str, str]] = set()
    dups = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            cols = line.split()
            if not cols:
                continue
            if lineno == 1 and cols[:3] == ["user", "item", "score"]:
                continue
            if len(cols) < 3:
                raise DataError(f"{path}:{lineno}: expected user, item, score[, rank]")
            user, item = cols[0], cols[1]
            try:
                score = float(cols[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: score {cols[2]!r} is not a number") from None
            if not math.isfinite(score):
                raise DataError(f"{path}:{lineno}: score is not finite")
            if (user, item) in pairs:
                dups.append(f"{user}/{item}")
                continue
            pairs.add((user, item))
            by_user.setdefault(user, []).append((item, score))
    if dups:
        raise ValidationError(f"duplicate (user, item) rows: {', '.join(dups[:10])}")

    if catalog is not None:
        unknown = catalog.missing(i for _, i in pairs)
        if unknown:
            raise ValidationError(f"{len(unknown)} unknown item(s): {', '.join(unknown[:10])}")
    if train is not None:
        leaked = sorted(pairs & train.pairs())
        if leaked:
            shown = ", ".join(f"{u}/{i}" for u, i in leaked[:10])
            raise ValidationError(f"candidates include training interactions: {shown}")
    return [CandidateList(u, e) for u, e in by_user.items()]
