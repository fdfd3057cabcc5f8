"""Exact per-user fairness-aware re-ranking.

For one user we pick ``K`` of the ``N`` candidates maximising

    sum_i  s_i * max(nov_i, eps) ** gamma  -  lambda * |n_A - K * p_A|

where ``s_i`` is the min-max normalised base score and ``n_A`` counts the
selected short-head items. Items carry unit weight, so for a fixed ``n_A`` the
best set is the top-``n_A`` head items plus the top-``K - n_A`` tail items by
gain. Scanning every feasible ``n_A`` therefore solves the problem exactly in
``O(N log N + K^2)``.

Gain sums go through :func:`math.fsum`, which is order-independent, so the
solver and the brute-force oracle compare objectives exactly and resolve ties
the same way.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .baselines import CandidateList
from .catalog import HEAD, ItemCatalog
from .errors import BatchError, DataError, OracleTooLargeError, ShortListError, ValidationError

SCORE_FLOOR = 1e-6
NOVELTY_FLOOR = 1e-6
ORACLE_LIMIT = 2_000_000

PRESETS = {"tPFR": 0.0, "LaPFR": 0.1, "MaPFR": 0.33, "HaPFR": 1.0}
TARGETS = {"eq": (0.5, 0.5), "prop": (0.2, 0.8)}


@dataclass(frozen=True)
class RerankConfig:
    k: int = 10
    lam: float = 0.1
    gamma: float = 0.0
    target: tuple[float, float] = TARGETS["eq"]
    preset: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("K must be >= 1")
        if self.lam < 0 or self.gamma < 0:
            raise ValueError("lambda and gamma must be non-negative")
        p_a, p_b = self.target
        if not (0 <= p_a <= 1 and 0 <= p_b <= 1) or abs(p_a + p_b - 1) > 1e-9:
            raise ValueError(f"target {self.target} is not a distribution over two groups")
        if self.preset is not None:
            if self.preset not in PRESETS:
                raise ValueError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
            if self.gamma != PRESETS[self.preset]:
                raise ValueError(f"preset {self.preset} requires gamma={PRESETS[self.preset]}")

    @classmethod
    def from_preset(cls, preset: str, **kw) -> "RerankConfig":
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        return cls(gamma=PRESETS[preset], preset=preset, **kw)

    @property
    def p_a(self) -> float:
        return self.target[0]

    @property
    def label(self) -> str:
        return self.preset or f"l{self.lam:g}_g{self.gamma:g}"


@dataclass
class RerankResult:
    user: str
    selected: list[str]
    gains: list[float]
    objective_value: float
    n_a: int
    n_b: int
    gain_sum: float
    deviation: float
    config: RerankConfig = field(repr=False, compare=False, default=None)


def normalize_scores(cl: CandidateList) -> CandidateList:
    """Min-max map scores onto ``[SCORE_FLOOR, 1]``; a constant list maps to all ones."""
    if not cl.entries:
        raise DataError(f"user {cl.user}: empty candidate list")
    scores = np.array(cl.scores)
    if not np.isfinite(scores).all():
        raise DataError(f"user {cl.user}: non-finite score")
    lo, hi = scores.min(), scores.max()
    if hi == lo:
        mapped = np.ones_like(scores)
    else:
        mapped = SCORE_FLOOR + (1 - SCORE_FLOOR) * (scores - lo) / (hi - lo)
    return CandidateList(cl.user, list(zip(cl.items, mapped.tolist())), cl.requested_n)


def gain(s: float, nov: float, gamma: float) -> float:
    return s * max(nov, NOVELTY_FLOOR) ** gamma


def deviation(n_a: int, k: int, p_a: float) -> float:
    return abs(n_a - k * p_a)


def _objective(gains: Sequence[float], n_a: int, cfg: RerankConfig) -> tuple[float, float, float]:
    total = math.fsum(gains)
    dev = deviation(n_a, cfg.k, cfg.p_a)
    return total - cfg.lam * dev, total, dev


def _prepare(cl: CandidateList, catalog: ItemCatalog, cfg: RerankConfig):
    if len(cl) < cfg.k:
        raise ShortListError(f"user {cl.user}: {len(cl)} candidates < K={cfg.k}")
    unknown = catalog.missing(cl.items)
    if unknown:
        raise ValidationError(f"user {cl.user}: items not in catalog: {', '.join(unknown[:10])}")
    norm = normalize_scores(cl)
    return [(item, gain(s, catalog[item].novelty, cfg.gamma), catalog[item].group == HEAD) for item, s in norm.entries]


def _result(user: str, chosen, n_a: int, cfg: RerankConfig) -> RerankResult:
    chosen = sorted(chosen, key=lambda e: (-e[1], e[0]))
    gains = [g for _, g, *_ in chosen]
    obj, total, dev = _objective(gains, n_a, cfg)
    return RerankResult(user, [i for i, *_ in chosen], gains, obj, n_a, cfg.k - n_a, total, dev, cfg)


def rerank_user(cl: CandidateList, catalog: ItemCatalog, cfg: RerankConfig) -> RerankResult:
    """Globally optimal ``K``-subset of one user's candidates.

    Ties in the objective prefer smaller deviation, then larger gain sum, then
    fewer head items; within a group, equal gains fall back to ascending item
    id. The result lists items by descending gain.
    """
    scored = _prepare(cl, catalog, cfg)
    key = lambda e: (-e[1], e[0])
    head = sorted((e for e in scored if e[2]), key=key)
    tail = sorted((e for e in scored if not e[2]), key=key)
    k = cfg.k

    best = None
    for k_a in range(max(0, k - len(tail)), min(k, len(head)) + 1):
        gains = [g for _, g, _ in head[:k_a]] + [g for _, g, _ in tail[: k - k_a]]
        obj, total, dev = _objective(gains, k_a, cfg)
        rank = (-obj, dev, -total, k_a)
        if best is None or rank < best[0]:
            best = (rank, k_a)
    k_a = best[1]
    return _result(cl.user, head[:k_a] + tail[: k - k_a], k_a, cfg)


def brute_force_rerank(cl: CandidateList, catalog: ItemCatalog, cfg: RerankConfig) -> RerankResult:
    """Enumerate every ``K``-subset; a verification oracle for :func:`rerank_user`.

    A vectorised pass screens subsets whose float objective is within 1e-9 of
    the maximum, and those are re-scored exactly and ranked with the same
    tie-break as the solver (including the per-group id order).
    """
    n, k = len(cl), cfg.k
    if n >= k and math.comb(n, k) > ORACLE_LIMIT:
        raise OracleTooLargeError(f"C({n}, {k}) = {math.comb(n, k)} subsets exceeds {ORACLE_LIMIT}")
    scored = _prepare(cl, catalog, cfg)

    combos = np.array(list(combinations(range(n), k)), dtype=np.int64).reshape(-1, k)
    g = np.array([e[1] for e in scored])
    is_head = np.array([e[2] for e in scored])
    n_a = is_head[combos].sum(axis=1)
    approx = g[combos].sum(axis=1) - cfg.lam * np.abs(n_a - k * cfg.p_a)
    shortlist = np.flatnonzero(approx >= approx.max() - 1e-9)

    def rank(row):
        members = [scored[j] for j in row]
        na = sum(e[2] for e in members)
        obj, total, dev = _objective([e[1] for e in members], na, cfg)
        heads = sorted(((-e[1], e[0]) for e in members if e[2]))
        tails = sorted(((-e[1], e[0]) for e in members if not e[2]))
        return (-obj, dev, -total, na, heads, tails)

    best_row = min((combos[r] for r in shortlist), key=rank)
    chosen = [scored[j] for j in best_row]
    return _result(cl.user, chosen, sum(e[2] for e in chosen), cfg)


def rerank_all(
    lists: Sequence[CandidateList], catalog: ItemCatalog, cfg: RerankConfig, workers: int = 1
) -> list[RerankResult]:
    """Re-rank every list independently; output follows input order.

    Per-user failures are collected and raised together as :class:`BatchError`.
    """

    def one(cl):
        try:
            return rerank_user(cl, catalog, cfg)
        except (DataError, ValueError) as e:
            return e

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(one, lists))
    else:
        out = [one(cl) for cl in lists]

    failures = {cl.user: r for cl, r in zip(lists, out) if isinstance(r, Exception)}
    if failures:
        raise BatchError(failures)
    return out
