"""Interaction logs: loading, k-core filtering, seeded splits and statistics."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DataError, EmptyInputError

RATIO_TOL = 1e-9
# guards floor() against 0.29 * 100 == 28.999999999999996
_CUT_EPS = 1e-9


class Interaction(NamedTuple):
    user: str
    item: str
    rating: float = 1.0
    timestamp: int | None = None


@dataclass
class InteractionSet:
    """Deduplicated user-item interactions with dense, first-seen indices."""

    interactions: list[Interaction]
    user_index: dict[str, int] = field(default_factory=dict)
    item_index: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_interactions(cls, rows: Iterable[Interaction]) -> "InteractionSet":
        latest: dict[tuple[str, str], Interaction] = {}
        for row in rows:
            key = (row.user, row.item)
            # last occurrence wins, and also takes the later position
            latest.pop(key, None)
            latest[key] = row
        inters = list(latest.values())
        users: dict[str, int] = {}
        items: dict[str, int] = {}
        for it in inters:
            users.setdefault(it.user, len(users))
            items.setdefault(it.item, len(items))
        return cls(inters, users, items)

    def __len__(self) -> int:
        return len(self.interactions)

    def __iter__(self):
        return iter(self.interactions)

    @property
    def n_users(self) -> int:
        return len(self.user_index)

    @property
    def n_items(self) -> int:
        return len(self.item_index)

    @property
    def is_empty(self) -> bool:
        return not self.interactions

    def pairs(self) -> set[tuple[str, str]]:
        return {(it.user, it.item) for it in self.interactions}

    def items_by_user(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = defaultdict(list)
        for it in self.interactions:
            out[it.user].append(it.item)
        return dict(out)

    def item_counts(self) -> Counter:
        return Counter(it.item for it in self.interactions)


@dataclass
class SplitData:
    train: InteractionSet
    valid: InteractionSet
    test: InteractionSet
    seed: int
    ratios: tuple[float, float, float]


@dataclass
class DatasetStats:
    n_users: int
    n_items: int
    n_ratings: int
    ratings_per_user: float
    ratings_per_item: float
    density: float
    item_gini: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _read_rows(path: str, fmt: str) -> list[tuple[int, list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        if fmt == "csv":
            rows = [(n, [c.strip() for c in r]) for n, r in enumerate(csv.reader(fh), 1)]
        elif fmt == "tsv":
            # whitespace split also accepts space-separated dumps
            rows = [(n, line.split()) for n, line in enumerate(fh, 1)]
        else:
            raise DataError(f"unknown format {fmt!r}; expected 'tsv' or 'csv'")
    return [(n, r) for n, r in rows if r and any(r)]


def _looks_like_header(cols: list[str]) -> bool:
    if len(cols) >= 3:
        return not _is_number(cols[2])
    return [c.lower() for c in cols[:2]] in (["user", "item"], ["user_id", "item_id"])


def load_interactions(path: str | os.PathLike, format: str = "tsv", implicit: bool = False) -> InteractionSet:
    """Read a ``user, item[, rating[, timestamp]]`` log.

    A header row is recognised when its third column is not numeric. Duplicate
    ``(user, item)`` pairs keep the last occurrence. With ``implicit`` every
    rating is stored as 1.0.
    """
    rows = _read_rows(os.fspath(path), format)
    if rows and _looks_like_header(rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise EmptyInputError(f"{path}: no interactions")

    parsed = []
    for lineno, cols in rows:
        if len(cols) < 2 or not cols[0] or not cols[1]:
            raise DataError(f"{path}:{lineno}: expected at least user and item columns")
        rating = 1.0
        ts = None
        try:
            if len(cols) >= 3 and not implicit:
                rating = float(cols[2])
            if len(cols) >= 4 and cols[3]:
                ts = int(cols[3])
        except ValueError as e:
            raise DataError(f"{path}:{lineno}: {e}") from None
        if not math.isfinite(rating):
            raise DataError(f"{path}:{lineno}: rating is not finite")
        parsed.append(Interaction(cols[0], cols[1], rating, ts))
    return InteractionSet.from_interactions(parsed)


def kcore_filter(data: InteractionSet, k: int) -> InteractionSet:
    """Return the maximal sub-log where every user and item has >= k interactions.

    All violating users and items are dropped together each round until a
    fixpoint. An empty result is returned as an empty set (check
    ``is_empty``); it is not raised.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    inters = list(data.interactions)
    while True:
        ucount = Counter(it.user for it in inters)
        icount = Counter(it.item for it in inters)
        kept = [it for it in inters if ucount[it.user] >= k and icount[it.item] >= k]
        if len(kept) == len(inters):
            break
        inters = kept
    return InteractionSet.from_interactions(inters)


def _user_stream(seed: int, user: str) -> np.random.Generator:
    digest = hashlib.blake2b(user.encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng([seed, int.from_bytes(digest, "little")])


def split(data: InteractionSet, ratios: Sequence[float] = (0.8, 0.1, 0.1), seed: int = 0) -> SplitData:
    """Per-user random holdout.

    Each user's interactions are shuffled with a generator seeded from
    ``(seed, user)`` and cut at ``floor(r_train * n)`` and
    ``floor((r_train + r_valid) * n)``. Every user keeps at least one
    training interaction. Each output split preserves input order.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > RATIO_TOL:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    r_train, r_valid, _ = ratios

    by_user: dict[str, list[int]] = defaultdict(list)
    for pos, it in enumerate(data.interactions):
        by_user[it.user].append(pos)

    label = np.zeros(len(data), dtype=np.int8)
    for user, positions in by_user.items():
        n = len(positions)
        cut1 = max(1, math.floor(r_train * n + _CUT_EPS))
        cut2 = max(cut1, math.floor((r_train + r_valid) * n + _CUT_EPS))
        order = _user_stream(seed, user).permutation(n)
        for rank, j in enumerate(order):
            label[positions[j]] = 0 if rank < cut1 else (1 if rank < cut2 else 2)

    parts = [[it for it, lab in zip(data.interactions, label) if lab == s] for s in range(3)]
    train, valid, test = (InteractionSet.from_interactions(p) for p in parts)
    return SplitData(train, valid, test, seed, tuple(float(r) for r in ratios))


def gini(counts: Sequence[float]) -> float:
    """Gini coefficient, ``sum_ij |x_i - x_j| / (2 n sum x)``.

    Evaluated in O(n log n) through the sorted-rank identity.
    """
    xs = np.sort(np.asarray(counts, dtype=np.float64))
    if xs.size == 0 or np.any(xs < 0):
        raise ValueError("gini needs a non-empty list of non-negative counts")
    total = xs.sum()
    if total <= 0:
        raise ValueError("gini is undefined when every count is zero")
    n = xs.size
    ranks = 2.0 * np.arange(1, n + 1) - n - 1
    return float(np.dot(ranks, xs) / (n * total))


def dataset_stats(data: InteractionSet) -> DatasetStats:
    if data.is_empty:
        raise EmptyInputError("cannot compute statistics of an empty interaction set")
    nu, ni, nr = data.n_users, data.n_items, len(data)
    counts = list(data.item_counts().values())
    return DatasetStats(
        n_users=nu,
        n_items=ni,
        n_ratings=nr,
        ratings_per_user=nr / nu,
        ratings_per_item=nr / ni,
        density=nr / (nu * ni),
        item_gini=gini(counts),
    )


def _fmt_rating(r: float) -> str:
    return str(int(r)) if float(r).is_integer() else repr(float(r))


def write_interactions(data: InteractionSet, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for it in data.interactions:
            fh.write(f"{it.user}\t{it.item}\t{_fmt_rating(it.rating)}\n")


def write_split(sp: SplitData, directory: str | os.PathLike) -> None:
    os.makedirs(directory, exist_ok=True)
    for name in ("train", "valid", "test"):
        write_interactions(getattr(sp, name), os.path.join(directory, f"{name}.tsv"))


def read_split(directory: str | os.PathLike) -> tuple[InteractionSet, InteractionSet, InteractionSet]:
    out = []
    for name in ("train", "valid", "test"):
        path = os.path.join(directory, f"{name}.tsv")
        try:
            out.append(load_interactions(path, "tsv"))
        except EmptyInputError:
            out.append(InteractionSet([]))
    return tuple(out)
