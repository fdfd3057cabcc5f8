"""Item popularity, novelty and the short-head / long-tail partition."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Iterator

from .dataio import InteractionSet
from .errors import DataError, EmptyInputError, ValidationError

HEAD = "A"
TAIL = "B"
# 0.2 * 15 == 3.0000000000000004 must still give 3 head items
_CEIL_EPS = 1e-9


def popularity(train_count: int, n_users_train: int) -> float:
    """Fraction of training users who interacted with the item, capped at 1."""
    if train_count < 1 or n_users_train < 1:
        raise ValueError("popularity needs train_count >= 1 and n_users_train >= 1")
    return min(train_count / n_users_train, 1.0)


def novelty(p: float) -> float:
    """Self-information of an item in bits, ``-log2(p)``."""
    if not p > 0 or p > 1:
        raise ValueError(f"popularity must lie in (0, 1], got {p}")
    return 0.0 - math.log2(p)


def head_size(n_items: int, head_fraction: float) -> int:
    return math.ceil(head_fraction * n_items - _CEIL_EPS)


@dataclass(frozen=True)
class ItemInfo:
    item: str
    train_count: int
    popularity: float
    novelty: float
    novelty_norm: float
    group: str


class ItemCatalog:
    """Immutable per-item lookup built from a training split.

    Items are kept in popularity order (count descending, identifier
    ascending); the first ``ceil(head_fraction * n)`` form group ``A``.
    """

    def __init__(self, items: list[ItemInfo], head_fraction: float, n_users_train: int):
        self._items = {info.item: info for info in items}
        self._order = [info.item for info in items]
        self.head_fraction = head_fraction
        self.n_users_train = n_users_train

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item: object) -> bool:
        return item in self._items

    def __getitem__(self, item: str) -> ItemInfo:
        try:
            return self._items[item]
        except KeyError:
            raise ValidationError(f"item {item!r} is not in the catalog") from None

    def __iter__(self) -> Iterator[ItemInfo]:
        return (self._items[i] for i in self._order)

    def group(self, item: str) -> str:
        return self[item].group

    def items_in(self, group: str) -> list[str]:
        return [i for i in self._order if self._items[i].group == group]

    def missing(self, items) -> list[str]:
        return sorted({i for i in items if i not in self._items})

    def write_tsv(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# head_fraction={self.head_fraction!r}\tn_users_train={self.n_users_train}\n")
            fh.write("item\ttrain_count\tpopularity\tnovelty\tnovelty_norm\tgroup\n")
            for it in self:
                fh.write(
                    f"{it.item}\t{it.train_count}\t{it.popularity!r}\t{it.novelty!r}\t"
                    f"{it.novelty_norm!r}\t{it.group}\n"
                )

    @classmethod
    def read_tsv(cls, path: str | os.PathLike) -> "ItemCatalog":
        with open(path, encoding="utf-8", newline="") as fh:
            meta = fh.readline().lstrip("# ").strip().split("\t")
            params = dict(kv.split("=", 1) for kv in meta)
            reader = csv.DictReader(fh, delimiter="\t")
            items = [
                ItemInfo(
                    r["item"],
                    int(r["train_count"]),
                    float(r["popularity"]),
                    float(r["novelty"]),
                    float(r["novelty_norm"]),
                    r["group"],
                )
                for r in reader
            ]
        try:
            return cls(items, float(params["head_fraction"]), int(params["n_users_train"]))
        except KeyError as e:
            raise DataError(f"{path}: catalog header lacks {e}") from None


def build_catalog(train: InteractionSet, head_fraction: float = 0.2) -> ItemCatalog:
    if train.is_empty:
        raise EmptyInputError("cannot build a catalog from an empty training set")
    if not 0 < head_fraction < 1:
        raise ValueError("head_fraction must lie strictly between 0 and 1")

    n_users = train.n_users
    counts = train.item_counts()
    order = sorted(counts, key=lambda i: (-counts[i], i))
    n_head = head_size(len(order), head_fraction)
    max_bits = math.log2(n_users) if n_users > 1 else 0.0

    infos = []
    for rank, item in enumerate(order):
        p = popularity(counts[item], n_users)
        nov = novelty(p)
        norm = min(max(nov / max_bits, 0.0), 1.0) if max_bits > 0 else 0.0
        infos.append(ItemInfo(item, counts[item], p, nov, norm, HEAD if rank < n_head else TAIL))
    return ItemCatalog(infos, head_fraction, n_users)
