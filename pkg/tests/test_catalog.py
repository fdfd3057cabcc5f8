import math

import pytest

from fairrerank.catalog import ItemCatalog, build_catalog, novelty, popularity
from fairrerank.dataio import Interaction, InteractionSet


def train_from_counts(counts: dict[str, int], n_users: int | None = None) -> InteractionSet:
    n_users = n_users or max(counts.values())
    rows = [Interaction(f"u{u:03d}", item) for item, c in counts.items() for u in range(c)]
    rows += [Interaction(f"u{u:03d}", "filler") for u in range(n_users)] if n_users > max(counts.values()) else []
    return InteractionSet.from_interactions(rows)


@pytest.mark.parametrize("count, users, expected", [(250, 1000, 0.25), (7, 7, 1.0), (1, 1024, 1 / 1024)])
def test_popularity(count, users, expected):
    assert popularity(count, users) == expected


@pytest.mark.parametrize("p, bits", [(0.25, 2.0), (1.0, 0.0), (1 / 1024, 10.0)])
def test_novelty(p, bits):
    assert novelty(p) == bits


def test_novelty_domain():
    with pytest.raises(ValueError):
        novelty(0.0)


def test_ten_items_two_in_head():
    cat = build_catalog(train_from_counts({f"i{j}": 10 - j for j in range(10)}))
    assert cat.items_in("A") == ["i0", "i1"]


def test_fifteen_items_ceiling_not_inflated():
    # 0.2 * 15 is 3.0000000000000004 in floating point
    cat = build_catalog(train_from_counts({f"i{j:02d}": 20 - j for j in range(15)}))
    assert len(cat.items_in("A")) == 3


def test_tie_break_by_identifier():
    cat = build_catalog(train_from_counts({"zeta": 5, "alpha": 5, "m": 1, "n": 1, "o": 1, "p": 1, "q": 1, "r": 1, "s": 1, "t": 1}))
    assert cat.items_in("A") == ["alpha", "zeta"]
    cat = build_catalog(train_from_counts({"b": 5, "a": 5, "c": 1, "d": 1, "e": 1, "f": 1, "g": 1, "h": 1, "i": 1}), 0.1)
    assert cat.items_in("A") == ["a"]


def test_counts_example():
    cat = build_catalog(train_from_counts({"p": 9, "q": 5, "r": 5, "s": 1, "t": 1}))
    assert cat.items_in("A") == ["p"]
    assert cat["q"].group == "B"


def test_fields_and_invariants():
    counts = {f"i{j}": c for j, c in enumerate([16, 8, 4, 2, 1, 1, 3])}
    cat = build_catalog(train_from_counts(counts, n_users=16))
    assert cat.n_users_train == 16
    for info in cat:
        if info.item == "filler":
            continue
        assert info.train_count == counts[info.item]
        assert info.popularity == counts[info.item] / 16
        assert info.novelty == pytest.approx(-math.log2(info.popularity))
        assert info.novelty_norm == pytest.approx(info.novelty / 4)
        assert 0 <= info.novelty_norm <= 1
    assert cat["i0"].novelty_norm == 0.0
    nov = [info.novelty for info in cat]
    assert nov == sorted(nov)
    head = [i.train_count for i in cat if i.group == "A"]
    tail = [i.train_count for i in cat if i.group == "B"]
    assert min(head) >= max(tail)
    assert len(head) == math.ceil(0.2 * len(cat))


def test_tsv_roundtrip(tmp_path):
    cat = build_catalog(train_from_counts({"a": 3, "b": 2, "c": 1}, n_users=7), 0.3)
    cat.write_tsv(tmp_path / "c.tsv")
    back = ItemCatalog.read_tsv(tmp_path / "c.tsv")
    assert list(back) == list(cat)
    assert (back.head_fraction, back.n_users_train) == (0.3, 7)


def test_header_columns(tmp_path):
    cat = build_catalog(train_from_counts({"a": 3, "b": 2}), 0.5)
    cat.write_tsv(tmp_path / "c.tsv")
    lines = (tmp_path / "c.tsv").read_text().splitlines()
    assert lines[1].split("\t") == ["item", "train_count", "popularity", "novelty", "novelty_norm", "group"]
