from __future__ import annotations

import numpy as np
import pytest

from fairrerank.baselines import CandidateList
from fairrerank.catalog import ItemCatalog, ItemInfo


def make_catalog(items: dict[str, tuple[str, float]], n_users: int = 1024) -> ItemCatalog:
    """Catalog from ``item -> (group, novelty_bits)``; novelty_norm is bits / log2(n_users)."""
    infos = []
    for item, (group, bits) in items.items():
        p = 2.0 ** -bits
        infos.append(ItemInfo(item, max(1, round(p * n_users)), p, bits, min(bits / np.log2(n_users), 1.0), group))
    return ItemCatalog(infos, 0.2, n_users)


def random_instance(rng: np.random.Generator, n: int, ties: bool = False):
    """One user's candidates plus a catalog with random groups and novelties."""
    items = [f"c{j:02d}" for j in range(n)]
    if ties:
        scores = rng.integers(0, 4, size=n).astype(float)
        bits = rng.integers(1, 4, size=n).astype(float)
    else:
        scores = rng.normal(size=n)
        bits = rng.uniform(0.0, 10.0, size=n)
    groups = np.where(rng.random(n) < 0.4, "A", "B")
    cat = make_catalog({i: (g, b) for i, g, b in zip(items, groups, bits)})
    return CandidateList("u", list(zip(items, scores.tolist()))), cat


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for status in ("passed", "failed", "skipped"):
        for rep in terminalreporter.stats.get(status, []):
            props = dict(getattr(rep, "user_properties", []))
            if "criterion" in props and (rep.when == "call" or status == "skipped"):
                lines.append((props["criterion"], status.upper(), props.get("detail", "")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for crit, status, detail in sorted(lines):
            terminalreporter.write_line(f"{status:7s} {crit}  {detail}")
