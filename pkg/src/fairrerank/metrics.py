"""Accuracy, group fairness, sub-group cold-item fairness and their summaries."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .catalog import HEAD, ItemCatalog
from .dataio import InteractionSet
from .errors import DataError, UndefinedMetricError
from .reranker import TARGETS

REPORT_COLUMNS = [
    "dataset", "model", "preset", "lambda", "gamma", "K",
    "ndcg", "gf_eq", "gf_prop", "sgf", "sgf_raw_bits", "all", "delta_b", "delta_t", "harm",
]


def _mean(xs: Iterable[float]) -> float:
    xs = list(xs)
    return math.fsum(xs) / len(xs) if xs else float("nan")


def ndcg_at_k(recommended: Sequence[str], test_positives: set[str], k: int) -> float | None:
    """Binary-relevance NDCG@k; ``None`` when the user has no test items."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not test_positives:
        return None
    dcg = math.fsum(1 / math.log2(r + 2) for r, item in enumerate(recommended[:k]) if item in test_positives)
    idcg = math.fsum(1 / math.log2(r + 2) for r in range(min(k, len(test_positives))))
    return dcg / idcg


def mean_ndcg(recs: Mapping[str, Sequence[str]], test: Mapping[str, set[str]], k: int) -> float:
    vals = [ndcg_at_k(items, test.get(u, set()), k) for u, items in recs.items()]
    return _mean(v for v in vals if v is not None)


def _list_length(lists: Mapping[str, Sequence[str]]) -> int:
    lengths = {len(v) for v in lists.values()}
    if len(lengths) > 1:
        raise DataError(f"lists have differing lengths {sorted(lengths)}")
    return lengths.pop() if lengths else 0


def head_counts(lists: Mapping[str, Sequence[str]], catalog: ItemCatalog) -> dict[str, int]:
    return {u: sum(catalog.group(i) == HEAD for i in items) for u, items in lists.items()}


def gf_metric(lists: Mapping[str, Sequence[str]], catalog: ItemCatalog, target: Sequence[float]) -> float:
    """Group fairness in ``[0, 1]``; 1 means every list hits the target head share.

    Per user ``d_u = |n_A / K - p_A|``, and the mean is scaled by the worst
    possible deviation ``max(p_A, 1 - p_A)``.
    """
    k = _list_length(lists)
    p_a = target[0]
    if not lists or k == 0:
        return float("nan")
    d = _mean(abs(n / k - p_a) for n in head_counts(lists, catalog).values())
    return 1 - d / max(p_a, 1 - p_a)


def gf_raw(lists: Mapping[str, Sequence[str]], catalog: ItemCatalog, target: Sequence[float]) -> float:
    """Mean absolute deviation ``|n_A - K p_A|`` in item counts (lower is fairer)."""
    k = _list_length(lists)
    return _mean(abs(n - k * target[0]) for n in head_counts(lists, catalog).values())


@dataclass
class SubgroupNovelty:
    sgf: float
    n_a_bar: float
    n_b_bar: float
    # user -> (head mean, tail mean, per-user SGF, plain list mean)
    per_user: dict[str, tuple] = field(default_factory=dict, repr=False)


def sgf(lists: Mapping[str, Sequence[str]], catalog: ItemCatalog, raw_bits: bool = False) -> SubgroupNovelty:
    """Sub-group cold-item fairness.

    For each user the mean novelty of the head items and of the tail items are
    averaged; a group absent from the list is left out rather than counted as
    zero. ``n_a_bar`` and ``n_b_bar`` average each group over users where it
    is present.
    """
    if not lists:
        raise DataError("sgf needs at least one list")
    per_user = {}
    for u, items in lists.items():
        parts = {HEAD: [], "B": []}
        for i in items:
            info = catalog[i]
            parts[HEAD if info.group == HEAD else "B"].append(info.novelty if raw_bits else info.novelty_norm)
        n_a = _mean(parts[HEAD]) if parts[HEAD] else None
        n_b = _mean(parts["B"]) if parts["B"] else None
        defined = [x for x in (n_a, n_b) if x is not None]
        per_user[u] = (n_a, n_b, _mean(defined), _mean(parts[HEAD] + parts["B"]))
    return SubgroupNovelty(
        sgf=_mean(v[2] for v in per_user.values()),
        n_a_bar=_mean(v[0] for v in per_user.values() if v[0] is not None),
        n_b_bar=_mean(v[1] for v in per_user.values() if v[1] is not None),
        per_user=per_user,
    )


@dataclass(frozen=True)
class MetricWeights:
    w1: float = 1 / 3
    w2: float = 1 / 3
    w3: float = 1 / 3
    gf_variant: str = "eq"

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3) < 0 or abs(self.w1 + self.w2 + self.w3 - 1) > 1e-9:
            raise ValueError("metric weights must be non-negative and sum to 1")
        if self.gf_variant not in TARGETS:
            raise ValueError(f"gf_variant must be one of {sorted(TARGETS)}")


def all_metric(ndcg: float, gf: float, sgf_value: float, w: MetricWeights = MetricWeights()) -> float:
    return w.w1 * ndcg + w.w2 * gf + w.w3 * sgf_value


def delta(all_new: float, all_ref: float) -> float:
    """Relative change of ``all_new`` over ``all_ref``."""
    if all_ref == 0:
        raise UndefinedMetricError("relative improvement is undefined for a zero reference")
    return (all_new - all_ref) / all_ref


def harm(sgf_norm: float) -> float:
    if not 0 <= sgf_norm <= 1:
        raise ValueError(f"normalised SGF must lie in [0, 1], got {sgf_norm}")
    return 1 - sgf_norm


def relative_harm(sgf_by_run: Mapping[str, float]) -> dict[str, float]:
    """Harm after min-max scaling SGF across the runs being compared."""
    lo, hi = min(sgf_by_run.values()), max(sgf_by_run.values())
    if hi == lo:
        return {r: 0.0 for r in sgf_by_run}
    return {r: 1 - (v - lo) / (hi - lo) for r, v in sgf_by_run.items()}


@dataclass
class EvalReport:
    dataset: str
    model: str
    preset: str
    lam: float
    gamma: float
    k: int
    ndcg: float
    gf_eq: float
    gf_prop: float
    sgf: float
    sgf_raw_bits: float
    n_a_bar: float
    n_b_bar: float
    all_metric: float
    harm: float
    gf_raw_eq: float
    gf_raw_prop: float
    delta_b: float | None = None
    delta_t: float | None = None
    per_user: dict = field(default_factory=dict, repr=False, compare=False)

    def row(self) -> dict:
        def fmt(x):
            if x is None:
                return ""
            return repr(float(x)) if isinstance(x, float) else str(x)

        vals = {
            "dataset": self.dataset, "model": self.model, "preset": self.preset,
            "lambda": self.lam, "gamma": self.gamma, "K": self.k,
            "ndcg": self.ndcg, "gf_eq": self.gf_eq, "gf_prop": self.gf_prop,
            "sgf": self.sgf, "sgf_raw_bits": self.sgf_raw_bits, "all": self.all_metric,
            "delta_b": self.delta_b, "delta_t": self.delta_t, "harm": self.harm,
        }
        return {c: fmt(vals[c]) for c in REPORT_COLUMNS}


def evaluate_run(
    recs: Mapping[str, Sequence[str]],
    test: InteractionSet,
    catalog: ItemCatalog,
    weights: MetricWeights = MetricWeights(),
    refs: Mapping[str, float] | None = None,
    targets: Mapping[str, Sequence[float]] = TARGETS,
    meta: Mapping | None = None,
) -> EvalReport:
    """Score one run of top-K lists against the test split.

    ``refs`` may hold ``base_all`` and/or ``tpfr_all``; the matching relative
    improvements are filled only when supplied.
    """
    meta = dict(meta or {})
    k = _list_length(recs)
    truth = {u: set(items) for u, items in test.items_by_user().items()}
    nd = mean_ndcg(recs, truth, k)
    gf_eq = gf_metric(recs, catalog, targets["eq"])
    gf_prop = gf_metric(recs, catalog, targets["prop"])
    sub = sgf(recs, catalog)
    raw = sgf(recs, catalog, raw_bits=True)
    gf = gf_eq if weights.gf_variant == "eq" else gf_prop
    total = all_metric(nd, gf, sub.sgf, weights)
    refs = refs or {}
    return EvalReport(
        dataset=meta.get("dataset", ""),
        model=meta.get("model", ""),
        preset=meta.get("preset", ""),
        lam=float(meta.get("lambda", 0.0)),
        gamma=float(meta.get("gamma", 0.0)),
        k=k,
        ndcg=nd,
        gf_eq=gf_eq,
        gf_prop=gf_prop,
        sgf=sub.sgf,
        sgf_raw_bits=raw.sgf,
        n_a_bar=sub.n_a_bar,
        n_b_bar=sub.n_b_bar,
        all_metric=total,
        harm=harm(sub.sgf),
        gf_raw_eq=gf_raw(recs, catalog, targets["eq"]),
        gf_raw_prop=gf_raw(recs, catalog, targets["prop"]),
        delta_b=delta(total, refs["base_all"]) if "base_all" in refs else None,
        delta_t=delta(total, refs["tpfr_all"]) if "tpfr_all" in refs else None,
        per_user=sub.per_user,
    )


def report_csv(reports: Iterable[EvalReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.row())
    return buf.getvalue()


def novelty_csv(report: EvalReport) -> str:
    """Per-user novelty breakdown, enough to redraw distribution curves."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["user", "mean_novelty_norm", "sgf_user", "head_novelty_norm", "tail_novelty_norm"])
    for u, (n_a, n_b, sgf_u, plain) in report.per_user.items():
        opt = lambda x: "" if x is None else repr(x)
        writer.writerow([u, repr(plain), repr(sgf_u), opt(n_a), opt(n_b)])
    return buf.getvalue()
