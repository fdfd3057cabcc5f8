"""Command-line pipeline: ``prep``, ``rank``, ``rerank``, ``eval`` and ``sweep``.

Each subcommand reads ``--config`` (JSON) and writes under ``output_dir``::

    prep/{train,valid,test}.tsv, catalog.tsv, stats.json
    candidates/<model>.tsv, <model>.json
    runs/<dataset>_<model>_<preset-or-lgamma>/{reranked.tsv, sidecar.json}
    reports/<dataset>_<model>.csv, novelty/<dataset>_<model>_<run>.csv
    sweep/<dataset>_<model>.csv
    manifest.json

Exit status is 0 on success, 2 for configuration errors, 3 for data errors and
4 for solver or training failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from dataclasses import replace
from typing import Sequence

from . import __version__
from .baselines import CandidateList, load_candidates, mf_candidates, mf_train, mostpop_candidates, write_candidates
from .catalog import ItemCatalog, build_catalog
from .config import ExperimentConfig, canonical_json, load_config
from .dataio import dataset_stats, kcore_filter, load_interactions, read_split, split, write_split
from .errors import ConfigError, DataError, EmptyCoreError, FairRerankError
from .metrics import evaluate_run, novelty_csv, report_csv
from .reranker import PRESETS, TARGETS, RerankConfig, RerankResult, rerank_all

_log = logging.getLogger("fairrerank")

SWEEP_COLUMNS = ["lambda", "gamma", "ndcg", "gf", "sgf", "all", "mean_deviation", "harm", "gf_eq", "gf_prop", "error"]


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


class Layout:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.root = cfg.output_dir
        self.prep = os.path.join(self.root, "prep")
        self.catalog = os.path.join(self.prep, "catalog.tsv")
        self.stats = os.path.join(self.prep, "stats.json")

    def candidates(self, model: str) -> str:
        return os.path.join(self.root, "candidates", f"{model}.tsv")

    def run_dir(self, model: str, label: str) -> str:
        return os.path.join(self.root, "runs", f"{self.cfg.dataset.name}_{model}_{label}")

    def report(self, model: str) -> str:
        return os.path.join(self.root, "reports", f"{self.cfg.dataset.name}_{model}.csv")

    def novelty(self, model: str, label: str) -> str:
        return os.path.join(self.root, "novelty", f"{self.cfg.dataset.name}_{model}_{label}.csv")

    def sweep(self, model: str) -> str:
        return os.path.join(self.root, "sweep", f"{self.cfg.dataset.name}_{model}.csv")

    def rel(self, path: str) -> str:
        return os.path.relpath(path, self.root).replace(os.sep, "/")


def _record(layout: Layout, stage: str, outputs: Sequence[str]) -> None:
    """Merge a stage's output hashes into ``manifest.json``."""
    cfg = layout.cfg
    path = os.path.join(layout.root, "manifest.json")
    manifest = {}
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    if manifest.get("config_sha256") != cfg.digest():
        manifest = {}
    manifest.update(
        tool="fairrerank",
        version=__version__,
        config_sha256=cfg.digest(),
        seeds={"split": cfg.split.seed, "mf": cfg.mf.seed},
    )
    stages = manifest.setdefault("stages", {})
    stages[stage] = {layout.rel(p): _sha256(p) for p in sorted(outputs)}
    _write_text(path, canonical_json(manifest))


def _load_prep(layout: Layout):
    if not os.path.exists(layout.catalog):
        raise DataError(f"no prepared data under {layout.prep}; run `fairrerank prep` with this config first")
    train, valid, test = read_split(layout.prep)
    return train, valid, test, ItemCatalog.read_tsv(layout.catalog)


def _load_cands(layout: Layout, model: str, catalog: ItemCatalog) -> list[CandidateList]:
    path = layout.candidates(model)
    if not os.path.exists(path):
        raise DataError(f"no candidates at {path}; run `fairrerank rank --model {model}` first")
    return load_candidates(path, catalog)


def cmd_prep(cfg: ExperimentConfig) -> list[str]:
    layout = Layout(cfg)
    if not cfg.dataset.path or not os.path.exists(cfg.dataset.path):
        raise DataError(f"dataset file {cfg.dataset.path!r} does not exist")
    data = load_interactions(cfg.dataset.path, cfg.dataset.format, cfg.dataset.implicit)
    core = kcore_filter(data, cfg.k_core)
    if core.is_empty:
        raise EmptyCoreError(f"{cfg.k_core}-core of {cfg.dataset.path} is empty")
    sp = split(core, cfg.split.ratios, cfg.split.seed)
    write_split(sp, layout.prep)
    build_catalog(sp.train, cfg.head_fraction).write_tsv(layout.catalog)
    _write_text(layout.stats, dataset_stats(core).to_json())
    outputs = [os.path.join(layout.prep, f"{n}.tsv") for n in ("train", "valid", "test")]
    outputs += [layout.catalog, layout.stats]
    _record(layout, "prep", outputs)
    _log.info("prep: %d interactions after %d-core", len(core), cfg.k_core)
    return outputs


def cmd_rank(cfg: ExperimentConfig, model: str | None = None, import_path: str | None = None) -> str:
    layout = Layout(cfg)
    train, _, _, catalog = _load_prep(layout)
    if import_path:
        model = model or os.path.splitext(os.path.basename(import_path))[0]
        lists = load_candidates(import_path, catalog, train)
    else:
        model = model or cfg.model
        if model == "mostpop":
            lists = mostpop_candidates(train, cfg.top_n)
        elif model == "mf":
            lists = mf_candidates(mf_train(train, cfg.mf), train, cfg.top_n)
        else:
            raise ConfigError(f"unknown model {model!r}; use mostpop, mf or --import")
    out = layout.candidates(model)
    os.makedirs(os.path.dirname(out), exist_ok=True)
    write_candidates(lists, out)
    short = [cl.user for cl in lists if len(cl) < cfg.top_n]
    summary = {"model": model, "top_n": cfg.top_n, "users": len(lists), "short_lists": len(short)}
    summary_path = os.path.splitext(out)[0] + ".json"
    _write_text(summary_path, canonical_json(summary))
    if short:
        _log.warning("rank: %d of %d users have fewer than %d candidates", len(short), len(lists), cfg.top_n)
    _record(layout, f"rank:{model}", [out, summary_path])
    return out


def _rerank_configs(cfg, presets=None, lam=None, gamma=None, target=None) -> list[RerankConfig]:
    r = cfg.reranker
    lam = r.lam if lam is None else lam
    p_f = TARGETS[target] if target else r.p_target()
    try:
        if gamma is not None or (not presets and r.gamma is not None):
            g = gamma if gamma is not None else r.gamma
            return [RerankConfig(k=cfg.k, lam=lam, gamma=g, target=p_f)]
        return [RerankConfig.from_preset(p, k=cfg.k, lam=lam, target=p_f) for p in (presets or r.presets)]
    except ValueError as e:
        raise ConfigError(str(e)) from None


def write_reranked(results: Sequence[RerankResult], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for res in results:
            for rank, (item, g) in enumerate(zip(res.selected, res.gains), 1):
                fh.write(f"{res.user}\t{item}\t{g!r}\t{rank}\n")


def _sidecar(rc: RerankConfig, results, inputs: dict) -> dict:
    return {
        "config": {"K": rc.k, "lambda": rc.lam, "gamma": rc.gamma, "p_f": list(rc.target), "preset": rc.preset},
        "inputs": inputs,
        "users": [
            {"user": r.user, "n_a": r.n_a, "n_b": r.n_b, "deviation": r.deviation, "objective_value": r.objective_value}
            for r in results
        ],
    }


def cmd_rerank(cfg, model=None, presets=None, lam=None, gamma=None, target=None) -> list[str]:
    layout = Layout(cfg)
    model = model or cfg.model
    _, _, _, catalog = _load_prep(layout)
    lists = _load_cands(layout, model, catalog)
    inputs = {
        "candidates": _sha256(layout.candidates(model)),
        "catalog": _sha256(layout.catalog),
    }
    dirs = []
    for rc in _rerank_configs(cfg, presets, lam, gamma, target):
        results = rerank_all(lists, catalog, rc, workers=cfg.workers)
        d = layout.run_dir(model, rc.label)
        os.makedirs(d, exist_ok=True)
        write_reranked(results, os.path.join(d, "reranked.tsv"))
        _write_text(os.path.join(d, "sidecar.json"), canonical_json(_sidecar(rc, results, inputs)))
        _record(layout, f"rerank:{model}:{rc.label}", [os.path.join(d, "reranked.tsv"), os.path.join(d, "sidecar.json")])
        dirs.append(d)
    return dirs


def read_ranked(path: str) -> dict[str, list[str]]:
    """Per-user item lists from a ``user item score rank`` file, ordered by rank."""
    rows: dict[str, list[tuple[int, str]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            cols = line.split()
            if cols:
                rows.setdefault(cols[0], []).append((int(cols[3]), cols[1]))
    return {u: [i for _, i in sorted(v)] for u, v in rows.items()}


def _discover_runs(layout: Layout, model: str) -> list[str]:
    root = os.path.join(layout.root, "runs")
    prefix = f"{layout.cfg.dataset.name}_{model}_"
    if not os.path.isdir(root):
        return []
    found = sorted(d for d in os.listdir(root) if d.startswith(prefix))
    order = {p: n for n, p in enumerate(PRESETS)}
    found.sort(key=lambda d: (order.get(d[len(prefix):], len(order)), d))
    return [os.path.join(root, d) for d in found]


def cmd_eval(cfg, model=None, runs: Sequence[str] | None = None) -> str:
    """Evaluate the base top-K and each run; rows are base, presets in order, then the rest."""
    layout = Layout(cfg)
    model = model or cfg.model
    _, _, test, catalog = _load_prep(layout)
    lists = _load_cands(layout, model, catalog)
    base = {cl.user: cl.top(cfg.k) for cl in lists if len(cl) >= cfg.k}
    if len(base) < len(lists):
        _log.warning("eval: %d users with fewer than K candidates left out of the base run", len(lists) - len(base))

    entries = [("base", base, {"preset": "base", "lambda": 0.0, "gamma": 0.0})]
    for d in runs or _discover_runs(layout, model):
        with open(os.path.join(d, "sidecar.json"), encoding="utf-8") as fh:
            side = json.load(fh)["config"]
        label = side["preset"] or f"l{side['lambda']:g}_g{side['gamma']:g}"
        entries.append((label, read_ranked(os.path.join(d, "reranked.tsv")), {**side, "preset": label}))

    meta0 = {"dataset": cfg.dataset.name, "model": model}
    first = {label: evaluate_run(recs, test, catalog, cfg.weights, meta={**meta0, **m}) for label, recs, m in entries}
    refs = {"base_all": first["base"].all_metric}
    if "tPFR" in first:
        refs["tpfr_all"] = first["tPFR"].all_metric
    reports = []
    for label, recs, m in entries:
        rep = evaluate_run(recs, test, catalog, cfg.weights, refs=refs, meta={**meta0, **m})
        reports.append(rep)
        _write_text(layout.novelty(model, label), novelty_csv(rep))
    out = layout.report(model)
    _write_text(out, report_csv(reports))
    _record(layout, f"eval:{model}", [out] + [layout.novelty(model, label) for label, _, _ in entries])
    return out


def cmd_sweep(cfg, model=None, target=None) -> str:
    """Re-rank and evaluate on every (lambda, gamma) cell; failed cells keep their row."""
    layout = Layout(cfg)
    model = model or cfg.model
    _, _, test, catalog = _load_prep(layout)
    lists = _load_cands(layout, model, catalog)
    p_f = TARGETS[target] if target else cfg.reranker.p_target()
    gf_key = "gf_eq" if cfg.weights.gf_variant == "eq" else "gf_prop"

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    failed = 0
    for lam in cfg.sweep.lambdas:
        for gamma in cfg.sweep.gammas:
            row = {"lambda": repr(float(lam)), "gamma": repr(float(gamma))}
            try:
                rc = RerankConfig(k=cfg.k, lam=lam, gamma=gamma, target=p_f)
                results = rerank_all(lists, catalog, rc, workers=cfg.workers)
                rep = evaluate_run({r.user: r.selected for r in results}, test, catalog, cfg.weights)
                row.update(
                    ndcg=repr(rep.ndcg), gf=repr(getattr(rep, gf_key)), sgf=repr(rep.sgf), all=repr(rep.all_metric),
                    mean_deviation=repr(math.fsum(r.deviation for r in results) / len(results)),
                    harm=repr(rep.harm), gf_eq=repr(rep.gf_eq), gf_prop=repr(rep.gf_prop), error="",
                )
            except (FairRerankError, ValueError) as e:
                failed += 1
                row["error"] = str(e).replace("\n", " ")
            writer.writerow({c: row.get(c, "") for c in SWEEP_COLUMNS})
    out = layout.sweep(model)
    _write_text(out, buf.getvalue())
    _record(layout, f"sweep:{model}", [out])
    if failed:
        raise DataError(f"{failed} sweep cell(s) failed; see the error column of {out}")
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairrerank", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", required=True, help="experiment JSON")
        sp.add_argument("--out", help="override output_dir")
        return sp

    add("prep", "filter, split and describe the dataset")
    sp = add("rank", "generate or import top-N candidates")
    sp.add_argument("--model", help="mostpop or mf (default: config model)")
    sp.add_argument("--import", dest="import_path", help="candidate TSV from an external ranker")
    for name, help in (("rerank", "fairness-aware re-ranking"), ("sweep", "lambda x gamma grid")):
        sp = add(name, help)
        sp.add_argument("--model")
        sp.add_argument("--target", choices=sorted(TARGETS))
        if name == "rerank":
            sp.add_argument("--preset", action="append", choices=list(PRESETS))
            sp.add_argument("--lambda", dest="lam", type=float)
            sp.add_argument("--gamma", type=float)
    sp = add("eval", "evaluate base and re-ranked runs")
    sp.add_argument("--model")
    sp.add_argument("--runs", nargs="+", help="run directories (default: all runs for the model)")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg = replace(cfg, output_dir=os.path.abspath(args.out))
        if args.command == "prep":
            outs = cmd_prep(cfg)
        elif args.command == "rank":
            outs = [cmd_rank(cfg, args.model, args.import_path)]
        elif args.command == "rerank":
            outs = cmd_rerank(cfg, args.model, args.preset, args.lam, args.gamma, args.target)
        elif args.command == "eval":
            outs = [cmd_eval(cfg, args.model, args.runs)]
        else:
            outs = [cmd_sweep(cfg, args.model, args.target)]
    except FairRerankError as e:
        print(f"fairrerank {args.command}: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f"fairrerank {args.command}: {e}", file=sys.stderr)
        return ConfigError.exit_code
    for o in outs:
        print(o)
    return 0


if __name__ == "__main__":
    sys.exit(main())
