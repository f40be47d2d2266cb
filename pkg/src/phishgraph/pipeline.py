"""Per-fold pipeline: vocabulary, baselines, priors, embeddings, graph, inference."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence


from . import baselines
from .config import RunConfig
from .dataset import UrlRecord, load_dataset, make_folds
from .embeddings import EmbeddingTable, entity_embeddings, train_token_embeddings
from .enrichment import RESOLVE, DigResolver, EnrichmentStore, Resolver, enrich, load_enrichment
from .evaluation import MetricSet, aggregate_cv, confusion, metrics, threshold_sweep, write_sweep_csv
from .graph import TEST, TRAIN, URL, HetGraph, build_graph, node_id
from .lbp import InferenceResult, run_inference
from .seeding import derive_seed
from .urls import TokenVocabulary, UrlParseError, feature_matrix, feature_names, manifest_hash, parse_url, tokenize

logger = logging.getLogger(__name__)

# settings that change where or how fast a run happens but never its results;
# they are left out of report.json so reports compare byte for byte
EXECUTION_KEYS = ("output_dir", "parallelism")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class FoldData:
    """Everything built from one training fold, reusable across inference variants."""

    fold: int
    train_urls: list[str]
    test_urls: list[str]
    truth: dict[str, int]
    vocabulary: TokenVocabulary
    models: dict[str, baselines.TrainedModel]
    priors: dict[str, dict[str, tuple[float, float]]]
    baseline_metrics: dict[str, MetricSet]
    graph: HetGraph
    embeddings: EmbeddingTable
    manifest: str = ""


@dataclass
class FoldOutcome:
    fold: int
    truth: dict[str, int]
    result: InferenceResult
    predictions: dict[str, int]
    metrics: MetricSet
    baseline_metrics: dict[str, MetricSet] = field(default_factory=dict)


def usable_records(records: Sequence[UrlRecord]) -> list[UrlRecord]:
    out = []
    for r in records:
        try:
            parse_url(r.url)
        except UrlParseError as exc:
            logger.warning("dropping record: %s", exc)
            continue
        out.append(r)
    return out


def set_test_priors(graph: HetGraph, priors: Mapping[str, tuple[float, float]] | None) -> None:
    for url_node in graph.ids_of_kind(URL):
        node = graph.nodes[url_node]
        if node.hidden:
            p = priors.get(node.name) if priors else None
            node.prior = (float(p[0]), float(p[1])) if p is not None else (0.5, 0.5)


def prepare_fold(
    records: Sequence[UrlRecord], assignments: Mapping[int, int], fold: int,
    config: RunConfig, store: EnrichmentStore | None,
) -> FoldData:
    seed = config["seed"]
    train_idx = [i for i, f in sorted(assignments.items()) if f != fold]
    test_idx = [i for i, f in sorted(assignments.items()) if f == fold]
    train_urls = [records[i].url for i in train_idx]
    train_set = set(train_urls)
    train_labels = [records[i].label for i in train_idx]

    truth: dict[str, int] = {}
    for i in test_idx:
        url = records[i].url
        if url not in train_set:
            truth.setdefault(url, records[i].label)
    test_urls = sorted(truth)

    train_tokens = [tokenize(parse_url(u)) for u in train_urls]
    vocabulary = TokenVocabulary.build(train_tokens)

    use_dca = config["features.domain_contains_address"]
    manifest = manifest_hash(feature_names(use_dca))
    X_train = feature_matrix(train_urls, use_dca)
    X_test = feature_matrix(test_urls, use_dca)

    models: dict[str, baselines.TrainedModel] = {}
    priors: dict[str, dict[str, tuple[float, float]]] = {"uniform": {}}
    baseline_metrics: dict[str, MetricSet] = {}
    kinds = list(dict.fromkeys(config.baseline_kinds + ([config["prior.source"]] if config["prior.source"] != "uniform" else [])))
    for kind in kinds:
        model = baselines.train(
            kind, X_train, train_labels, manifest=manifest,
            seed=derive_seed(seed, f"baseline-{kind}", fold),
            n_trees=config["rf.n_trees"], max_depth=config["rf.max_depth"],
            lr_epochs=config["lr.epochs"], lr_rate=config["lr.rate"], l2=config["lr.l2"],
            var_floor=config["nb.var_floor"],
        )
        models[kind] = model
        table = baselines.export_priors(model, test_urls, X_test)
        priors[kind] = table
        if len(test_urls):
            preds = {u: int(table[u][1] >= 0.5) for u in test_urls}
            baseline_metrics[kind] = metrics(confusion(preds, truth, config.positive_label))

    roles = [TRAIN] * len(train_idx) + [TEST] * len(test_idx)
    fold_records = [records[i] for i in train_idx] + [records[i] for i in test_idx]
    graph = build_graph(fold_records, roles, vocabulary, store)

    token_table = train_token_embeddings(
        train_tokens, dimension=config["embed.dim"], window=config["embed.window"],
        epochs=config["embed.epochs"], negatives=config["embed.negatives"],
        seed=derive_seed(seed, "embeddings", fold), vocabulary=vocabulary.kept,
    )
    embeddings = entity_embeddings(graph, token_table)
    return FoldData(fold, train_urls, test_urls, truth, vocabulary, models, priors,
                    baseline_metrics, graph, embeddings, manifest)


def infer_fold(data: FoldData, config: RunConfig) -> FoldOutcome:
    graph = data.graph.copy()
    set_test_priors(graph, data.priors.get(config["prior.source"]))
    result = run_inference(graph, config.edge_spec(), data.embeddings, config.inference_config())
    predictions = {u: result.predict_label[node_id(URL, u)] for u in data.test_urls}
    m = metrics(confusion(predictions, data.truth, config.positive_label))
    return FoldOutcome(data.fold, data.truth, result, predictions, m, dict(data.baseline_metrics))


@dataclass
class RunContext:
    config: RunConfig
    records: list[UrlRecord]
    assignments: dict[int, int]
    store: EnrichmentStore | None


def resolve_missing(records: Sequence[UrlRecord], store: EnrichmentStore, resolver: Resolver) -> int:
    """Look up every registered domain absent from ``store``; returns how many were added."""
    before = len(store)
    seen: set[str] = set()
    for r in records:
        domain = parse_url(r.url).registered_domain
        if domain in seen:
            continue
        seen.add(domain)
        if domain not in store:
            enrich(domain, store, resolver)
    return len(store) - before


def load_context(config: RunConfig, resolver: Resolver | None = None) -> RunContext:
    """Load records and enrichment and plan the folds.

    With ``enrich.policy = resolve`` missing domains are looked up here, once,
    and appended to the enrichment file before any fold starts.
    """
    config.check_paths()
    try:
        records = usable_records(load_dataset(config.path("dataset")))
    except Exception as exc:
        raise PipelineError("ingest", str(exc)) from exc
    store = None
    enrichment_path = config.path("enrichment")
    if enrichment_path is not None:
        try:
            store = load_enrichment(enrichment_path, policy=config["enrich.policy"])
        except Exception as exc:
            raise PipelineError("enrichment", str(exc)) from exc
        if store.policy == RESOLVE:
            store.writeback_path = enrichment_path
            added = resolve_missing(records, store, resolver or DigResolver())
            logger.info("resolved %d missing domains", added)
    try:
        plan = make_folds(records, config["n_folds"], derive_seed(config["seed"], "folds"))
    except Exception as exc:
        raise PipelineError("folds", str(exc)) from exc
    return RunContext(config, records, plan.assignments, store)


def _fold_worker(args: tuple[RunContext, int]) -> dict:
    ctx, fold = args
    try:
        data = prepare_fold(ctx.records, ctx.assignments, fold, ctx.config, ctx.store)
    except Exception as exc:
        raise PipelineError("prepare_fold", f"fold {fold}: {exc}") from exc
    try:
        outcome = infer_fold(data, ctx.config)
    except Exception as exc:
        raise PipelineError("inference", f"fold {fold}: {exc}") from exc
    return {"fold": fold, "outcome": outcome, "priors": data.priors.get(ctx.config["prior.source"], {})}


def run_folds(ctx: RunContext, parallelism: int | None = None) -> list[dict]:
    n = ctx.config["n_folds"]
    workers = parallelism or ctx.config["parallelism"]
    jobs = [(ctx, f) for f in range(n)]
    if workers <= 1:
        return [_fold_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, n)) as pool:
        return list(pool.map(_fold_worker, jobs))


def build_report(ctx: RunContext, fold_results: Sequence[dict]) -> tuple[dict, list]:
    cfg = ctx.config
    outcomes: list[FoldOutcome] = [fr["outcome"] for fr in fold_results]
    mean, table = aggregate_cv([o.metrics for o in outcomes])
    pooled_counts = None
    for o in outcomes:
        c = confusion(o.predictions, o.truth, cfg.positive_label)
        pooled_counts = c if pooled_counts is None else pooled_counts + c

    baseline_report = {}
    for kind in cfg.baseline_kinds:
        per = [o.baseline_metrics[kind] for o in outcomes if kind in o.baseline_metrics]
        if per:
            bmean, btable = aggregate_cv(per)
            baseline_report[kind] = {"mean": bmean.as_dict(), "per_fold": btable}

    scores: dict[str, float] = {}
    truth: dict[str, int] = {}
    for o in outcomes:
        for u in o.truth:
            scores[u] = o.result.phish_score[node_id(URL, u)]
            truth[u] = o.truth[u]
    rows, best = threshold_sweep(scores, truth, cfg.sweep_grid(), cfg.positive_label, cfg["lbp.tie_to_phishing"])

    report = {
        "positive_class": cfg["eval.positive"],
        "graph": {
            "mean": mean.as_dict(),
            "pooled": {"counts": vars(pooled_counts), "metrics": metrics(pooled_counts).as_dict()},
            "per_fold": table,
        },
        "baselines": baseline_report,
        "inference": [
            {"fold": o.fold, **o.result.summary()} for o in outcomes
        ],
        "threshold_sweep": {"best_f1_threshold": best},
        "n_records": len(ctx.records),
        "config": {k: v for k, v in sorted(cfg.values.items()) if k not in EXECUTION_KEYS},
    }
    return report, rows


def write_outputs(ctx: RunContext, fold_results: Sequence[dict], out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    report, rows = build_report(ctx, fold_results)
    for fr in fold_results:
        fdir = out_dir / f"fold_{fr['fold']}"
        fdir.mkdir(exist_ok=True)
        outcome: FoldOutcome = fr["outcome"]
        outcome.result.save(fdir / "results.csv", fdir / "summary.json")
        baselines.save_priors(fr["priors"], fdir / "priors.csv")
    (out_dir / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    write_sweep_csv(rows, out_dir / "sweep.csv")
    (out_dir / "effective_config.txt").write_text(ctx.config.dump(), encoding="utf-8")
    return report


def run(config: RunConfig, parallelism: int | None = None) -> dict[str, Any]:
    ctx = load_context(config)
    fold_results = run_folds(ctx, parallelism)
    out_dir = config.path("output_dir") or Path("out")
    return write_outputs(ctx, fold_results, out_dir)
