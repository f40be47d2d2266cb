"""Command line entry point: ``phishgraph <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 bad input data,
3 pipeline failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence

from . import pipeline
from .config import ConfigError, MissingPathError, RunConfig
from .dataset import DatasetError, LoadSummary, load_dataset
from .enrichment import RESOLVE, SKIP, DigResolver, EnrichmentError, load_enrichment
from .evaluation import EvaluationError, threshold_sweep, write_sweep_csv
from .graph import URL, GraphError, node_id, save_graph
from .lbp import run_inference
from .urls import UrlParseError, parse_url

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PIPELINE = 0, 1, 2, 3

logger = logging.getLogger("phishgraph")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which we reserve for data errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _overrides(pairs: Sequence[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _load_config(args) -> RunConfig:
    overrides = _overrides(args.set or [])
    if getattr(args, "parallelism", None):
        overrides["parallelism"] = str(args.parallelism)
    if not Path(args.config).is_file():
        raise UsageError(f"config file not found: {args.config}")
    return RunConfig.load(args.config, overrides)


@contextmanager
def _run_log(out_dir: Path) -> Iterator[None]:
    """Timestamps go to ``run.log`` only, keeping the reports reproducible."""
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / "run.log", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    old_level = root.level
    root.setLevel(min(old_level, logging.INFO) if old_level else logging.INFO)
    try:
        yield
    finally:
        root.removeHandler(handler)
        root.setLevel(old_level)
        handler.close()


def cmd_ingest(args) -> int:
    summary = LoadSummary()
    records = load_dataset(args.dataset, summary)
    unparseable = 0
    for r in records:
        try:
            parse_url(r.url)
        except UrlParseError:
            unparseable += 1
    print(f"records: {summary.n_records}")
    print(f"benign: {summary.per_class.get(0, 0)}")
    print(f"phishing: {summary.per_class.get(1, 0)}")
    print(f"unparseable: {unparseable}")
    if summary.duplicates:
        print(f"warning: {summary.duplicates} duplicate rows over {len(summary.duplicate_urls)} URLs")
    return EXIT_OK


def cmd_enrich(args) -> int:
    path = Path(args.enrichment)
    if args.policy == SKIP and not path.exists():
        raise DatasetError(f"enrichment file not found: {path}")
    if not path.exists():
        path.touch()
    store = load_enrichment(path, policy=args.policy)
    records = pipeline.usable_records(load_dataset(args.dataset))
    domains = sorted({parse_url(r.url).registered_domain for r in records})
    added = 0
    if args.policy == RESOLVE:
        store.writeback_path = path
        added = pipeline.resolve_missing(records, store, DigResolver(timeout=args.timeout))
    covered = sum(1 for d in domains if d in store)
    print(f"domains: {len(domains)}")
    print(f"with enrichment: {covered}")
    print(f"missing: {len(domains) - covered}")
    print(f"resolved: {added}")
    if store.rejected or store.duplicate_warnings:
        print(f"warning: {store.rejected} rejected, {store.duplicate_warnings} duplicate records")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _load_config(args)
    out_dir = config.path("output_dir")
    with _run_log(out_dir):
        logger.info("run started: config %s", args.config)
        report = pipeline.run(config)
        logger.info("run finished")
    g = report["graph"]["mean"]
    print(f"mean F1 over {config['n_folds']} folds: {g['f1']:.4f} (accuracy {g['accuracy']:.4f})")
    for kind, b in sorted(report["baselines"].items()):
        print(f"  baseline {kind}: F1 {b['mean']['f1']:.4f}")
    print(f"reports written to {out_dir}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load_config(args)
    if args.grid is not None:
        config = config.with_overrides(sweep__grid=args.grid)
    out_dir = config.path("output_dir")
    out = Path(args.out) if args.out else out_dir / "sweep.csv"
    with _run_log(out_dir):
        ctx = pipeline.load_context(config)
        fold_results = pipeline.run_folds(ctx)
        scores: dict[str, float] = {}
        truth: dict[str, int] = {}
        for fr in fold_results:
            o = fr["outcome"]
            for url, label in o.truth.items():
                scores[url] = o.result.phish_score[node_id(URL, url)]
                truth[url] = label
        rows, best = threshold_sweep(
            scores, truth, config.sweep_grid(), config.positive_label, config["lbp.tie_to_phishing"]
        )
    out.parent.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out)
    print(f"{len(rows)} thresholds swept; best F1 at {best}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_graph_export(args) -> int:
    config = _load_config(args)
    if not 0 <= args.fold < config["n_folds"]:
        raise UsageError(f"--fold must be in [0, {config['n_folds']})")
    out_dir = config.path("output_dir")
    with _run_log(out_dir):
        ctx = pipeline.load_context(config)
        data = pipeline.prepare_fold(ctx.records, ctx.assignments, args.fold, config, ctx.store)
        graph = data.graph.copy()
        pipeline.set_test_priors(graph, data.priors.get(config["prior.source"]))
        if not args.no_infer:
            run_inference(graph, config.edge_spec(), data.embeddings, config.inference_config())
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_graph(graph, out)
    print(f"fold {args.fold}: {len(graph.nodes)} nodes, {len(graph.edges)} edges -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="phishgraph", description="Graph-based phishing URL detection.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate a url,label dataset and print class counts")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("enrich", help="report enrichment coverage, optionally resolving gaps via DNS")
    p.add_argument("dataset")
    p.add_argument("enrichment", help="JSONL enrichment file (appended to when resolving)")
    p.add_argument("--policy", choices=(SKIP, RESOLVE), default=SKIP)
    p.add_argument("--timeout", type=float, default=5.0)
    p.set_defaults(func=cmd_enrich)

    def config_args(p):
        p.add_argument("config")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    p = sub.add_parser("run", help="cross-validated end-to-end run")
    config_args(p)
    p.add_argument("--parallelism", type=int, help="number of folds run concurrently")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep the classification threshold over stored scores")
    config_args(p)
    p.add_argument("--grid", help="comma-separated increasing thresholds (default: sweep.grid)")
    p.add_argument("--out", help="CSV path (default: <output_dir>/sweep.csv)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("graph", help="graph utilities")
    gsub = p.add_subparsers(dest="graph_command", required=True, parser_class=_Parser)
    g = gsub.add_parser("export", help="write one fold's graph as JSONL")
    config_args(g)
    g.add_argument("--fold", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--no-infer", action="store_true", help="export before inference")
    g.set_defaults(func=cmd_graph_export)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MissingPathError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, EnrichmentError, UrlParseError, GraphError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except pipeline.PipelineError as exc:
        code = EXIT_DATA if exc.stage in ("ingest", "enrichment") else EXIT_PIPELINE
        print(f"pipeline failed at stage {exc.stage}: {exc}", file=sys.stderr)
        return code
    except Exception as exc:
        logger.exception("unexpected failure")
        print(f"pipeline failed: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
