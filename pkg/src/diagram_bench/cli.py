"""Command-line entry point: ``diagram-bench <subcommand>``.

File formats (all UTF-8, one JSON object per line):

  manifest.jsonl    {id, split, nodes, edges, caption, image_path, layout_seed,
                     labeled_key, unlabeled_undirected_key}
  embeddings        {"id": str, "vector": [float, ...]}, one dimension for all rows
  predictions       {"id": str, "mermaid": str}  ("mermaid-text"/"mermaid_text"/"text" also accepted)

Exit codes: 0 success, 2 usage error, 3 invalid input, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import __version__
from .baseline import format_table, random_baseline, summary_row
from .dataset import (
    BuildConfig,
    DatasetManifest,
    build_corpus,
    build_noniso_split,
    build_query_set,
)
from .embeddings import load_embeddings
from .errors import DiagramBenchError, UnknownSampleId
from .graph import DirectedGraph, GenerationConfig
from .layout import LayoutConfig, layout_graph
from .mermaid import parse_prediction, score_captions
from .probing import ProbeConfig, run_probing
from .render import RenderConfig, rasterize, render_svg
from .retrieval import run_retrieval

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_RUNTIME = 4
OUT_ENV = "DIAGRAM_BENCH_OUT"

PROFILES = {
    "desk": {"total": 10_000, "queries": 200, "noniso": 500},
    "paper": {"total": 100_000, "queries": 1_000, "noniso": 1_000},
}
PREDICTION_FIELDS = ("mermaid", "mermaid-text", "mermaid_text", "text", "prediction")


class InputError(Exception):
    """Bad or inconsistent input files; maps to exit code 3."""


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {text}")
    return value


def _open_fraction(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _default_out() -> str | None:
    return os.environ.get(OUT_ENV)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diagram-bench",
        description="Generate the debiased diagram-caption benchmark and score external models on it.",
        epilog=__doc__.split("\n", 2)[2],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build corpus, retrieval queries and the non-isomorphic split")
    p.add_argument("--out", default=_default_out(), help=f"output directory (default: ${OUT_ENV})")
    p.add_argument("--profile", choices=sorted(PROFILES), default="desk",
                   help="desk: 10k samples/200 queries; paper: 100k samples/1,000 queries")
    p.add_argument("--total", type=_positive_int, help="number of corpus samples (overrides profile)")
    p.add_argument("--test-fraction", type=_open_fraction, default=0.1)
    p.add_argument("--edge-prob", type=_probability, default=0.3, help="per-pair edge probability")
    p.add_argument("--seed", type=_seed, default=0, help="master seed")
    p.add_argument("--resample-limit", type=_positive_int, default=100)
    p.add_argument("--queries", type=_non_negative_int, help="retrieval query count (overrides profile)")
    p.add_argument("--noniso", type=_non_negative_int, help="held-out non-isomorphic sample count")
    p.add_argument("--noniso-attempts", type=_positive_int, help="graph draws allowed for --noniso (default 200x)")
    p.add_argument("--no-images", action="store_true", help="write the manifest only")
    p.add_argument("--image-side", type=_positive_int, default=RenderConfig.image_side)
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker processes; output does not depend on it")

    p = sub.add_parser("render", help="render manifest samples or a single Mermaid caption")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", help="manifest.jsonl (or its directory)")
    src.add_argument("--caption", help="file with a Mermaid caption over labels A-H ('-' for stdin)")
    p.add_argument("--out", help="output directory (manifest mode) or file (caption mode)")
    p.add_argument("--split", action="append", help="only these splits (repeatable)")
    p.add_argument("--id", action="append", dest="ids", help="only these sample ids (repeatable)")
    p.add_argument("--format", choices=("png", "svg", "ppm"), default="png")
    p.add_argument("--layout-seed", type=_seed, default=0, help="caption mode only")

    p = sub.add_parser("probe", help="linear probing on frozen embeddings")
    _eval_common(p)
    p.add_argument("--embeddings", required=True, help="embeddings for the train and test splits")
    p.add_argument("--reg", type=float, default=1.0, help="L2 strength on standardized features")
    p.add_argument("--tol", type=float, default=1e-6, help="gradient-norm tolerance")
    p.add_argument("--max-iter", type=_positive_int, default=10_000)
    p.add_argument("--balance-seed", type=_seed, default=0)
    p.add_argument("--no-balance-train", action="store_true")
    p.add_argument("--no-balance-eval", action="store_true")

    p = sub.add_parser("retrieve", help="cosine retrieval scored by MAP@k / MRR@k")
    _eval_common(p)
    p.add_argument("--embeddings", required=True, help="embeddings covering the test split (and queries)")
    p.add_argument("--query-embeddings", help="query embeddings if kept in a separate file")
    p.add_argument("--cutoff", type=_positive_int, default=100)

    p = sub.add_parser("score-captions", help="micro edge-set F1 of Mermaid predictions")
    _eval_common(p)
    p.add_argument("--pred", required=True, help="predictions file")
    p.add_argument("--split", action="append", help="gold split(s) (default: test)")

    p = sub.add_parser("baseline", help="random Gaussian embedding baseline")
    _eval_common(p)
    p.add_argument("--dim", type=_positive_int, default=512)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--cutoff", type=_positive_int, default=100)
    return parser


def _eval_common(p):
    p.add_argument("--manifest", required=True, help="manifest.jsonl (or its directory)")
    p.add_argument("--out", default=_default_out(), help="report directory (default: next to the manifest)")
    p.add_argument("--method", default=None, help="row label for the summary table")


def _load_manifest(path) -> DatasetManifest:
    p = Path(path)
    if not (p / "manifest.jsonl" if p.is_dir() else p).exists():
        raise InputError(f"manifest not found: {path}")
    try:
        return DatasetManifest.load(p)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _load_embeddings(path, manifest):
    if not Path(path).exists():
        raise InputError(f"embeddings file not found: {path}")
    try:
        table = load_embeddings(path)
        table.check_against(manifest)
    except (ValueError, UnknownSampleId) as exc:
        raise InputError(str(exc)) from exc
    return table


def _require_ids(table, ids, what):
    missing = [i for i in ids if i not in table]
    if missing:
        raise InputError(f"{len(missing)} {what} id(s) have no embedding, e.g. {missing[0]!r}")


def _report_path(args, name: str) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        m = Path(args.manifest)
        out = m if m.is_dir() else m.parent
    out.mkdir(parents=True, exist_ok=True)
    return out / f"{name}_report.json"


def _write_report(args, name: str, result: dict) -> Path:
    path = _report_path(args, name)
    echo = {k: v for k, v in vars(args).items() if k != "func"}
    payload = {"command": name, "arguments": echo, "result": result}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def cmd_generate(args) -> int:
    if not args.out:
        raise InputError(f"--out is required (or set ${OUT_ENV})")
    profile = PROFILES[args.profile]
    total = args.total if args.total is not None else profile["total"]
    n_queries = args.queries if args.queries is not None else profile["queries"]
    n_noniso = args.noniso if args.noniso is not None else profile["noniso"]
    attempts = args.noniso_attempts if args.noniso_attempts is not None else max(200 * n_noniso, 1)
    config = BuildConfig(
        GenerationConfig(args.edge_prob, args.seed, args.resample_limit),
        LayoutConfig(),
        RenderConfig(image_side=args.image_side),
        render_images=not args.no_images,
    )
    out = Path(args.out)
    manifest = build_corpus(config, total, args.test_fraction, out, args.jobs)
    if n_queries:
        manifest = manifest.extend(build_query_set(manifest, n_queries, out), n_queries=n_queries)
    if n_noniso:
        held = build_noniso_split(manifest, n_noniso, attempts, out)
        manifest = manifest.extend(held, n_noniso=n_noniso, noniso_attempts=attempts)
    manifest.params["profile"] = args.profile
    path = manifest.write(out)
    counts = manifest.counts()
    print(f"wrote {path} ({len(manifest)} records: " + ", ".join(f"{k} {v}" for k, v in counts.items()) + ")")
    return 0


def cmd_render(args) -> int:
    if args.caption:
        text = sys.stdin.read() if args.caption == "-" else Path(args.caption).read_text(encoding="utf-8")
        edges = parse_prediction(text)
        try:
            graph = DirectedGraph.from_edges(edges)
        except ValueError as exc:
            raise InputError(f"caption does not describe a valid graph: {exc}") from exc
        config = RenderConfig()
        svg = render_svg(graph, layout_graph(graph, LayoutConfig(), args.layout_seed), config)
        data = svg.encode() if args.format == "svg" else rasterize(svg, config.image_side, args.format)
        if args.out:
            Path(args.out).write_bytes(data)
        else:
            sys.stdout.buffer.write(data)
        return 0
    manifest = _load_manifest(args.manifest)
    m = Path(args.manifest)
    out = Path(args.out) if args.out else (m if m.is_dir() else m.parent)
    config = manifest.config
    selected = [s for s in manifest.samples
                if (not args.split or s.split in args.split) and (not args.ids or s.id in args.ids)]
    if args.ids:
        unknown = set(args.ids) - {s.id for s in manifest.samples}
        if unknown:
            raise InputError(f"unknown sample id(s): {', '.join(sorted(unknown))}")
    for s in selected:
        svg = render_svg(s.graph, layout_graph(s.graph, config.layout, s.layout_seed), config.render)
        target = out / "images" / s.split / f"{s.id}.{args.format}"
        target.parent.mkdir(parents=True, exist_ok=True)
        if args.format == "svg":
            target.write_text(svg, encoding="utf-8")
        else:
            meta = {"id": s.id, "layout_seed": str(s.layout_seed)} if args.format == "png" else None
            target.write_bytes(rasterize(svg, config.render.image_side, args.format, meta))
    print(f"rendered {len(selected)} image(s) under {out / 'images'}")
    return 0


def cmd_probe(args) -> int:
    manifest = _load_manifest(args.manifest)
    table = _load_embeddings(args.embeddings, manifest)
    _require_ids(table, [s.id for s in manifest.samples if s.split in ("train", "test")], "train/test")
    config = ProbeConfig(args.reg, args.tol, args.max_iter, args.balance_seed,
                         not args.no_balance_train, not args.no_balance_eval)
    report = run_probing(manifest, table, config)
    result = report.to_dict()
    result["probe_config"] = dataclasses.asdict(config)
    path = _write_report(args, "probe", result)
    print(format_table([summary_row(args.method or Path(args.embeddings).stem, report)]))
    if report.skipped:
        print(f"skipped {len(report.skipped)} task(s); see {path}")
    print(f"report: {path}")
    return 0


def cmd_retrieve(args) -> int:
    manifest = _load_manifest(args.manifest)
    corpus = _load_embeddings(args.embeddings, manifest)
    _require_ids(corpus, [s.id for s in manifest.split("test")], "test")
    if args.query_embeddings:
        queries = _load_embeddings(args.query_embeddings, manifest)
    else:
        query_ids = [s.id for s in manifest.split("query") if s.id in corpus]
        if not query_ids:
            raise InputError("no query embeddings found; pass --query-embeddings")
        queries = corpus.subset(query_ids)
    try:
        report = run_retrieval(manifest, queries, corpus, args.cutoff)
    except (ValueError, KeyError) as exc:
        raise InputError(str(exc)) from exc
    path = _write_report(args, "retrieve", report.to_dict())
    print(format_table([summary_row(args.method or Path(args.embeddings).stem, None, report)]))
    print(f"report: {path}")
    return 0


def _load_predictions(path) -> dict[str, str]:
    if not Path(path).exists():
        raise InputError(f"predictions file not found: {path}")
    preds = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                sid = str(rec["id"])
                text = next(rec[k] for k in PREDICTION_FIELDS if k in rec)
            except (ValueError, KeyError, TypeError, StopIteration) as exc:
                raise InputError(f"{path}:{lineno}: malformed prediction record") from exc
            if sid in preds:
                raise InputError(f"{path}:{lineno}: duplicate prediction id {sid!r}")
            preds[sid] = "" if text is None else str(text)
    return preds


def cmd_score_captions(args) -> int:
    manifest = _load_manifest(args.manifest)
    splits = args.split or ["test"]
    gold = {s.id: s.graph for s in manifest.samples if s.split in splits}
    preds = _load_predictions(args.pred)
    try:
        score = score_captions(preds, gold)
    except UnknownSampleId as exc:
        raise InputError(str(exc)) from exc
    missing = len(set(gold) - set(preds))
    result = score.to_dict()
    result.update({"gold_splits": splits, "n_gold": len(gold), "n_missing_predictions": missing})
    path = _write_report(args, "captions", result)
    print(f"{args.method or Path(args.pred).stem}: F1 {score.f1:.3f}  precision {score.precision:.3f}  "
          f"recall {score.recall:.3f}  (TP {score.true_positives}, FP {score.false_positives}, "
          f"FN {score.false_negatives}; {missing} missing of {len(gold)})")
    print(f"report: {path}")
    return 0


def cmd_baseline(args) -> int:
    manifest = _load_manifest(args.manifest)
    probe, retrieval = random_baseline(manifest, args.dim, args.seed, cutoff=args.cutoff)
    result = {"probe": probe.to_dict(), "retrieval": retrieval.to_dict() if retrieval else None}
    path = _write_report(args, "baseline", result)
    print(format_table([summary_row(args.method or "Random", probe, retrieval)]))
    if retrieval is not None:
        print(f"expected MAP@{args.cutoff} under random ranking: {retrieval.expected_random_map():.4f}")
    print(f"report: {path}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "render": cmd_render,
    "probe": cmd_probe,
    "retrieve": cmd_retrieve,
    "score-captions": cmd_score_captions,
    "baseline": cmd_baseline,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DiagramBenchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
