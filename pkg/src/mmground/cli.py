"""Command-line entry point exposing the pipeline stages as subcommands.

Stages read declared inputs and write declared outputs so the full chain
(ingest -> index -> ground -> assemble -> stats) is lossless and equals a
single-process run. Exit codes: 0 success, 1 runtime failure, 2 missing
input, 3 validation failure; failures also emit one machine-readable JSON
line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import assembly, bench, kg
from .concreteness import load_lexicon
from .config import PipelineConfig, dump_config, load_config, resolve_embedding_paths
from .downstream import build_phrase_table, retrieve_for_captioning, retrieve_for_vqa
from .embeddings import EmbeddingStore, load_store
from .errors import FormatError, MMGroundError
from .nounindex import CaptionRecord, SkipReport, build_index, load_index, save_index
from .tagger import LexiconNounTagger
from .webground import LocalManifestFetcher

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_MISSING_INPUT = 2
EXIT_VALIDATION = 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _fail(code: int, message: str) -> "CliError":
    return CliError(code, message)


def _require(path: str, what: str) -> Path:
    if not path:
        raise _fail(EXIT_MISSING_INPUT, f"missing required input: {what}")
    p = Path(path)
    if not p.exists():
        raise _fail(EXIT_MISSING_INPUT, f"{what} not found: {path}")
    return p


def _load_emb(path: str, what: str) -> EmbeddingStore:
    p = _require(path, what)
    with open(p, "rb") as fh:
        return load_store(fh)


def _effective_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = {
        "concreteness_threshold": args.concreteness_threshold,
        "sim_threshold": args.sim_threshold,
        "retain_k": args.retain_k,
        "prefilter_m": args.prefilter_m,
        "fetch_max": args.fetch_max,
        "seed": args.seed,
        "worker_bound": args.workers,
        "triples": args.triples,
        "captions": args.captions,
        "phrase_embeddings": getattr(args, "phrase_embeddings", None),
        "noun_embeddings": getattr(args, "noun_embeddings", None),
        "image_embeddings": getattr(args, "image_embeddings", None),
        "lexicon": args.lexicon,
        "fetch_manifest": args.manifest,
        "index_path": getattr(args, "index", None),
        "out": args.out,
    }
    try:
        config = load_config(args.config, overrides)
    except FileNotFoundError as exc:
        raise _fail(EXIT_MISSING_INPUT, f"config file not found: {exc.filename}")
    except ValueError as exc:
        raise _fail(EXIT_VALIDATION, str(exc))
    resolve_embedding_paths(config, getattr(args, "embeddings", None))
    return config


def _grounding_config(config: PipelineConfig) -> assembly.GroundingConfig:
    return assembly.GroundingConfig(
        concreteness_threshold=config.concreteness_threshold,
        sim_threshold=config.sim_threshold,
        retain_k=config.retain_k,
        prefilter_m=config.prefilter_m,
        fetch_max=config.fetch_max,
        fetch_retries=config.fetch_retries,
        fetch_backoff=config.fetch_backoff,
        worker_bound=config.worker_bound,
    )


def cmd_ingest(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    path = _require(config.triples, "--triples")
    if not config.out:
        raise _fail(EXIT_MISSING_INPUT, "missing required input: --out")
    with open(path, "r", encoding="utf-8") as fh:
        triples, report = kg.parse_triples(fh)
    with open(config.out, "w", encoding="utf-8") as out:
        kg.write_triples(triples, out)
    summary = {"triples": len(triples), "rejected": report.counts,
               "comment_lines": report.comment_lines}
    print(json.dumps(summary))
    return EXIT_OK


def cmd_index(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    captions = _require(config.captions, "--captions")
    noun_store = _load_emb(config.noun_embeddings, "--noun-embeddings")
    if not config.out:
        raise _fail(EXIT_MISSING_INPUT, "missing required input: --out")
    records = _read_captions(captions)
    skips = SkipReport()
    tagger = LexiconNounTagger()
    index = build_index(records, tagger, noun_store, dim=noun_store.dim,
                        workers=config.worker_bound, skip_report=skips)
    with open(config.out, "wb") as out:
        save_index(index, out)
    print(json.dumps({"nouns": len(index), "images": len({i for p in index.postings.values() for i in p}),
                      "nouns_without_embeddings": len(index.missing_embeddings)}))
    return EXIT_OK


def _read_captions(path: Path) -> list[CaptionRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.rstrip("\n")
            if not stripped.strip() or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) < 3:
                raise FormatError("caption row needs image_id, source, caption", line=line_no)
            records.append(CaptionRecord(image_id=parts[0], caption=parts[2], source=parts[1]))
    return records


def _pipeline_inputs(config: PipelineConfig):
    with open(_require(config.triples, "--triples"), "r", encoding="utf-8") as fh:
        triples, _report = kg.parse_triples(fh)
    with open(_require(config.lexicon, "--lexicon"), "r", encoding="utf-8") as fh:
        lexicon = load_lexicon(fh)
    with open(_require(config.index_path, "--index"), "rb") as fh:
        index = load_index(fh)
    image_store = _load_emb(config.image_embeddings, "--image-embeddings")
    phrase_store = _load_emb(config.phrase_embeddings, "--phrase-embeddings")
    fetch_path = _require(config.fetch_manifest, "--manifest")
    with open(fetch_path, "r", encoding="utf-8") as fh:
        fetcher = LocalManifestFetcher.from_file(fh, embedding_store=image_store)
    return triples, lexicon, index, image_store, phrase_store, fetcher


def _groundings_to_json(groundings) -> str:
    lines = []
    for key in groundings:
        g = groundings[key]
        lines.append(json.dumps({
            "phrase": key,
            "ranked": [{"id": i, "score": s} for i, s in g.ranked],
            "sims_used": g.sims_used,
            "route": assembly._route_to_json(g.route_taken),
            "no_candidates": g.no_candidates,
        }, ensure_ascii=False, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")


def _groundings_from_json(source) -> dict:
    from .nounindex import GroundingResult
    out = {}
    for line_no, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            rec = json.loads(stripped)
        except json.JSONDecodeError:
            raise FormatError("grounding record is not valid JSON", line=line_no)
        for fld in ("phrase", "ranked", "sims_used", "route"):
            if fld not in rec:
                raise FormatError(f"grounding record missing {fld!r}", line=line_no)
        out[rec["phrase"]] = GroundingResult(
            phrase_id=rec["phrase"],
            ranked=[(str(x["id"]), float(x["score"])) for x in rec["ranked"]],
            sims_used=int(rec["sims_used"]),
            route_taken=assembly._route_from_json(rec["route"], line_no),
            no_candidates=bool(rec.get("no_candidates", False)),
        )
    return out


def cmd_ground(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    if not config.out:
        raise _fail(EXIT_MISSING_INPUT, "missing required input: --out")
    triples, lexicon, index, image_store, phrase_store, fetcher = _pipeline_inputs(config)
    skips = SkipReport()
    phrases = assembly.unique_phrases(triples)
    groundings = assembly.ground_unique_phrases(
        phrases, lexicon, index, image_store, fetcher,
        _grounding_config(config), phrase_store, skip_report=skips,
    )
    with open(config.out, "w", encoding="utf-8") as out:
        out.write(_groundings_to_json(groundings))
    print(json.dumps({"phrases": len(groundings), "skips": skips.counts}))
    return EXIT_OK


def cmd_assemble(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    if not config.out:
        raise _fail(EXIT_MISSING_INPUT, "missing required input: --out")
    triples, lexicon, index, image_store, phrase_store, fetcher = _pipeline_inputs(config)
    manifest = assembly.ImageManifest()
    for rec in _read_captions(Path(config.captions)) if config.captions else []:
        manifest.add(rec.image_id, rec.source, f"corpus://{rec.source}/{rec.image_id}", rec.caption)
    skips = SkipReport()
    if args.groundings:
        with open(_require(args.groundings, "--groundings"), "r", encoding="utf-8") as fh:
            groundings = _groundings_from_json(fh)
        for query, hits in fetcher.entries.items():
            for image_id, uri in hits:
                if image_id not in manifest:
                    manifest.add(image_id, "web", uri)
        graph = assembly.decorate_triples(triples, groundings)
        stats = assembly.compute_stats(graph, lexicon)
    else:
        graph, stats, skips = assembly.ground_all(
            triples, lexicon, index, image_store, fetcher,
            _grounding_config(config), phrase_store, manifest=manifest,
        )
    with open(config.out, "w", encoding="utf-8") as out:
        assembly.write_graph(graph, manifest, out)
    if args.manifest_out:
        with open(args.manifest_out, "w", encoding="utf-8") as out:
            manifest.write(out)
    print(json.dumps({"triples": len(graph), "unique_phrases": stats.unique_phrases,
                      "image_links": stats.total_image_links, "skips": skips.counts}))
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    graph_path = _require(args.graph, "--graph")
    with open(_require(config.lexicon, "--lexicon"), "r", encoding="utf-8") as fh:
        lexicon = load_lexicon(fh)
    with open(graph_path, "r", encoding="utf-8") as fh:
        graph = assembly.read_graph(fh)
    stats = assembly.compute_stats(graph, lexicon)
    if config.out:
        with open(config.out, "w", encoding="utf-8") as out:
            assembly.write_stats(stats, out)
    else:
        assembly.write_stats(stats, sys.stdout)
    return EXIT_OK


def _read_query_embedding(spec: str):
    """Query vector from an 'emb1path:ID' reference or a float-list file."""
    if ":" in spec:
        path, _, key = spec.rpartition(":")
        store = _load_emb(path, "query embedding store")
        vec = store.get(key)
        if vec is None:
            raise _fail(EXIT_VALIDATION, f"id {key!r} not found in {path}")
        return vec
    p = _require(spec, "query embedding file")
    text = p.read_text(encoding="utf-8").replace(",", " ").split()
    try:
        return [float(x) for x in text]
    except ValueError:
        raise _fail(EXIT_VALIDATION, f"{spec} is not a float list")


def cmd_retrieve(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    with open(_require(args.graph, "--graph"), "r", encoding="utf-8") as fh:
        graph = assembly.read_graph(fh)
    phrase_store = _load_emb(config.phrase_embeddings, "--phrase-embeddings")
    table = build_phrase_table(graph, phrase_store)
    k = args.k
    if args.mode == "vqa":
        if not args.image_emb or not args.question_emb:
            raise _fail(EXIT_MISSING_INPUT, "vqa mode needs --image-emb and --question-emb")
        image_emb = _read_query_embedding(args.image_emb)
        question_emb = _read_query_embedding(args.question_emb)
        result = retrieve_for_vqa(table, image_emb, question_emb, k)
    else:
        if not args.image_emb:
            raise _fail(EXIT_MISSING_INPUT, "captioning mode needs --image-emb")
        image_store = _load_emb(config.image_embeddings, "--image-embeddings")
        image_emb = _read_query_embedding(args.image_emb)
        result = retrieve_for_captioning(table, image_emb, k, image_store,
                                         aggregate=args.aggregate)
    sink = open(config.out, "w", encoding="utf-8") if config.out else sys.stdout
    try:
        for phrase_id, score in result.ranked_phrases:
            sink.write(f"{phrase_id}\t{score:.6f}\t{phrase_id}\n")
    finally:
        if sink is not sys.stdout:
            sink.close()
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    result = bench.run_bench(
        seed=config.seed,
        n_images=args.images,
        n_phrases=args.phrases,
        dim=args.dim,
        prefilter_m=config.prefilter_m,
        sim_threshold=config.sim_threshold,
        retain_k=config.retain_k,
    )
    bench.print_bench(result, sys.stdout)
    if not result.agreement:
        raise _fail(EXIT_RUNTIME, "indexed retrieval disagreed with the restricted oracle")
    return EXIT_OK


def cmd_dump_config(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    if config.out:
        dump_config(config, config.out)
    else:
        config.dump(sys.stdout)
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="config file (or $MMGROUND_CONFIG)")
    parser.add_argument("--triples", default=None)
    parser.add_argument("--captions", default=None)
    parser.add_argument("--embeddings", default=None,
                        help="directory holding phrases.emb1, nouns.emb1, images.emb1")
    parser.add_argument("--phrase-embeddings", dest="phrase_embeddings", default=None)
    parser.add_argument("--noun-embeddings", dest="noun_embeddings", default=None)
    parser.add_argument("--image-embeddings", dest="image_embeddings", default=None)
    parser.add_argument("--lexicon", default=None)
    parser.add_argument("--manifest", default=None, help="local fetch manifest")
    parser.add_argument("--index", default=None, help="noun index (NIX1) path")
    parser.add_argument("--out", default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--concreteness-threshold", dest="concreteness_threshold",
                        type=float, default=None)
    parser.add_argument("--sim-threshold", dest="sim_threshold", type=float, default=None)
    parser.add_argument("--retain-k", dest="retain_k", type=int, default=None)
    parser.add_argument("--prefilter-m", dest="prefilter_m", type=int, default=None)
    parser.add_argument("--fetch-max", dest="fetch_max", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmground",
                                     description="Noun-indexed image grounding pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and normalize a triple file")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build the noun index from captions")
    _add_common(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("ground", help="route and ground unique phrases")
    _add_common(p)
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("assemble", help="decorate triples into the graph file")
    _add_common(p)
    p.add_argument("--groundings", default=None, help="precomputed groundings (from `ground`)")
    p.add_argument("--manifest-out", dest="manifest_out", default=None)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("stats", help="per-relation statistics of a graph file")
    _add_common(p)
    p.add_argument("--graph", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("retrieve", help="phrase retrieval for downstream tasks")
    _add_common(p)
    p.add_argument("mode", choices=["vqa", "captioning"])
    p.add_argument("--graph", default=None)
    p.add_argument("--image-emb", dest="image_emb", default=None,
                   help="EMB1 path:ID or a text file of floats")
    p.add_argument("--question-emb", dest="question_emb", default=None)
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--aggregate", choices=["max", "mean"], default="max")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("bench", help="brute-force vs indexed similarity counts")
    _add_common(p)
    p.add_argument("--images", type=int, default=10_000)
    p.add_argument("--phrases", type=int, default=100)
    p.add_argument("--dim", type=int, default=64)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dump-config", help="print the effective configuration")
    _add_common(p)
    p.set_defaults(func=cmd_dump_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(json.dumps({"error": str(exc), "code": exc.code}), file=sys.stderr)
        return exc.code
    except FormatError as exc:
        print(json.dumps({"error": str(exc), "code": EXIT_VALIDATION}), file=sys.stderr)
        return EXIT_VALIDATION
    except MMGroundError as exc:
        print(json.dumps({"error": str(exc), "code": EXIT_RUNTIME}), file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}", "code": EXIT_RUNTIME}),
              file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
