"""Pipeline orchestration: route + ground every phrase, build and persist the
multimodal graph, and compute per-relation aggregate statistics.

Each unique normalized phrase is grounded exactly once and the result is
reused across every triple slot that mentions it, so grounding cost scales
with unique phrases rather than triples. Grounding may fan out over a
bounded worker pool; the join is deterministic regardless of scheduling.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

from .concreteness import ConcretenessLexicon, Route, RouteKind, phrase_concreteness, route
from .embeddings import EmbeddingStore, SimCounter
from .errors import EmptyQueryError, FetchError, FormatError
from .kg import RELATION_NAMES, Phrase, Relation, Triple, normalize_phrase
from .nounindex import GroundingResult, NounIndex, SkipReport, ground_phrase_indexed
from .webground import Fetcher, build_query, fetch_with_retry, ground_phrase_web


@dataclass
class GroundingConfig:
    """Pipeline constants; defaults are the published operating point."""

    concreteness_threshold: float = 4.0
    sim_threshold: float = 0.15
    retain_k: int = 15
    prefilter_m: int = 20
    fetch_max: int = 10
    fetch_retries: int = 3
    fetch_backoff: float = 0.25
    worker_bound: int = 4


@dataclass
class MultimodalTriple:
    """A triple decorated with ranked image evidence for both phrases."""

    triple: Triple
    head_images: list[tuple[str, float]]
    tail_images: list[tuple[str, float]]
    head_route: Route
    tail_route: Route


@dataclass(frozen=True)
class ManifestEntry:
    source: str
    uri: str
    caption: str = ""


class ImageManifest:
    """image_id -> provenance for every image referenced by the graph."""

    def __init__(self) -> None:
        self.entries: dict[str, ManifestEntry] = {}

    def add(self, image_id: str, source: str, uri: str, caption: str = "") -> None:
        # Captions are free text; keep the TSV single-line and tab-free.
        clean = " ".join(caption.split())
        self.entries[image_id] = ManifestEntry(source=source, uri=uri, caption=clean)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def write(self, sink: IO[str]) -> None:
        for image_id in sorted(self.entries):
            e = self.entries[image_id]
            sink.write(f"{image_id}\t{e.source}\t{e.uri}\t{e.caption}\n")

    @classmethod
    def read(cls, source: IO[str] | Iterable[str]) -> "ImageManifest":
        manifest = cls()
        for line_no, line in enumerate(source, start=1):
            stripped = line.rstrip("\n")
            if not stripped.strip() or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) < 3:
                raise FormatError("manifest row needs image_id, source, uri", line=line_no)
            caption = parts[3] if len(parts) > 3 else ""
            manifest.add(parts[0], parts[1], parts[2], caption)
        return manifest


@dataclass
class RelationStats:
    triple_count: int = 0
    avg_concreteness: float | None = None
    pct_heads_web: float = 0.0
    pct_tails_web: float = 0.0


@dataclass
class GraphStats:
    per_relation: dict[str, RelationStats] = field(
        default_factory=lambda: {name: RelationStats() for name in RELATION_NAMES}
    )
    triples: int = 0
    unique_phrases: int = 0
    total_image_links: int = 0
    unique_images: int = 0


def ground_all(
    triples: list[Triple],
    lexicon: ConcretenessLexicon,
    index: NounIndex,
    image_store: EmbeddingStore,
    fetcher: Fetcher,
    config: GroundingConfig,
    phrase_store: EmbeddingStore,
    manifest: ImageManifest | None = None,
    counter: SimCounter | None = None,
) -> tuple[list[MultimodalTriple], GraphStats, SkipReport]:
    """Ground every triple's head and tail phrase and assemble the graph.

    Phrase embeddings come from phrase_store keyed by normalized phrase
    text. Routing follows the concreteness threshold; an embedding-route
    phrase whose thresholded result is empty escalates to web retrieval.
    Nothing is fatal: phrases that cannot be grounded stay in the graph with
    empty image lists and a SkipReport entry.
    """
    skip_report = SkipReport()
    phrases = unique_phrases(triples)
    groundings = ground_unique_phrases(
        phrases, lexicon, index, image_store, fetcher, config,
        phrase_store, manifest, skip_report, counter,
    )
    graph = decorate_triples(triples, groundings)
    stats = compute_stats(graph, lexicon)
    return graph, stats, skip_report


def unique_phrases(triples: Iterable[Triple]) -> list[Phrase]:
    """Unique normalized phrases across both slots, first-appearance order."""
    seen: set[str] = set()
    out: list[Phrase] = []
    for t in triples:
        for phrase in (t.head, t.tail):
            if phrase.normalized not in seen:
                seen.add(phrase.normalized)
                out.append(phrase)
    return out


def ground_unique_phrases(
    phrases: list[Phrase],
    lexicon: ConcretenessLexicon,
    index: NounIndex,
    image_store: EmbeddingStore,
    fetcher: Fetcher,
    config: GroundingConfig,
    phrase_store: EmbeddingStore,
    manifest: ImageManifest | None = None,
    skip_report: SkipReport | None = None,
    counter: SimCounter | None = None,
) -> dict[str, GroundingResult]:
    """Ground each phrase once; the memoization unit of the whole pipeline."""
    skip_report = skip_report if skip_report is not None else SkipReport()
    total = counter if counter is not None else SimCounter()

    def ground_one(phrase: Phrase) -> GroundingResult:
        local = SimCounter()
        result = _ground_phrase(
            phrase, lexicon, index, image_store, fetcher, config,
            phrase_store, manifest, skip_report, local,
        )
        return result

    workers = max(1, config.worker_bound)
    if workers > 1 and len(phrases) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(ground_one, phrases))
    else:
        results = [ground_one(p) for p in phrases]
    out: dict[str, GroundingResult] = {}
    for phrase, result in zip(phrases, results):
        out[phrase.normalized] = result
        total.add(result.sims_used)
    return out


def _ground_phrase(
    phrase: Phrase,
    lexicon: ConcretenessLexicon,
    index: NounIndex,
    image_store: EmbeddingStore,
    fetcher: Fetcher,
    config: GroundingConfig,
    phrase_store: EmbeddingStore,
    manifest: ImageManifest | None,
    skip_report: SkipReport,
    counter: SimCounter,
) -> GroundingResult:
    key = phrase.normalized
    decided = route(phrase, lexicon, config.concreteness_threshold)
    emb = phrase_store.get(key)
    if emb is None:
        skip_report.add("missing-phrase-embedding", key)
        return GroundingResult(key, [], 0, route_taken=decided)

    if decided.kind is RouteKind.EMBEDDING_MATCH:
        result = ground_phrase_indexed(
            emb, index, image_store,
            m=config.prefilter_m, sim_threshold=config.sim_threshold,
            k=config.retain_k, counter=counter, phrase_id=key,
            route_taken=decided, skip_report=skip_report,
        )
        if result.ranked:
            return result
        # Empty after thresholding: escalate to the web route regardless of
        # concreteness; web search is the fallback for hard-to-ground phrases.
        decided = Route(RouteKind.WEB_SEARCH, decided.phrase_score)

    try:
        query = build_query(phrase, max_results=config.fetch_max)
    except EmptyQueryError:
        skip_report.add("stopword-query", key)
        return GroundingResult(key, [], counter.count, route_taken=decided)
    try:
        fetched = fetch_with_retry(
            fetcher, query, retries=config.fetch_retries, backoff=config.fetch_backoff
        )
    except FetchError:
        skip_report.add("fetch-failed", key)
        return GroundingResult(key, [], counter.count, route_taken=decided)
    for img in fetched:
        if img.embedding is None:
            img.embedding = image_store.get(img.image_id)
    result = ground_phrase_web(
        emb, fetched,
        sim_threshold=config.sim_threshold, k=config.retain_k,
        counter=counter, phrase_id=key, route_taken=decided,
        skip_report=skip_report,
    )
    result.sims_used = counter.count
    if not result.ranked:
        skip_report.add("ungrounded", key)
    if manifest is not None:
        retained = {i for i, _ in result.ranked}
        for img in fetched:
            if img.image_id in retained and img.image_id not in manifest:
                manifest.add(img.image_id, source="web", uri=img.uri)
    return result


def decorate_triples(
    triples: Iterable[Triple], groundings: Mapping[str, GroundingResult]
) -> list[MultimodalTriple]:
    """Join per-phrase groundings onto triples; a pure, order-preserving step."""
    graph = []
    for t in triples:
        head_g = groundings[t.head.normalized]
        tail_g = groundings[t.tail.normalized]
        graph.append(
            MultimodalTriple(
                triple=t,
                head_images=list(head_g.ranked),
                tail_images=list(tail_g.ranked),
                head_route=_route_of(head_g),
                tail_route=_route_of(tail_g),
            )
        )
    return graph


def _route_of(result: GroundingResult) -> Route:
    if result.route_taken is None:
        raise ValueError(f"grounding for {result.phrase_id!r} carries no route")
    return result.route_taken


def compute_stats(graph: list[MultimodalTriple], lexicon: ConcretenessLexicon) -> GraphStats:
    """Aggregate the graph into per-relation and global statistics.

    Routing percentages are over unique phrases per relation slot;
    concreteness averages are over unique phrases mentioned by the relation.
    """
    stats = GraphStats()
    heads: dict[str, dict[str, Route]] = {name: {} for name in RELATION_NAMES}
    tails: dict[str, dict[str, Route]] = {name: {} for name in RELATION_NAMES}
    phrases: dict[str, dict[str, Phrase]] = {name: {} for name in RELATION_NAMES}
    all_phrases: set[str] = set()
    all_images: set[str] = set()

    for mt in graph:
        rel = mt.triple.relation.value
        rs = stats.per_relation[rel]
        rs.triple_count += 1
        stats.triples += 1
        heads[rel][mt.triple.head.normalized] = mt.head_route
        tails[rel][mt.triple.tail.normalized] = mt.tail_route
        phrases[rel][mt.triple.head.normalized] = mt.triple.head
        phrases[rel][mt.triple.tail.normalized] = mt.triple.tail
        all_phrases.add(mt.triple.head.normalized)
        all_phrases.add(mt.triple.tail.normalized)
        stats.total_image_links += len(mt.head_images) + len(mt.tail_images)
        all_images.update(i for i, _ in mt.head_images)
        all_images.update(i for i, _ in mt.tail_images)

    for rel in RELATION_NAMES:
        rs = stats.per_relation[rel]
        scores = [
            s
            for p in phrases[rel].values()
            if (s := phrase_concreteness(p, lexicon)) is not None
        ]
        rs.avg_concreteness = sum(scores) / len(scores) if scores else None
        rs.pct_heads_web = _pct_web(heads[rel])
        rs.pct_tails_web = _pct_web(tails[rel])

    stats.unique_phrases = len(all_phrases)
    stats.unique_images = len(all_images)
    return stats


def _pct_web(routes: dict[str, Route]) -> float:
    if not routes:
        return 0.0
    web = sum(1 for r in routes.values() if r.kind is RouteKind.WEB_SEARCH)
    return 100.0 * web / len(routes)


# --- graph persistence -----------------------------------------------------

_GRAPH_FIELDS = ("head", "relation", "tail", "head_images", "tail_images", "head_route", "tail_route")


def _route_to_json(r: Route) -> dict:
    return {"kind": r.kind.value, "concreteness": r.phrase_score}


def _route_from_json(obj: dict, line_no: int) -> Route:
    try:
        kind = RouteKind(obj["kind"])
    except (KeyError, ValueError, TypeError):
        raise FormatError("record has malformed route object", line=line_no)
    score = obj.get("concreteness")
    if score is not None and not isinstance(score, (int, float)):
        raise FormatError("route concreteness must be a number or null", line=line_no)
    try:
        return Route(kind, score)
    except ValueError as exc:
        raise FormatError(str(exc), line=line_no)


def write_graph(
    graph: Iterable[MultimodalTriple],
    manifest: ImageManifest,
    sink: IO[str],
) -> int:
    """Write one JSON record per triple; every image id must resolve in the
    manifest. Returns the record count."""
    n = 0
    for mt in graph:
        for image_id, _ in list(mt.head_images) + list(mt.tail_images):
            if image_id not in manifest:
                raise ValueError(
                    f"graph references image {image_id!r} absent from the manifest"
                )
        record = {
            "head": mt.triple.head.normalized,
            "relation": mt.triple.relation.value,
            "tail": mt.triple.tail.normalized,
            "head_images": [{"id": i, "score": s} for i, s in mt.head_images],
            "tail_images": [{"id": i, "score": s} for i, s in mt.tail_images],
            "head_route": _route_to_json(mt.head_route),
            "tail_route": _route_to_json(mt.tail_route),
        }
        sink.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n")
        n += 1
    return n


def read_graph(source: IO[str] | Iterable[str]) -> list[MultimodalTriple]:
    """Inverse of write_graph; FormatError carries the failing line number."""
    graph: list[MultimodalTriple] = []
    for line_no, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            record = json.loads(stripped)
        except json.JSONDecodeError:
            raise FormatError("record is not valid JSON", line=line_no)
        if not isinstance(record, dict):
            raise FormatError("record must be a JSON object", line=line_no)
        for fld in _GRAPH_FIELDS:
            if fld not in record:
                raise FormatError(f"record missing {fld!r} field", line=line_no)
        try:
            relation = Relation(record["relation"])
        except ValueError:
            raise FormatError(f"unknown relation {record['relation']!r}", line=line_no)
        triple = Triple(
            head=normalize_phrase(record["head"]),
            relation=relation,
            tail=normalize_phrase(record["tail"]),
            source_line=line_no,
        )
        graph.append(
            MultimodalTriple(
                triple=triple,
                head_images=_images_from_json(record["head_images"], line_no),
                tail_images=_images_from_json(record["tail_images"], line_no),
                head_route=_route_from_json(record["head_route"], line_no),
                tail_route=_route_from_json(record["tail_route"], line_no),
            )
        )
    return graph


def _images_from_json(items: object, line_no: int) -> list[tuple[str, float]]:
    if not isinstance(items, list):
        raise FormatError("image list must be a JSON array", line=line_no)
    out = []
    for item in items:
        if not isinstance(item, dict) or "id" not in item or "score" not in item:
            raise FormatError("image entry needs 'id' and 'score'", line=line_no)
        out.append((str(item["id"]), float(item["score"])))
    return out


def write_stats(stats: GraphStats, sink: IO[str]) -> None:
    """Emit the three-sub-table report plus the global summary block.

    Sub-tables mirror the published layout: concreteness ascending, then
    the share of head phrases web-searched, then the tail share.
    """
    def fmt(x: float | None) -> str:
        return "-" if x is None else f"{x:.2f}"

    present = [(n, s) for n, s in stats.per_relation.items()]

    sink.write("# relation_concreteness\n")
    sink.write("relation\ttriple_count\tavg_concreteness\n")
    by_conc = sorted(present, key=lambda kv: (kv[1].avg_concreteness is None,
                                              kv[1].avg_concreteness or 0.0, kv[0]))
    for name, rs in by_conc:
        sink.write(f"{name}\t{rs.triple_count}\t{fmt(rs.avg_concreteness)}\n")

    sink.write("# heads_web_searched\n")
    sink.write("relation\tpct_heads_web\n")
    for name, rs in sorted(present, key=lambda kv: (kv[1].pct_heads_web, kv[0])):
        sink.write(f"{name}\t{fmt(rs.pct_heads_web)}\n")

    sink.write("# tails_web_searched\n")
    sink.write("relation\tpct_tails_web\n")
    for name, rs in sorted(present, key=lambda kv: (kv[1].pct_tails_web, kv[0])):
        sink.write(f"{name}\t{fmt(rs.pct_tails_web)}\n")

    sink.write("# global\n")
    sink.write(f"triples\t{stats.triples}\n")
    sink.write(f"unique_phrases\t{stats.unique_phrases}\n")
    sink.write(f"total_image_links\t{stats.total_image_links}\n")
    sink.write(f"unique_images\t{stats.unique_images}\n")
