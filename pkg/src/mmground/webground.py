"""Web-route grounding: query building, a pluggable fetch channel, re-ranking.

Abstract phrases are grounded by fetching candidate images through a fetcher
contract and re-ranking them with the same cosine criterion as the indexed
route. The engine never sees fetcher internals; the shipped manifest fetcher
serves deterministic offline results, and ExchangeClient speaks the
line-delimited request/response protocol an external fetch service (such as
the encoder bridge) can implement.

Note: the fetch size (default 10) and the retained k (default 15) are
independent knobs; a web-only phrase can retain at most as many images as
were fetched, so k > fetch size only matters when web candidates are merged
with similarity-matched ones.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import IO, Callable, Iterable, Protocol, runtime_checkable

import numpy as np

from .concreteness import Route, RouteKind, load_stopwords
from .embeddings import EmbeddingStore, SimCounter, VectorLike, rank_ids
from .errors import EmptyQueryError, FetchError
from .kg import Phrase
from .nounindex import (
    DEFAULT_RETAIN_K,
    DEFAULT_SIM_THRESHOLD,
    GroundingResult,
    SkipReport,
)

logger = logging.getLogger(__name__)

DEFAULT_FETCH_MAX = 10
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF = 0.25


@dataclass(frozen=True)
class WebQuery:
    text: str
    max_results: int = DEFAULT_FETCH_MAX

    def __post_init__(self) -> None:
        if not self.text:
            raise EmptyQueryError("web query text is empty")
        if self.max_results < 1:
            raise ValueError("max_results must be >= 1")


@dataclass
class FetchedImage:
    image_id: str
    uri: str
    embedding: np.ndarray | None = field(default=None, repr=False)


@runtime_checkable
class Fetcher(Protocol):
    def fetch(self, query: WebQuery) -> list[FetchedImage]: ...


def build_query(
    phrase: Phrase,
    max_results: int = DEFAULT_FETCH_MAX,
    stopwords: frozenset[str] | None = None,
) -> WebQuery:
    """Turn a normalized phrase into a web query.

    The query text is the normalized phrase verbatim; phrases whose tokens
    are all stopwords raise EmptyQueryError instead of producing noise.
    """
    stops = load_stopwords() if stopwords is None else stopwords
    if not phrase.normalized:
        raise EmptyQueryError("cannot build a query from an empty phrase")
    if all(t in stops for t in phrase.tokens):
        raise EmptyQueryError(f"stopword-only phrase: {phrase.normalized!r}")
    return WebQuery(text=phrase.normalized, max_results=max_results)


class LocalManifestFetcher:
    """Offline fetcher backed by a query -> images manifest file.

    Manifest lines are query_text<TAB>image_id<TAB>uri; a query returns its
    mapped images in file order, truncated to max_results. Unknown queries
    return the empty list. An embedding store may be attached so fetched
    images arrive with their vectors already resolved.
    """

    def __init__(
        self,
        entries: dict[str, list[tuple[str, str]]],
        embedding_store: EmbeddingStore | None = None,
    ):
        self.entries = entries
        self.embedding_store = embedding_store

    @classmethod
    def from_file(
        cls, source: IO[str] | Iterable[str], embedding_store: EmbeddingStore | None = None
    ) -> "LocalManifestFetcher":
        entries: dict[str, list[tuple[str, str]]] = {}
        for line_no, line in enumerate(source, start=1):
            stripped = line.rstrip("\n")
            if not stripped.strip() or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) < 3:
                raise ValueError(f"fetch manifest line {line_no}: expected query<TAB>id<TAB>uri")
            entries.setdefault(parts[0], []).append((parts[1], parts[2]))
        return cls(entries, embedding_store)

    def fetch(self, query: WebQuery) -> list[FetchedImage]:
        hits = self.entries.get(query.text, [])[: query.max_results]
        out = []
        for image_id, uri in hits:
            emb = self.embedding_store.get(image_id) if self.embedding_store else None
            out.append(FetchedImage(image_id=image_id, uri=uri, embedding=emb))
        return out


class ExchangeClient:
    """Fetcher speaking the line-delimited exchange protocol over a byte stream.

    Requests are one JSON object per line, {"query": ..., "max_results": ...};
    responses are one JSON object per line, {"images": [{"image_id", "uri"}]}
    or {"error": ...}. Embeddings travel separately as EMB1 files.
    """

    def __init__(self, reader: IO[bytes], writer: IO[bytes]):
        self._reader = reader
        self._writer = writer

    def fetch(self, query: WebQuery) -> list[FetchedImage]:
        request = {"query": query.text, "max_results": query.max_results}
        try:
            self._writer.write(json.dumps(request).encode("utf-8") + b"\n")
            self._writer.flush()
            line = self._reader.readline()
        except OSError as exc:
            raise FetchError(f"exchange transport failure: {exc}")
        if not line:
            raise FetchError("exchange stream closed")
        try:
            payload = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FetchError(f"malformed exchange response: {exc}")
        if "error" in payload:
            raise FetchError(f"exchange service error: {payload['error']}")
        images = payload.get("images")
        if not isinstance(images, list):
            raise FetchError("exchange response missing 'images' list")
        out = []
        for item in images[: query.max_results]:
            out.append(FetchedImage(image_id=str(item["image_id"]), uri=str(item.get("uri", ""))))
        return out


def fetch_with_retry(
    fetcher: Fetcher,
    query: WebQuery,
    retries: int = DEFAULT_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
    sleep: Callable[[float], None] = time.sleep,
) -> list[FetchedImage]:
    """Fetch with an exponential-backoff attempt budget.

    `retries` is the total attempt budget (default 3 attempts, backoff 250 ms
    doubling per retry). The final FetchError propagates once the budget is
    exhausted; the caller records the phrase as ungrounded.
    """
    if retries < 1:
        raise ValueError("retries must be >= 1")
    last: FetchError | None = None
    for attempt in range(retries):
        try:
            return fetcher.fetch(query)
        except FetchError as exc:
            last = exc
            if attempt < retries - 1:
                delay = backoff * (2**attempt)
                logger.warning(
                    "fetch attempt %d/%d failed for %r: %s (retrying in %.3fs)",
                    attempt + 1, retries, query.text, exc, delay,
                )
                if delay > 0:
                    sleep(delay)
    assert last is not None
    raise last


def ground_phrase_web(
    phrase_emb: VectorLike,
    fetched: list[FetchedImage],
    sim_threshold: float = DEFAULT_SIM_THRESHOLD,
    k: int = DEFAULT_RETAIN_K,
    counter: SimCounter | None = None,
    phrase_id: str = "",
    route_taken: Route | None = None,
    skip_report: SkipReport | None = None,
) -> GroundingResult:
    """Re-rank fetched candidates with the embedding criterion.

    Images lacking embeddings are dropped and counted; survivors are ranked
    by cosine, thresholded, and cut to the top k. An empty retained list
    (nothing fetched, or nothing above threshold) is flagged no_candidates,
    never an error.
    """
    if not 0.0 <= sim_threshold <= 1.0:
        raise ValueError("sim_threshold must be in [0, 1]")
    if k < 1:
        raise ValueError("k must be >= 1")
    counter = counter if counter is not None else SimCounter()
    start = counter.count
    if route_taken is None:
        route_taken = Route(RouteKind.WEB_SEARCH, None)
    # The query keeps caller precision; only stored vectors are f32.
    phrase_vec = np.asarray(phrase_emb)
    scorable = EmbeddingStore(phrase_vec.shape[0])
    for img in fetched:
        if img.embedding is None:
            if skip_report is not None:
                skip_report.add("fetched-missing-embedding", img.image_id)
            continue
        scorable.add(img.image_id, img.embedding)
    ranked = rank_ids(scorable, scorable.ids(), phrase_vec, counter)
    kept = [(i, s) for i, s in ranked if s >= sim_threshold][:k]
    return GroundingResult(
        phrase_id=phrase_id,
        ranked=kept,
        sims_used=counter.count - start,
        route_taken=route_taken,
        no_candidates=not kept,
    )
