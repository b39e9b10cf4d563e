"""Noun-indexed candidate pruning for phrase-to-image retrieval.

Caption nouns are organized into an inverted index mapping each lemma to the
images whose captions mention it. Retrieval then runs in two stages: the
phrase embedding is compared against the (small) noun vocabulary to pick the
top-m nouns, and fine-grained phrase-to-image similarity is computed only
over the union of those nouns' posting lists. The similarity counter makes
the resulting computation reduction measurable against brute force.
"""

from __future__ import annotations

import logging
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Callable, Iterable, Mapping, Sequence

import numpy as np

from .concreteness import Route
from .embeddings import (
    EmbeddingStore,
    SimCounter,
    VectorLike,
    _parse_emb1,
    rank_ids,
    save_store,
)
from .errors import DuplicateIdError, FormatError
from .tagger import NounTagger

logger = logging.getLogger(__name__)

NIX1_MAGIC = b"NIX1"

DEFAULT_PREFILTER_M = 20
DEFAULT_SIM_THRESHOLD = 0.15
DEFAULT_RETAIN_K = 15

#: id -> embedding source for noun vectors; None marks "no embedding known".
NounEmbedder = Callable[[str], np.ndarray | None]


@dataclass(frozen=True)
class CaptionRecord:
    """One captioned image from a corpus stream."""

    image_id: str
    caption: str
    source: str = ""


@dataclass
class SkipReport:
    """Reason -> count of items a stage had to leave behind.

    Safe to share across grounding workers; adds are serialized.
    """

    counts: dict[str, int] = field(default_factory=dict)
    items: list[tuple[str, str]] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, reason: str, detail: str = "") -> None:
        with self._lock:
            self.counts[reason] = self.counts.get(reason, 0) + 1
            self.items.append((reason, detail))

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass
class GroundingResult:
    """Ranked image evidence for one phrase plus computation telemetry.

    no_candidates marks an empty outcome: for the indexed route an empty
    candidate set, for the web route an empty retained list.
    """

    phrase_id: str
    ranked: list[tuple[str, float]]
    sims_used: int
    route_taken: Route | None = None
    no_candidates: bool = False


class NounIndex:
    """Inverted index: lemmatized noun -> sorted unique image ids."""

    def __init__(self, dim: int):
        self.postings: dict[str, list[str]] = {}
        self.noun_embeddings = EmbeddingStore(dim)
        self.missing_embeddings: tuple[str, ...] = ()

    @property
    def dim(self) -> int:
        return self.noun_embeddings.dim

    def nouns(self) -> list[str]:
        return sorted(self.postings)

    def __len__(self) -> int:
        return len(self.postings)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NounIndex):
            return NotImplemented
        return self.postings == other.postings and self.noun_embeddings == other.noun_embeddings


def extract_nouns(caption: str, tagger: NounTagger) -> list[str]:
    """Unique lowercase noun lemmas of a caption, first-occurrence order.

    A tagger failure is never fatal: it logs a warning and yields no nouns.
    """
    try:
        tagged = tagger.nouns(caption)
    except Exception:
        logger.warning("tagger failed on caption %r; skipping", caption[:80])
        return []
    seen: set[str] = set()
    out: list[str] = []
    for noun in tagged:
        lemma = noun.lower()
        if lemma and lemma not in seen:
            seen.add(lemma)
            out.append(lemma)
    return out


def _coerce_embedder(source: NounEmbedder | Mapping[str, np.ndarray] | EmbeddingStore) -> NounEmbedder:
    if isinstance(source, EmbeddingStore):
        return source.get
    if isinstance(source, Mapping):
        return source.get
    return source


def _index_shard(records: Sequence[CaptionRecord], tagger: NounTagger) -> dict[str, set[str]]:
    postings: dict[str, set[str]] = {}
    for rec in records:
        for noun in extract_nouns(rec.caption, tagger):
            postings.setdefault(noun, set()).add(rec.image_id)
    return postings


def build_index(
    corpus: Iterable[CaptionRecord],
    tagger: NounTagger,
    noun_embedder: NounEmbedder | Mapping[str, np.ndarray] | EmbeddingStore,
    dim: int | None = None,
    workers: int = 1,
    skip_report: SkipReport | None = None,
) -> NounIndex:
    """Build the inverted index over a caption corpus.

    The corpus may be partitioned across workers; the merged result is
    identical to a sequential build. Nouns with no available embedding are
    kept in postings (exact-match lookup still works) but excluded from the
    prefilter vocabulary and recorded in the skip report.
    """
    records = list(corpus)
    seen_ids: set[str] = set()
    for rec in records:
        if rec.image_id in seen_ids:
            raise DuplicateIdError(f"duplicate image_id in corpus: {rec.image_id!r}")
        if not rec.image_id:
            raise ValueError("caption record with empty image_id")
        seen_ids.add(rec.image_id)

    merged: dict[str, set[str]] = {}
    if workers > 1 and len(records) > 1:
        shard_size = (len(records) + workers - 1) // workers
        shards = [records[i : i + shard_size] for i in range(0, len(records), shard_size)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for shard_postings in pool.map(lambda s: _index_shard(s, tagger), shards):
                for noun, ids in shard_postings.items():
                    merged.setdefault(noun, set()).update(ids)
    else:
        merged = _index_shard(records, tagger)

    embedder = _coerce_embedder(noun_embedder)
    first_vec = None
    if dim is None:
        for noun in sorted(merged):
            first_vec = embedder(noun)
            if first_vec is not None:
                dim = int(np.asarray(first_vec).shape[0])
                break
        if dim is None:
            dim = 1  # empty or fully-unembedded index; prefilter will be empty
    index = NounIndex(dim)
    missing: list[str] = []
    for noun in sorted(merged):
        index.postings[noun] = sorted(merged[noun])
        vec = embedder(noun)
        if vec is None:
            missing.append(noun)
            if skip_report is not None:
                skip_report.add("noun-missing-embedding", noun)
        else:
            index.noun_embeddings.add(noun, vec)
    index.missing_embeddings = tuple(missing)
    return index


def candidate_images(
    index: NounIndex,
    phrase_emb: VectorLike,
    m: int = DEFAULT_PREFILTER_M,
    counter: SimCounter | None = None,
) -> set[str]:
    """Stage-one pruning: union of posting lists of the top-m nouns.

    Nouns are ranked by cosine between the phrase embedding and each noun
    embedding; exactly |embedded noun vocabulary| similarity evaluations are
    counted. An empty index yields the empty set.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    vocab = index.noun_embeddings.ids()
    if not vocab:
        return set()
    ranked_nouns = rank_ids(index.noun_embeddings, vocab, phrase_emb, counter)
    out: set[str] = set()
    for noun, _score in ranked_nouns[:m]:
        out.update(index.postings.get(noun, ()))
    return out


def ground_phrase_indexed(
    phrase_emb: VectorLike,
    index: NounIndex,
    image_store: EmbeddingStore,
    m: int = DEFAULT_PREFILTER_M,
    sim_threshold: float = DEFAULT_SIM_THRESHOLD,
    k: int = DEFAULT_RETAIN_K,
    counter: SimCounter | None = None,
    phrase_id: str = "",
    route_taken: Route | None = None,
    skip_report: SkipReport | None = None,
) -> GroundingResult:
    """Two-stage pruned retrieval: noun prefilter, then phrase-level ranking.

    The result is the top-k of cosine(phrase, image) over the candidate set
    only, scores below sim_threshold removed. sims_used records exactly
    |embedded noun vocabulary| + |scored candidates|. An empty ranked list
    signals the caller to escalate the phrase to the web route.
    """
    if not 0.0 <= sim_threshold <= 1.0:
        raise ValueError("sim_threshold must be in [0, 1]")
    if k < 1:
        raise ValueError("k must be >= 1")
    counter = counter if counter is not None else SimCounter()
    start = counter.count
    cands = candidate_images(index, phrase_emb, m, counter)
    present = []
    for cid in sorted(cands):
        if cid in image_store:
            present.append(cid)
        elif skip_report is not None:
            skip_report.add("candidate-missing-embedding", cid)
    ranked = rank_ids(image_store, present, phrase_emb, counter)
    kept = [(i, s) for i, s in ranked if s >= sim_threshold][:k]
    return GroundingResult(
        phrase_id=phrase_id,
        ranked=kept,
        sims_used=counter.count - start,
        route_taken=route_taken,
        no_candidates=not cands,
    )


def save_index(index: NounIndex, sink: IO[bytes]) -> int:
    """Write the NIX1 binary layout; deterministic for equal indexes.

    Layout: magic "NIX1"; u32 LE image-id table length then length-prefixed
    UTF-8 ids (ascending); u32 LE noun count then per noun its
    length-prefixed UTF-8 bytes, u32 LE posting length and u32 LE indices
    into the image-id table; finally an embedded EMB1 block with the noun
    embeddings.
    """
    image_ids = sorted({i for ids in index.postings.values() for i in ids})
    id_row = {img: n for n, img in enumerate(image_ids)}
    written = 0
    written += sink.write(NIX1_MAGIC)
    written += sink.write(struct.pack("<I", len(image_ids)))
    for img in image_ids:
        raw = img.encode("utf-8")
        written += sink.write(struct.pack("<I", len(raw)))
        written += sink.write(raw)
    written += sink.write(struct.pack("<I", len(index.postings)))
    for noun in sorted(index.postings):
        raw = noun.encode("utf-8")
        written += sink.write(struct.pack("<I", len(raw)))
        written += sink.write(raw)
        posting = index.postings[noun]
        written += sink.write(struct.pack("<I", len(posting)))
        written += sink.write(struct.pack(f"<{len(posting)}I", *(id_row[i] for i in posting)))
    written += save_store(index.noun_embeddings, sink)
    return written


def load_index(source: IO[bytes] | bytes) -> NounIndex:
    """Read a NIX1 file; raises FormatError with the failing byte offset."""
    data = source if isinstance(source, bytes) else source.read()
    pos = 0

    def need(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"truncated {what}", offset=pos)
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    def read_str(what: str) -> str:
        off = pos
        length = struct.unpack("<I", need(4, f"{what} length"))[0]
        raw = need(length, f"{what} bytes")
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{what} is not valid UTF-8 ({exc.reason})", offset=off + 4)

    magic = need(4, "magic")
    if magic != NIX1_MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    n_images = struct.unpack("<I", need(4, "image table length"))[0]
    image_ids = [read_str("image id") for _ in range(n_images)]
    n_nouns = struct.unpack("<I", need(4, "noun count"))[0]
    postings: dict[str, list[str]] = {}
    for _ in range(n_nouns):
        noun = read_str("noun")
        if noun in postings:
            raise DuplicateIdError(f"duplicate noun in index: {noun!r}")
        p_off = pos
        p_len = struct.unpack("<I", need(4, "posting length"))[0]
        rows = struct.unpack(f"<{p_len}I", need(p_len * 4, "posting entries"))
        try:
            postings[noun] = [image_ids[r] for r in rows]
        except IndexError:
            raise FormatError("posting references unknown image row", offset=p_off)
    store, consumed = _parse_emb1(data[pos:], offset_base=pos)
    if pos + consumed != len(data):
        raise FormatError("trailing bytes after noun embeddings", offset=pos + consumed)
    index = NounIndex(store.dim)
    index.postings = postings
    index.noun_embeddings = store
    index.missing_embeddings = tuple(n for n in sorted(postings) if n not in store)
    return index
