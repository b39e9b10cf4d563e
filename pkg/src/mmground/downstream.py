"""Serve the assembled graph to downstream vision-language consumers.

Two retrieval modes: question answering scores each phrase by the sum of its
image-phrase and question-phrase cosine similarities; captioning scores a
phrase by how similar its associated images are to the input image. Both
return deterministic top-k rankings suitable for prompt builders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import MultimodalTriple
from .embeddings import EmbeddingStore, VectorLike, cosine
from .nounindex import SkipReport


@dataclass(frozen=True)
class PhraseEntry:
    phrase_id: str
    phrase_emb: np.ndarray
    associated_images: tuple[str, ...]


@dataclass
class InjectionResult:
    ranked_phrases: list[tuple[str, float]]
    k: int


def build_phrase_table(
    graph: list[MultimodalTriple],
    phrase_store: EmbeddingStore,
    skip_report: SkipReport | None = None,
) -> dict[str, PhraseEntry]:
    """Index every head and tail phrase of the graph as a retrievable entry.

    Phrases without an embedding in the store are excluded (and counted);
    associated images are the phrase's retained evidence list.
    """
    table: dict[str, PhraseEntry] = {}
    for mt in graph:
        for phrase, images in (
            (mt.triple.head, mt.head_images),
            (mt.triple.tail, mt.tail_images),
        ):
            key = phrase.normalized
            if key in table:
                continue
            emb = phrase_store.get(key)
            if emb is None:
                if skip_report is not None:
                    skip_report.add("phrase-missing-embedding", key)
                continue
            table[key] = PhraseEntry(
                phrase_id=key,
                phrase_emb=emb,
                associated_images=tuple(i for i, _ in images),
            )
    return table


def score_phrase(
    image_emb: VectorLike, question_emb: VectorLike, phrase_emb: VectorLike
) -> float:
    """Combined relevance S = cos(image, phrase) + cos(question, phrase).

    S lies in [-2, 2] and inherits cosine's invariance under positive
    rescaling of any argument.
    """
    return cosine(image_emb, phrase_emb) + cosine(question_emb, phrase_emb)


def _top_k(scored: list[tuple[str, float]], k: int) -> list[tuple[str, float]]:
    return sorted(scored, key=lambda pair: (-pair[1], pair[0]))[:k]


def retrieve_for_vqa(
    table: dict[str, PhraseEntry],
    image_emb: VectorLike,
    question_emb: VectorLike,
    k: int,
) -> InjectionResult:
    """Top-k phrases by combined image- and question-phrase similarity."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = [
        (entry.phrase_id, score_phrase(image_emb, question_emb, entry.phrase_emb))
        for entry in table.values()
    ]
    return InjectionResult(ranked_phrases=_top_k(scored, k), k=k)


def retrieve_for_captioning(
    table: dict[str, PhraseEntry],
    input_image_emb: VectorLike,
    k: int,
    image_store: EmbeddingStore,
    aggregate: str = "max",
    skip_report: SkipReport | None = None,
) -> InjectionResult:
    """Top-k phrases whose associated images are most similar to the input.

    A phrase's score aggregates cosine(input, image) over its associated
    images with embeddings; `aggregate` is "max" (default) or "mean".
    Phrases with no embedded associated image are skipped and counted.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if aggregate not in ("max", "mean"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    scored = []
    for entry in table.values():
        sims = [
            cosine(input_image_emb, emb)
            for image_id in entry.associated_images
            if (emb := image_store.get(image_id)) is not None
        ]
        if not sims:
            if skip_report is not None:
                skip_report.add("phrase-no-embedded-images", entry.phrase_id)
            continue
        score = max(sims) if aggregate == "max" else sum(sims) / len(sims)
        scored.append((entry.phrase_id, score))
    return InjectionResult(ranked_phrases=_top_k(scored, k), k=k)
