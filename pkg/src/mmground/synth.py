"""Seeded synthetic corpora for benchmarks and property tests.

Two generators: a clustered corpus shaped so noun prefiltering yields small
candidate sets (for measuring the computation reduction against brute
force), and a planted-target corpus where each query phrase has a known best
image reachable through its top noun (for recall trials).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingStore
from .nounindex import CaptionRecord, NounIndex, build_index
from .tagger import LexiconNounTagger, load_noun_lexicon, singularize


def _vocab_words() -> list[str]:
    # Only lemma-stable words: the tagger must map each caption token back
    # to the exact id its embedding is stored under.
    return sorted(w for w in load_noun_lexicon() if singularize(w) == w)


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _jitter(rng: np.random.Generator, base: np.ndarray, scale: float) -> np.ndarray:
    v = base + scale * rng.standard_normal(base.shape[0])
    return v / np.linalg.norm(v)


@dataclass
class SyntheticCorpus:
    records: list[CaptionRecord]
    image_store: EmbeddingStore
    noun_store: EmbeddingStore
    index: NounIndex
    phrase_store: EmbeddingStore
    phrase_ids: list[str]
    vocabulary: list[str]


def make_clustered_corpus(
    seed: int,
    n_images: int = 10_000,
    dim: int = 64,
    n_phrases: int = 100,
    cluster_count: int = 6,
    cluster_size: int = 20,
    generic_nouns: int = 30,
    images_per_specific_noun: int = 1,
) -> SyntheticCorpus:
    """Corpus whose noun geometry mirrors real caption data.

    Specific nouns form tight embedding clusters with short posting lists;
    generic nouns are spread out and hold the bulk of the images. A query
    phrase sits inside one cluster, so its top nouns are that cluster's
    members and the candidate set stays small.
    """
    rng = np.random.default_rng(seed)
    words = _vocab_words()
    n_specific = cluster_count * cluster_size
    vocab = words[: n_specific + generic_nouns]
    if len(vocab) < n_specific + generic_nouns:
        raise ValueError("noun lexicon too small for requested vocabulary")
    specific, generic = vocab[:n_specific], vocab[n_specific:]

    noun_store = EmbeddingStore(dim)
    centers = [_unit(rng, dim) for _ in range(cluster_count)]
    for i, noun in enumerate(specific):
        noun_store.add(noun, _jitter(rng, centers[i // cluster_size], 0.05))
    for noun in generic:
        noun_store.add(noun, _unit(rng, dim))

    records: list[CaptionRecord] = []
    image_store = EmbeddingStore(dim)
    img_no = 0
    for noun in specific:
        for _ in range(images_per_specific_noun):
            image_id = f"img{img_no:06d}"
            records.append(CaptionRecord(image_id, f"a {noun}", source="synthetic"))
            image_store.add(image_id, _unit(rng, dim))
            img_no += 1
    while img_no < n_images:
        image_id = f"img{img_no:06d}"
        pair = rng.choice(len(generic), size=2, replace=False)
        caption = f"a {generic[pair[0]]} and a {generic[pair[1]]}"
        records.append(CaptionRecord(image_id, caption, source="synthetic"))
        image_store.add(image_id, _unit(rng, dim))
        img_no += 1

    tagger = LexiconNounTagger()
    index = build_index(records, tagger, noun_store, dim=dim)

    phrase_store = EmbeddingStore(dim)
    phrase_ids = []
    for p in range(n_phrases):
        pid = f"phrase{p:04d}"
        center = centers[p % cluster_count]
        phrase_store.add(pid, _jitter(rng, center, 0.05))
        phrase_ids.append(pid)
    return SyntheticCorpus(
        records=records,
        image_store=image_store,
        noun_store=noun_store,
        index=index,
        phrase_store=phrase_store,
        phrase_ids=phrase_ids,
        vocabulary=vocab,
    )


@dataclass
class PlantedTrial:
    index: NounIndex
    image_store: EmbeddingStore
    phrase_emb: np.ndarray
    target_image: str


def make_planted_trial(
    rng: np.random.Generator,
    n_images: int = 300,
    vocab_size: int = 50,
    dim: int = 32,
    nouns_per_caption: int = 2,
) -> PlantedTrial:
    """One recall trial: the phrase's best image shares its top-1 noun.

    The target image's embedding is a small perturbation of the phrase
    embedding, and its caption contains the noun the phrase is nearest to,
    so unrestricted brute force and noun-pruned retrieval should agree.
    """
    words = _vocab_words()[:vocab_size]
    noun_store = EmbeddingStore(dim)
    for w in words:
        noun_store.add(w, _unit(rng, dim))

    target_noun = words[int(rng.integers(vocab_size))]
    target_row = int(rng.integers(n_images))
    phrase_emb = _jitter(rng, np.asarray(noun_store.get(target_noun), dtype=np.float64), 0.1)

    records = []
    image_store = EmbeddingStore(dim)
    for i in range(n_images):
        image_id = f"img{i:05d}"
        picks = list(rng.choice(vocab_size, size=nouns_per_caption, replace=False))
        nouns = [words[int(j)] for j in picks]
        if i == target_row and target_noun not in nouns:
            nouns[0] = target_noun
        records.append(CaptionRecord(image_id, "a " + " near a ".join(nouns), source="planted"))
        if i == target_row:
            image_store.add(image_id, _jitter(rng, phrase_emb, 0.05))
        else:
            image_store.add(image_id, _unit(rng, dim))

    tagger = LexiconNounTagger()
    index = build_index(records, tagger, noun_store, dim=dim)
    return PlantedTrial(
        index=index,
        image_store=image_store,
        phrase_emb=phrase_emb.astype(np.float32),
        target_image=f"img{target_row:05d}",
    )


def make_random_retrieval_corpus(
    seed: int,
    n_images: int = 2_000,
    vocab_size: int = 100,
    dim: int = 64,
    n_phrases: int = 1_000,
    nouns_per_caption: tuple[int, int] = (1, 3),
) -> SyntheticCorpus:
    """Unstructured random corpus for oracle-equivalence checks."""
    rng = np.random.default_rng(seed)
    words = _vocab_words()[:vocab_size]
    noun_store = EmbeddingStore(dim)
    for w in words:
        noun_store.add(w, _unit(rng, dim))
    records = []
    image_store = EmbeddingStore(dim)
    for i in range(n_images):
        image_id = f"img{i:06d}"
        n_nouns = int(rng.integers(nouns_per_caption[0], nouns_per_caption[1] + 1))
        picks = rng.choice(vocab_size, size=n_nouns, replace=False)
        caption = " and a ".join(words[int(j)] for j in picks)
        records.append(CaptionRecord(image_id, "a " + caption, source="synthetic"))
        image_store.add(image_id, _unit(rng, dim))
    tagger = LexiconNounTagger()
    index = build_index(records, tagger, noun_store, dim=dim)
    phrase_store = EmbeddingStore(dim)
    phrase_ids = []
    for p in range(n_phrases):
        pid = f"phrase{p:05d}"
        phrase_store.add(pid, _unit(rng, dim))
        phrase_ids.append(pid)
    return SyntheticCorpus(
        records=records,
        image_store=image_store,
        noun_store=noun_store,
        index=index,
        phrase_store=phrase_store,
        phrase_ids=phrase_ids,
        vocabulary=list(words),
    )
