"""Shared fixtures: the test lexicon, independent oracles, and a tiny
end-to-end corpus with hand-assigned embeddings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from mmground import (
    CaptionRecord,
    ConcretenessLexicon,
    EmbeddingStore,
    build_index,
    normalize_phrase,
    parse_triples,
    save_store,
)
from mmground.tagger import LexiconNounTagger

# Ratings chosen so means land on clean values; "boat relax" -> 3.75.
FIXTURE_RATINGS: dict[str, float] = {
    # concrete
    "boat": 5.0, "dog": 4.9, "cat": 4.8, "ball": 4.6, "tree": 4.5,
    "chair": 4.5, "water": 4.4, "house": 4.8, "car": 4.9, "apple": 5.0,
    "road": 4.3, "beach": 4.4, "book": 4.7, "table": 4.6, "grass": 4.2,
    "bread": 4.9, "fish": 4.7, "bird": 4.6,
    # mid-scale
    "party": 3.8, "dance": 3.6, "smile": 3.5, "sleep": 3.3, "game": 3.4,
    "music": 3.2, "story": 3.0, "walk": 3.1, "food": 4.1, "garden": 4.2,
    # abstract
    "relax": 2.5, "think": 2.0, "dream": 1.8, "idea": 1.4, "love": 2.1,
    "happy": 2.3, "fear": 2.2, "plan": 2.6, "hope": 1.9, "trust": 1.7,
    "joke": 2.8, "calm": 2.4, "unwind": 2.2, "eat": 3.7,
}

CONCRETE_WORDS = sorted(w for w, r in FIXTURE_RATINGS.items() if r >= 4.2)
ABSTRACT_WORDS = sorted(w for w, r in FIXTURE_RATINGS.items() if r < 4.0)

# Tokens no lexicon lookup (exact or suffix-stripped) can resolve.
UNRATED_TOKENS = [
    "blorf", "quix", "snurfle", "vrell", "klamp",
    "drazzle", "wumpet", "frindle", "glonk", "trubble",
]


@pytest.fixture(scope="session")
def lexicon() -> ConcretenessLexicon:
    return ConcretenessLexicon(dict(FIXTURE_RATINGS))


def oracle_cosine(a, b) -> float:
    """Independent cosine: exact fsum accumulation, then f32 rounding."""
    num = math.fsum(float(x) * float(y) for x, y in zip(a, b))
    na = math.sqrt(math.fsum(float(x) * float(x) for x in a))
    nb = math.sqrt(math.fsum(float(y) * float(y) for y in b))
    return float(np.float32(min(1.0, max(-1.0, num / (na * nb)))))


def oracle_topk(entries: dict[str, np.ndarray], query, k: int) -> list[tuple[str, float]]:
    """Independent full-sort top-k over a plain dict of vectors."""
    pairs = [(i, oracle_cosine(v, query)) for i, v in entries.items()]
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return pairs[:k]


@dataclass
class RoutingCase:
    phrase_text: str
    expected_mean: float | None
    expected_web: bool  # at threshold 4.0


def make_routing_fixture() -> list[RoutingCase]:
    """200 phrases with construction-time route labels; exactly 144 (72%)
    expect the web route at threshold 4.0.

    Labels come from plain arithmetic over the ratings table, independent of
    the router: mean of the two content words, web iff mean < 4.0 or no
    word is rated. Stopword padding exercises the exclusion rule.
    """
    cases: list[RoutingCase] = []

    concrete_pairs = [
        (a, b) for i, a in enumerate(CONCRETE_WORDS) for b in CONCRETE_WORDS[i + 1:]
    ]
    for a, b in concrete_pairs:
        mean = (FIXTURE_RATINGS[a] + FIXTURE_RATINGS[b]) / 2
        if mean >= 4.0 and len(cases) < 55:
            cases.append(RoutingCase(f"{a} on the {b}", mean, expected_web=False))
    # One boundary case: mean exactly 4.0 takes the embedding route.
    assert (FIXTURE_RATINGS["party"] + FIXTURE_RATINGS["grass"]) / 2 == 4.0
    cases.append(RoutingCase("party in the grass", 4.0, expected_web=False))
    n_embed = len(cases)
    assert n_embed == 56

    mixed_pairs = [(a, b) for a in ABSTRACT_WORDS for b in CONCRETE_WORDS]
    for a, b in mixed_pairs:
        mean = (FIXTURE_RATINGS[a] + FIXTURE_RATINGS[b]) / 2
        if mean < 4.0 and len(cases) - n_embed < 134:
            cases.append(RoutingCase(f"{a} with a {b}", mean, expected_web=True))
    for token in UNRATED_TOKENS:
        cases.append(RoutingCase(f"the {token}", None, expected_web=True))

    assert len(cases) == 200
    assert sum(1 for c in cases if c.expected_web) == 144
    return cases


# --- tiny end-to-end corpus --------------------------------------------------

E2E_DIM = 8

# Basis-aligned concept directions shared by nouns, images and phrases.
_CONCEPTS = {"dog": 0, "cat": 1, "boat": 2, "beach": 3, "ball": 4, "tree": 5,
             "house": 6, "apple": 7}


def _concept_vec(*weights: tuple[str, float]) -> np.ndarray:
    v = np.zeros(E2E_DIM, dtype=np.float64)
    for word, w in weights:
        v[_CONCEPTS[word]] = w
    return (v / np.linalg.norm(v)).astype(np.float32)


E2E_TRIPLES = """\
# fixture triples
dog\tAtLocation\tbeach
cat\tAtLocation\thouse
PersonX relaxes\tIntent\tto unwind
PersonX relaxes\tReact\thappy
boat\tObjectUse\trelax in boat
apple\tMadeUpOf\tfood
PersonX plays with the dog\tHasSubEvent\tdog runs for the ball
tree\tHasProperty\ttall and calm
PersonX dreams\tWant\tto sleep
boat\tAtLocation\twater
"""

E2E_CAPTIONS = [
    ("c0", "corpusA", "a dog on the beach"),
    ("c1", "corpusA", "a dog and a ball"),
    ("c2", "corpusA", "a cat in a house"),
    ("c3", "corpusB", "a boat near the beach"),
    ("c4", "corpusB", "a tall tree"),
    ("c5", "corpusB", "a ball in the grass"),
    ("c6", "corpusB", "an apple on a table"),
    ("c7", "corpusB", "a boat on the water"),
]

# Image vectors lean toward their caption concepts.
E2E_IMAGE_VECS = {
    "c0": _concept_vec(("dog", 1.0), ("beach", 0.4)),
    "c1": _concept_vec(("dog", 1.0), ("ball", 0.6)),
    "c2": _concept_vec(("cat", 1.0), ("house", 0.5)),
    "c3": _concept_vec(("boat", 1.0), ("beach", 0.5)),
    "c4": _concept_vec(("tree", 1.0)),
    "c5": _concept_vec(("ball", 1.0)),
    "c6": _concept_vec(("apple", 1.0)),
    "c7": _concept_vec(("boat", 1.0), ("beach", 0.2)),
    # web-served images
    "w0": _concept_vec(("dog", 0.3), ("ball", 0.2), ("tree", 0.1)),
    "w1": _concept_vec(("cat", 0.5), ("house", 0.2)),
    "w2": _concept_vec(("boat", 0.7), ("beach", 0.7)),
    "w3": _concept_vec(("tree", 0.9), ("beach", 0.2)),
    "w4": _concept_vec(("dog", 0.6), ("beach", 0.6)),
    "w5": _concept_vec(("apple", 0.8), ("ball", 0.3)),
}

_E2E_PHRASE_VECS = {
    "dog": _concept_vec(("dog", 1.0)),
    "beach": _concept_vec(("beach", 1.0)),
    "cat": _concept_vec(("cat", 1.0)),
    "house": _concept_vec(("house", 1.0)),
    "boat": _concept_vec(("boat", 1.0)),
    "water": _concept_vec(("boat", 0.4), ("beach", 0.9)),
    "apple": _concept_vec(("apple", 1.0)),
    "food": _concept_vec(("apple", 0.9), ("ball", 0.1)),
    "tree": _concept_vec(("tree", 1.0)),
    "person relaxes": _concept_vec(("dog", 0.3), ("ball", 0.2), ("tree", 0.1)),
    "to unwind": _concept_vec(("tree", 0.8), ("beach", 0.3)),
    "happy": _concept_vec(("dog", 0.5), ("ball", 0.4)),
    "relax in boat": _concept_vec(("boat", 0.8), ("beach", 0.6)),
    "person plays with the dog": _concept_vec(("dog", 0.9), ("ball", 0.5)),
    "dog runs for the ball": _concept_vec(("dog", 0.7), ("ball", 0.8)),
    "tall and calm": _concept_vec(("tree", 0.9), ("beach", 0.1)),
    "person dreams": _concept_vec(("cat", 0.4), ("house", 0.3)),
    "to sleep": _concept_vec(("cat", 0.6), ("house", 0.2)),
}

E2E_FETCH_MANIFEST = [
    ("person relaxes", "w0", "http://img.example/w0"),
    ("person relaxes", "w4", "http://img.example/w4"),
    ("to unwind", "w3", "http://img.example/w3"),
    ("happy", "w0", "http://img.example/w0"),
    ("happy", "w4", "http://img.example/w4"),
    ("relax in boat", "w2", "http://img.example/w2"),
    ("tall and calm", "w3", "http://img.example/w3"),
    ("person dreams", "w1", "http://img.example/w1"),
    ("to sleep", "w1", "http://img.example/w1"),
    ("food", "w5", "http://img.example/w5"),
]

E2E_LEXICON_ROWS = [(w, r) for w, r in sorted(FIXTURE_RATINGS.items())] + [
    ("tall", 3.0),
    ("run", 3.2),
    ("play", 3.3),
]


@dataclass
class E2ECorpus:
    triples_text: str
    records: list[CaptionRecord]
    image_store: EmbeddingStore
    noun_store: EmbeddingStore
    phrase_store: EmbeddingStore
    index: object
    lexicon_rows: list[tuple[str, float]]
    fetch_rows: list[tuple[str, str, str]]


def build_e2e_corpus() -> E2ECorpus:
    image_store = EmbeddingStore(E2E_DIM)
    for image_id, vec in E2E_IMAGE_VECS.items():
        image_store.add(image_id, vec)

    noun_store = EmbeddingStore(E2E_DIM)
    for noun in _CONCEPTS:
        noun_store.add(noun, _concept_vec((noun, 1.0)))
    # nouns appearing in captions but without embeddings: grass, table, water
    records = [CaptionRecord(i, c, source=s) for i, s, c in E2E_CAPTIONS]
    index = build_index(records, LexiconNounTagger(), noun_store, dim=E2E_DIM)

    phrase_store = EmbeddingStore(E2E_DIM)
    for text, vec in _E2E_PHRASE_VECS.items():
        phrase_store.add(text, vec)

    return E2ECorpus(
        triples_text=E2E_TRIPLES,
        records=records,
        image_store=image_store,
        noun_store=noun_store,
        phrase_store=phrase_store,
        index=index,
        lexicon_rows=list(E2E_LEXICON_ROWS),
        fetch_rows=list(E2E_FETCH_MANIFEST),
    )


@pytest.fixture()
def e2e_corpus() -> E2ECorpus:
    return build_e2e_corpus()


def write_e2e_files(corpus: E2ECorpus, root: Path) -> dict[str, Path]:
    """Materialize the e2e corpus as the CLI's input files."""
    paths = {
        "triples": root / "triples.tsv",
        "captions": root / "captions.tsv",
        "lexicon": root / "lexicon.tsv",
        "fetch_manifest": root / "fetch_manifest.tsv",
        "phrases": root / "phrases.emb1",
        "nouns": root / "nouns.emb1",
        "images": root / "images.emb1",
    }
    paths["triples"].write_text(corpus.triples_text, encoding="utf-8")
    paths["captions"].write_text(
        "".join(f"{i}\t{s}\t{c}\n" for i, s, c in E2E_CAPTIONS), encoding="utf-8"
    )
    paths["lexicon"].write_text(
        "word\trating\n" + "".join(f"{w}\t{r}\n" for w, r in corpus.lexicon_rows),
        encoding="utf-8",
    )
    paths["fetch_manifest"].write_text(
        "".join(f"{q}\t{i}\t{u}\n" for q, i, u in corpus.fetch_rows), encoding="utf-8"
    )
    for key, store in (("phrases", corpus.phrase_store),
                       ("nouns", corpus.noun_store),
                       ("images", corpus.image_store)):
        with open(paths[key], "wb") as fh:
            save_store(store, fh)
    return paths


def e2e_parsed_triples():
    import io

    triples, _ = parse_triples(io.StringIO(E2E_TRIPLES))
    return triples


def phrase(text: str):
    return normalize_phrase(text)
