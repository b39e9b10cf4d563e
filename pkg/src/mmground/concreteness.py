"""Phrase concreteness scoring and the embedding-vs-web routing decision.

A phrase's concreteness is the mean lexicon rating over its content tokens.
Phrases averaging below the routing threshold (default 4.0), and phrases
with no rated tokens at all, go to web retrieval; everything else goes to
embedding-based corpus matching.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import IO, Iterable

from .kg import Phrase

DEFAULT_THRESHOLD = 4.0
RATING_MIN = 1.0
RATING_MAX = 5.0

#: Placeholder token never scored (D-CONC-4).
PLACEHOLDER_TOKEN = "person"

# Lemma fallbacks tried in order when the exact token is unrated (D-CONC-1).
_LEMMA_SUFFIXES = ("s", "es", "ing", "ed")


def load_stopwords(path: Path | None = None) -> frozenset[str]:
    """Stopword set from a config file; defaults to the shipped list."""
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
    else:
        text = resources.files("mmground.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(
        w.strip().lower()
        for w in text.splitlines()
        if w.strip() and not w.startswith("#")
    )


class ConcretenessLexicon:
    """Word -> concreteness rating table, keys lowercase lemmas in [1, 5]."""

    def __init__(self, ratings: dict[str, float] | None = None):
        self.ratings: dict[str, float] = {}
        for word, rating in (ratings or {}).items():
            self.add(word, rating)

    def add(self, word: str, rating: float) -> None:
        key = word.strip().lower()
        if not key or any(c.isspace() for c in key):
            raise ValueError(f"lexicon keys must be single lowercase words, got {word!r}")
        if not RATING_MIN <= rating <= RATING_MAX:
            raise ValueError(f"rating for {word!r} out of range: {rating}")
        self.ratings[key] = float(rating)

    def __len__(self) -> int:
        return len(self.ratings)

    def __contains__(self, word: str) -> bool:
        return word in self.ratings

    def lookup(self, token: str) -> float | None:
        """Rating for a token, trying the exact form then stripped suffixes."""
        rating = self.ratings.get(token)
        if rating is not None:
            return rating
        for suffix in _LEMMA_SUFFIXES:
            if token.endswith(suffix) and len(token) > len(suffix):
                rating = self.ratings.get(token[: -len(suffix)])
                if rating is not None:
                    return rating
        return None


def load_lexicon(source: IO[str] | Iterable[str]) -> ConcretenessLexicon:
    """Parse a tab-separated word/rating file.

    A single header line is tolerated (skipped when its second field is not
    numeric); other malformed lines raise ValueError with the line number.
    """
    lexicon = ConcretenessLexicon()
    for line_no, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split("\t")
        if len(parts) < 2:
            raise ValueError(f"lexicon line {line_no}: expected word<TAB>rating")
        try:
            rating = float(parts[1])
        except ValueError:
            if line_no == 1:
                continue
            raise ValueError(f"lexicon line {line_no}: non-numeric rating {parts[1]!r}")
        lexicon.add(parts[0], rating)
    return lexicon


class RouteKind(Enum):
    EMBEDDING_MATCH = "embedding"
    WEB_SEARCH = "web"


@dataclass(frozen=True)
class Route:
    """Routing decision for one phrase; score absent only on the web route."""

    kind: RouteKind
    phrase_score: float | None = None

    def __post_init__(self) -> None:
        if self.phrase_score is None and self.kind is not RouteKind.WEB_SEARCH:
            raise ValueError("a phrase without a concreteness score must route to web")


def phrase_concreteness(
    phrase: Phrase,
    lexicon: ConcretenessLexicon,
    stopwords: frozenset[str] | None = None,
) -> float | None:
    """Mean lexicon rating over the phrase's scorable tokens, or None.

    Stopwords and the "person" placeholder are excluded from the mean;
    tokens the lexicon cannot resolve contribute nothing.
    """
    stops = _default_stopwords() if stopwords is None else stopwords
    ratings = []
    for token in phrase.tokens:
        if token in stops or token == PLACEHOLDER_TOKEN:
            continue
        rating = lexicon.lookup(token)
        if rating is not None:
            ratings.append(rating)
    if not ratings:
        return None
    return sum(ratings) / len(ratings)


def route(
    phrase: Phrase,
    lexicon: ConcretenessLexicon,
    threshold: float = DEFAULT_THRESHOLD,
    stopwords: frozenset[str] | None = None,
) -> Route:
    """Decide the retrieval route for a phrase.

    Scores strictly below the threshold route to web search; the boundary
    value takes the embedding route. Unscorable phrases route to web.
    """
    if not RATING_MIN <= threshold <= RATING_MAX:
        raise ValueError(f"threshold out of range: {threshold}")
    score = phrase_concreteness(phrase, lexicon, stopwords)
    if score is None or score < threshold:
        return Route(RouteKind.WEB_SEARCH, score)
    return Route(RouteKind.EMBEDDING_MATCH, score)


_STOPWORDS_CACHE: frozenset[str] | None = None


def _default_stopwords() -> frozenset[str]:
    global _STOPWORDS_CACHE
    if _STOPWORDS_CACHE is None:
        _STOPWORDS_CACHE = load_stopwords()
    return _STOPWORDS_CACHE
