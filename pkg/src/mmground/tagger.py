"""Noun tagging for caption indexing.

The default tagger is deterministic and dependency-free: a closed lexicon of
common caption nouns plus conservative suffix heuristics for out-of-lexicon
abstract nouns. Anything implementing the NounTagger protocol (e.g. a real
POS tagger) can be plugged into index construction instead.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import Protocol, runtime_checkable

from .concreteness import load_stopwords

_TOKEN_RE = re.compile(r"[a-z]+(?:'[a-z]+)?")

# Derivational suffixes that almost always mark a noun.
_NOUN_SUFFIXES = (
    "tion",
    "sion",
    "ment",
    "ness",
    "ity",
    "ism",
    "ship",
    "hood",
    "ance",
    "ence",
)


@runtime_checkable
class NounTagger(Protocol):
    def nouns(self, text: str) -> list[str]:
        """Lemmatized noun tokens of `text`, in order, duplicates allowed."""
        ...


def singularize(token: str) -> str:
    """Heuristic plural-to-singular lemma; identity for non-plurals."""
    if len(token) > 3 and token.endswith("ies"):
        return token[:-3] + "y"
    if len(token) > 3 and token.endswith(("ses", "xes", "zes", "ches", "shes")):
        return token[:-2]
    if len(token) > 2 and token.endswith("s") and not token.endswith(("ss", "us", "is")):
        return token[:-1]
    return token


def load_noun_lexicon(path: Path | None = None) -> frozenset[str]:
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
    else:
        text = resources.files("mmground.data").joinpath("nouns.txt").read_text("utf-8")
    return frozenset(
        w.strip().lower()
        for w in text.splitlines()
        if w.strip() and not w.startswith("#")
    )


class LexiconNounTagger:
    """Default tagger: closed noun lexicon + suffix heuristics.

    A token is a noun if its singular lemma is in the lexicon, or if it
    carries a derivational noun suffix; stopwords are never nouns.
    """

    def __init__(
        self,
        lexicon: frozenset[str] | None = None,
        stopwords: frozenset[str] | None = None,
    ):
        self.lexicon = load_noun_lexicon() if lexicon is None else lexicon
        self.stopwords = load_stopwords() if stopwords is None else stopwords

    def nouns(self, text: str) -> list[str]:
        out = []
        for token in _TOKEN_RE.findall(text.lower()):
            if token in self.stopwords:
                continue
            lemma = singularize(token)
            if lemma in self.lexicon:
                out.append(lemma)
            elif lemma.endswith(_NOUN_SUFFIXES) and len(lemma) > 5:
                out.append(lemma)
        return out


class VocabularyTagger:
    """Tags exactly the words of a fixed vocabulary; for synthetic corpora."""

    def __init__(self, vocabulary: frozenset[str] | set[str]):
        self.vocabulary = frozenset(vocabulary)

    def nouns(self, text: str) -> list[str]:
        return [
            singularize(t)
            for t in _TOKEN_RE.findall(text.lower())
            if singularize(t) in self.vocabulary
        ]
