"""Commonsense triple parsing, normalization and relation taxonomy.

The graph skeleton is a list of <head, relation, tail> triples over a closed
set of 19 relations grouped into physical, eventive and social knowledge.
Parsing is streaming and never fatal on bad rows: every rejected line is
counted by reason so ingestion is fully auditable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable

from .errors import EmptyPhraseError, UnknownRelationError


class RelationGroup(Enum):
    PHYSICAL = "Physical"
    EVENTIVE = "Eventive"
    SOCIAL = "Social"


class Relation(Enum):
    """The 19 retained relations."""

    OBJECT_USE = "ObjectUse"
    AT_LOCATION = "AtLocation"
    MADE_UP_OF = "MadeUpOf"
    HAS_PROPERTY = "HasProperty"
    CAPABLE_OF = "CapableOf"
    DESIRES = "Desires"
    NOT_DESIRES = "NotDesires"
    IS_AFTER = "isAfter"
    HAS_SUB_EVENT = "HasSubEvent"
    IS_BEFORE = "isBefore"
    HINDERED_BY = "HinderedBy"
    CAUSES = "Causes"
    REASON = "Reason"
    NEED = "Need"
    ATTR = "Attr"
    EFFECT = "Effect"
    REACT = "React"
    WANT = "Want"
    INTENT = "Intent"

    @property
    def group(self) -> RelationGroup:
        return _RELATION_GROUPS[self]


_RELATION_GROUPS: dict[Relation, RelationGroup] = {
    Relation.OBJECT_USE: RelationGroup.PHYSICAL,
    Relation.AT_LOCATION: RelationGroup.PHYSICAL,
    Relation.MADE_UP_OF: RelationGroup.PHYSICAL,
    Relation.HAS_PROPERTY: RelationGroup.PHYSICAL,
    Relation.CAPABLE_OF: RelationGroup.PHYSICAL,
    Relation.DESIRES: RelationGroup.PHYSICAL,
    Relation.NOT_DESIRES: RelationGroup.PHYSICAL,
    Relation.IS_AFTER: RelationGroup.EVENTIVE,
    Relation.HAS_SUB_EVENT: RelationGroup.EVENTIVE,
    Relation.IS_BEFORE: RelationGroup.EVENTIVE,
    Relation.HINDERED_BY: RelationGroup.EVENTIVE,
    Relation.CAUSES: RelationGroup.EVENTIVE,
    Relation.REASON: RelationGroup.EVENTIVE,
    Relation.NEED: RelationGroup.SOCIAL,
    Relation.ATTR: RelationGroup.SOCIAL,
    Relation.EFFECT: RelationGroup.SOCIAL,
    Relation.REACT: RelationGroup.SOCIAL,
    Relation.WANT: RelationGroup.SOCIAL,
    Relation.INTENT: RelationGroup.SOCIAL,
}

RELATION_NAMES: tuple[str, ...] = tuple(r.value for r in Relation)
_RELATIONS_BY_NAME: dict[str, Relation] = {r.value: r for r in Relation}

#: Relation present in the source data but excluded from the graph.
EXCLUDED_RELATION = "isFilledBy"

# PersonX/PersonY/PersonZ placeholders; case-insensitive and single-token so
# normalization stays idempotent (the substituted "person" never re-matches).
_PLACEHOLDER_RE = re.compile(r"\bperson[xyz]\b", re.IGNORECASE)
_BLANK_RE = re.compile(r"_+")
_WS_RE = re.compile(r"\s+")
_EDGE_MARKERS = "-'\".,;:!?"


def relation_group(name: str) -> RelationGroup:
    """Classify a relation name into its group.

    Raises UnknownRelationError for names outside the retained taxonomy.
    """
    rel = _RELATIONS_BY_NAME.get(name)
    if rel is None:
        raise UnknownRelationError(f"unknown relation: {name!r}")
    return rel.group


@dataclass(frozen=True)
class Phrase:
    """A normalized text phrase attached to a graph node.

    Identity is the normalized form; raw is provenance only.
    """

    raw: str = field(compare=False)
    normalized: str
    tokens: tuple[str, ...]

    def __str__(self) -> str:
        return self.normalized


def normalize_phrase(raw: str) -> Phrase:
    """Normalize raw phrase text into its canonical graph form.

    PersonX/PersonY/PersonZ map to "person", blank markers ("___") are
    dropped, text is lowercased and whitespace-collapsed. Idempotent:
    normalizing an already-normalized phrase is a no-op.

    Raises EmptyPhraseError when nothing remains after normalization.
    """
    text = _BLANK_RE.sub(" ", raw)
    text = _PLACEHOLDER_RE.sub("person", text)
    text = text.lower()
    text = _WS_RE.sub(" ", text)
    # Trimming a marker can expose whitespace and vice versa; iterate to a
    # fixed point so normalization stays idempotent.
    while True:
        trimmed = text.strip().strip(_EDGE_MARKERS)
        if trimmed == text:
            break
        text = trimmed
    if not text:
        raise EmptyPhraseError(f"phrase is empty after normalization: {raw!r}")
    return Phrase(raw=raw, normalized=text, tokens=tuple(text.split(" ")))


@dataclass(frozen=True)
class Triple:
    """One commonsense statement; source_line is provenance only."""

    head: Phrase
    relation: Relation
    tail: Phrase
    source_line: int = field(default=1, compare=False)


# Rejection reasons form a closed set; comment lines are tracked separately.
REASON_EMPTY_FIELD = "empty-field"
REASON_IS_FILLED_BY = "isFilledBy"
REASON_UNKNOWN_RELATION = "unknown-relation"
REASON_MALFORMED = "malformed"

REJECTION_REASONS = (
    REASON_EMPTY_FIELD,
    REASON_IS_FILLED_BY,
    REASON_UNKNOWN_RELATION,
    REASON_MALFORMED,
)


@dataclass
class RejectionReport:
    """Per-reason counts of rejected input lines."""

    counts: dict[str, int] = field(
        default_factory=lambda: {r: 0 for r in REJECTION_REASONS}
    )
    comment_lines: int = 0
    rejected_lines: list[tuple[int, str]] = field(default_factory=list)

    def add(self, reason: str, line_no: int) -> None:
        self.counts[reason] += 1
        self.rejected_lines.append((line_no, reason))

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def parse_triples(reader: Iterable[str] | IO[str]) -> tuple[list[Triple], RejectionReport]:
    """Parse a tab-separated triple source into validated triples.

    Accepts any iterable of lines (an open text file works). Lines starting
    with '#' are comments. A bad line is never fatal: it is counted in the
    RejectionReport and skipped. For any input,

        len(triples) + report.total + report.comment_lines
            == number of non-blank input lines
    """
    triples: list[Triple] = []
    report = RejectionReport()
    for line_no, line in enumerate(reader, start=1):
        stripped = line.rstrip("\n").rstrip("\r")
        if not stripped.strip():
            continue
        if stripped.lstrip().startswith("#"):
            report.comment_lines += 1
            continue
        fields = stripped.split("\t")
        if len(fields) < 3:
            report.add(REASON_MALFORMED, line_no)
            continue
        head_raw, rel_name, tail_raw = fields[0], fields[1].strip(), fields[2]
        if not head_raw.strip() or not tail_raw.strip():
            report.add(REASON_EMPTY_FIELD, line_no)
            continue
        if rel_name == EXCLUDED_RELATION:
            report.add(REASON_IS_FILLED_BY, line_no)
            continue
        relation = _RELATIONS_BY_NAME.get(rel_name)
        if relation is None:
            report.add(REASON_UNKNOWN_RELATION, line_no)
            continue
        try:
            head = normalize_phrase(head_raw)
            tail = normalize_phrase(tail_raw)
        except EmptyPhraseError:
            report.add(REASON_EMPTY_FIELD, line_no)
            continue
        triples.append(Triple(head=head, relation=relation, tail=tail, source_line=line_no))
    return triples, report


def write_triples(triples: Iterable[Triple], sink: IO[str]) -> int:
    """Write normalized triples in the ingest file format; returns row count."""
    n = 0
    for t in triples:
        sink.write(f"{t.head.normalized}\t{t.relation.value}\t{t.tail.normalized}\n")
        n += 1
    return n
