"""Batch encoding: manifest in, EMB1 out."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

from .emb1 import write_records
from .encoders import JointEncoder

VALID_KINDS = ("text", "image")


@dataclass(frozen=True)
class ManifestItem:
    id: str
    kind: str
    payload: str


@dataclass
class EncodeSummary:
    count: int = 0
    dim: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)


def load_manifest(source: IO[str] | Iterable[str]) -> list[ManifestItem]:
    """Parse a JSONL manifest of {id, kind: text|image, payload} items.

    Ids must be unique; image payloads are checked for existence at encode
    time, not here.
    """
    items: list[ManifestItem] = []
    seen: set[str] = set()
    for line_no, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ValueError(f"manifest line {line_no}: invalid JSON ({exc.msg})")
        for key in ("id", "kind", "payload"):
            if key not in obj:
                raise ValueError(f"manifest line {line_no}: missing {key!r}")
        if obj["kind"] not in VALID_KINDS:
            raise ValueError(f"manifest line {line_no}: unknown kind {obj['kind']!r}")
        if obj["id"] in seen:
            raise ValueError(f"manifest line {line_no}: duplicate id {obj['id']!r}")
        seen.add(obj["id"])
        items.append(ManifestItem(id=str(obj["id"]), kind=obj["kind"],
                                  payload=str(obj["payload"])))
    return items


def encode_manifest(
    items: list[ManifestItem], encoder: JointEncoder, out: IO[bytes]
) -> EncodeSummary:
    """Encode every item; per-item failures are recorded, never fatal.

    The EMB1 file holds one record per successfully encoded item, all at
    the encoder's output dimension.
    """
    summary = EncodeSummary(dim=encoder.dim)
    records = []
    for item in items:
        try:
            if item.kind == "text":
                vec = encoder.encode_text(item.payload)
            else:
                path = Path(item.payload)
                if not path.exists():
                    raise FileNotFoundError(f"image not found: {path}")
                vec = encoder.encode_image(path)
        except Exception as exc:
            summary.failures.append((item.id, f"{type(exc).__name__}: {exc}"))
            continue
        records.append((item.id, vec))
    summary.count = write_records(out, encoder.dim, records)
    return summary
