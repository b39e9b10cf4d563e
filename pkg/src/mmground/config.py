"""Pipeline configuration: flat key=value file, env fallback, flag overrides.

Precedence is flags > config file > defaults. The config file path itself
comes from --config or the MMGROUND_CONFIG environment variable. Numeric
defaults are the published operating point and every override is validated
against its legal range.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import IO

CONFIG_ENV_VAR = "MMGROUND_CONFIG"

_NUMERIC_RANGES = {
    "concreteness_threshold": (1.0, 5.0),
    "sim_threshold": (0.0, 1.0),
    "retain_k": (1, 1_000_000),
    "prefilter_m": (1, 1_000_000),
    "fetch_max": (1, 1_000_000),
    "fetch_retries": (1, 100),
    "fetch_backoff": (0.0, 60.0),
    "worker_bound": (1, 1024),
    "seed": (0, 2**32 - 1),
}

_PATH_KEYS = (
    "triples",
    "captions",
    "phrase_embeddings",
    "noun_embeddings",
    "image_embeddings",
    "lexicon",
    "fetch_manifest",
    "index_path",
    "out",
)


@dataclass
class PipelineConfig:
    concreteness_threshold: float = 4.0
    sim_threshold: float = 0.15
    retain_k: int = 15
    prefilter_m: int = 20
    fetch_max: int = 10
    fetch_retries: int = 3
    fetch_backoff: float = 0.25
    worker_bound: int = 4
    seed: int = 0
    triples: str = ""
    captions: str = ""
    phrase_embeddings: str = ""
    noun_embeddings: str = ""
    image_embeddings: str = ""
    lexicon: str = ""
    fetch_manifest: str = ""
    index_path: str = ""
    out: str = ""

    def validate(self) -> None:
        for key, (lo, hi) in _NUMERIC_RANGES.items():
            value = getattr(self, key)
            if not lo <= value <= hi:
                raise ValueError(f"config {key}={value} outside [{lo}, {hi}]")

    def dump(self, sink: IO[str]) -> None:
        for f in fields(self):
            sink.write(f"{f.name} = {getattr(self, f.name)}\n")


def parse_config_file(source: IO[str] | list[str]) -> dict[str, str]:
    """Read `key = value` lines; '#' comments and blanks ignored."""
    out: dict[str, str] = {}
    for line_no, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {line_no}: expected key = value")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_config(
    path: str | os.PathLike | None = None,
    overrides: dict[str, object] | None = None,
) -> PipelineConfig:
    """Build the effective config from defaults, file and overrides.

    `path=None` falls back to the MMGROUND_CONFIG environment variable; a
    missing variable means defaults only. Unknown keys anywhere are errors.
    """
    config = PipelineConfig()
    field_types = {f.name: f.type for f in fields(PipelineConfig)}

    def apply(key: str, raw: object) -> None:
        if key not in field_types:
            raise ValueError(f"unknown config key {key!r}")
        current = getattr(config, key)
        if isinstance(current, float):
            setattr(config, key, float(raw))  # type: ignore[arg-type]
        elif isinstance(current, int):
            setattr(config, key, int(raw))  # type: ignore[arg-type]
        else:
            setattr(config, key, str(raw))

    if path is None:
        env = os.environ.get(CONFIG_ENV_VAR)
        path = env if env else None
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            for key, value in parse_config_file(fh).items():
                apply(key, value)
    for key, value in (overrides or {}).items():
        if value is not None:
            apply(key, value)
    config.validate()
    return config


def dump_config(config: PipelineConfig, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        config.dump(fh)


def resolve_embedding_paths(config: PipelineConfig, embeddings_dir: str | None) -> None:
    """Apply the --embeddings DIR convention: phrases/nouns/images .emb1."""
    if not embeddings_dir:
        return
    base = Path(embeddings_dir)
    if not config.phrase_embeddings:
        config.phrase_embeddings = str(base / "phrases.emb1")
    if not config.noun_embeddings:
        config.noun_embeddings = str(base / "nouns.emb1")
    if not config.image_embeddings:
        config.image_embeddings = str(base / "images.emb1")
