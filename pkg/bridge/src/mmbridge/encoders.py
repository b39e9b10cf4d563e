"""Joint text-image encoders behind one small protocol.

Two backends: "tiny" is a dependency-free deterministic encoder over shared
color and shape features, good enough for offline pipelines and contract
tests; "clip" wraps a real multimodal checkpoint when one is available
locally. The output dimension is a config choice, not a contract.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
from PIL import Image

DEFAULT_DIM = 512

_TOKEN_RE = re.compile(r"[a-z]+")

# Shared semantic prototypes: both modalities project onto these slots, so
# "a red square" and a rendered red square genuinely align.
_COLOR_PROTOTYPES = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 0.8, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0),
    "orange": (1.0, 0.5, 0.0),
    "purple": (0.5, 0.0, 0.5),
    "black": (0.05, 0.05, 0.05),
    "white": (1.0, 1.0, 1.0),
    "gray": (0.5, 0.5, 0.5),
    "grey": (0.5, 0.5, 0.5),
}

# Fill ratio of the shape inside its bounding box.
_SHAPE_PROTOTYPES = {"square": 1.0, "rectangle": 1.0, "circle": 0.785, "triangle": 0.5}
_SHAPE_SLOTS = ("square", "circle", "triangle")
_SHAPE_ALIASES = {"rectangle": "square"}

_COLOR_BASE = 0   # 3 slots: mean RGB
_SHAPE_BASE = 3   # 3 slots: shape affinity
_SEMANTIC_SLOTS = 6
_TEXT_TAIL_WEIGHT = 0.25


@runtime_checkable
class JointEncoder(Protocol):
    dim: int

    def encode_text(self, text: str) -> np.ndarray: ...

    def encode_image(self, path: Path) -> np.ndarray: ...


class TinyJointEncoder:
    """Deterministic handcrafted joint encoder.

    Texts and images share the first six dimensions (mean color, shape
    affinity); texts additionally hash their remaining tokens into the tail
    at low weight so distinct phrases stay distinguishable. All outputs are
    unit-normalized float32 and bit-reproducible.
    """

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < _SEMANTIC_SLOTS + 2:
            raise ValueError(f"dim must be at least {_SEMANTIC_SLOTS + 2}")
        self.dim = dim

    def encode_text(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        tokens = _TOKEN_RE.findall(text.lower())
        colors = [_COLOR_PROTOTYPES[t] for t in tokens if t in _COLOR_PROTOTYPES]
        if colors:
            vec[_COLOR_BASE:_COLOR_BASE + 3] = np.mean(colors, axis=0)
        for token in tokens:
            shape = _SHAPE_ALIASES.get(token, token)
            if shape in _SHAPE_SLOTS:
                vec[_SHAPE_BASE + _SHAPE_SLOTS.index(shape)] = 1.0
        for token in tokens:
            if token in _COLOR_PROTOTYPES or token in _SHAPE_PROTOTYPES:
                continue
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            slot = _SEMANTIC_SLOTS + int.from_bytes(digest[:4], "little") % (
                self.dim - _SEMANTIC_SLOTS
            )
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[slot] += sign * _TEXT_TAIL_WEIGHT
        return _normalize(vec)

    def encode_image(self, path: Path) -> np.ndarray:
        with Image.open(path) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        vec = np.zeros(self.dim, dtype=np.float64)
        mask = self._foreground_mask(rgb)
        if mask.any():
            vec[_COLOR_BASE:_COLOR_BASE + 3] = rgb[mask].mean(axis=0)
            vec[_SHAPE_BASE:_SHAPE_BASE + 3] = self._shape_affinity(mask)
        else:
            vec[_COLOR_BASE:_COLOR_BASE + 3] = rgb.reshape(-1, 3).mean(axis=0)
        return _normalize(vec)

    @staticmethod
    def _foreground_mask(rgb: np.ndarray) -> np.ndarray:
        corners = np.stack([rgb[0, 0], rgb[0, -1], rgb[-1, 0], rgb[-1, -1]])
        background = corners.mean(axis=0)
        return np.abs(rgb - background).sum(axis=2) > 0.25

    @staticmethod
    def _shape_affinity(mask: np.ndarray) -> np.ndarray:
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        box_area = (rows[-1] - rows[0] + 1) * (cols[-1] - cols[0] + 1)
        fill = mask.sum() / box_area
        return np.array([
            np.exp(-(((fill - _SHAPE_PROTOTYPES[s]) / 0.09) ** 2)) for s in _SHAPE_SLOTS
        ])


class ClipEncoder:
    """Real multimodal checkpoint via sentence-transformers.

    Requires the model weights to be available locally (or downloadable);
    loading failure is fatal by contract.
    """

    def __init__(self, model_name: str = "clip-ViT-B-32"):
        from sentence_transformers import SentenceTransformer

        self._model = SentenceTransformer(model_name)
        probe = self._model.encode(["probe"], convert_to_numpy=True)
        self.dim = int(probe.shape[1])

    def encode_text(self, text: str) -> np.ndarray:
        out = self._model.encode([text], convert_to_numpy=True)[0]
        return np.asarray(out, dtype=np.float32)

    def encode_image(self, path: Path) -> np.ndarray:
        with Image.open(path) as img:
            out = self._model.encode([img.convert("RGB")], convert_to_numpy=True)[0]
        return np.asarray(out, dtype=np.float32)


def make_encoder(name: str, dim: int = DEFAULT_DIM, model: str | None = None) -> JointEncoder:
    if name == "tiny":
        return TinyJointEncoder(dim)
    if name == "clip":
        return ClipEncoder(model or "clip-ViT-B-32")
    raise ValueError(f"unknown encoder {name!r}")


def _normalize(vec: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        # Degenerate payloads (e.g. empty text) still need a valid vector.
        vec = vec.copy()
        vec[-1] = 1.0
        norm = 1.0
    return (vec / norm).astype(np.float32)
