"""Fixed-dimension joint-space embeddings: storage, cosine, brute-force top-k.

Vectors are stored as float32 and all dot products accumulate in float64;
reported scores are the float64 result rounded back to float32 so that every
path (brute force, pruned retrieval, persistence) agrees bit-for-bit.

The SimCounter makes pruning claims testable: every pairwise similarity
evaluation increments it, and the brute-force baseline counts exactly one
evaluation per stored vector.
"""

from __future__ import annotations

import struct
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import DimMismatchError, DuplicateIdError, FormatError, ZeroNormError

EMB1_MAGIC = b"EMB1"

VectorLike = Sequence[float] | np.ndarray


class SimCounter:
    """Counts pairwise similarity evaluations; monotone within an invocation."""

    __slots__ = ("count",)

    def __init__(self) -> None:
        self.count = 0

    def add(self, n: int) -> None:
        if n < 0:
            raise ValueError("counter can only increase")
        self.count += n

    def __repr__(self) -> str:
        return f"SimCounter({self.count})"


def _as_f32(values: VectorLike) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float32)
    if vec.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {vec.shape}")
    return vec


def cosine(a: VectorLike, b: VectorLike, counter: SimCounter | None = None) -> float:
    """Cosine similarity in [-1, 1] at float32 precision.

    Raises DimMismatchError on dimension disagreement and ZeroNormError if
    either vector has zero norm. Increments the counter by exactly one.
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.ndim != 1 or vb.ndim != 1 or va.shape != vb.shape:
        raise DimMismatchError(f"dim mismatch: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine undefined for a zero vector")
    score = float(va @ vb) / (na * nb)
    if counter is not None:
        counter.add(1)
    return float(np.float32(min(1.0, max(-1.0, score))))


class EmbeddingStore:
    """Immutable-after-load map from id to a float32 vector of fixed dim.

    Ids are unique; all vectors share the store dimension. Iteration and the
    cached matrix view use ascending id order, which is also the ranking
    tie-break order.
    """

    def __init__(self, dim: int, normalized: bool = False):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = int(dim)
        self.normalized = normalized
        self._entries: dict[str, np.ndarray] = {}
        self._cache: tuple[list[str], dict[str, int], np.ndarray, np.ndarray] | None = None

    def add(self, id_: str, values: VectorLike) -> None:
        if id_ in self._entries:
            raise DuplicateIdError(f"duplicate embedding id: {id_!r}")
        vec = _as_f32(values)
        if vec.shape[0] != self.dim:
            raise DimMismatchError(
                f"vector for {id_!r} has dim {vec.shape[0]}, store dim is {self.dim}"
            )
        norm = float(np.linalg.norm(vec.astype(np.float64)))
        if norm == 0.0:
            raise ZeroNormError(f"zero vector for id {id_!r}")
        if self.normalized and abs(norm - 1.0) > 1e-4:
            raise ValueError(f"store is flagged unit-normalized but ‖{id_}‖ = {norm}")
        vec.setflags(write=False)
        self._entries[id_] = vec
        self._cache = None

    def get(self, id_: str) -> np.ndarray | None:
        return self._entries.get(id_)

    def __contains__(self, id_: str) -> bool:
        return id_ in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        if self.dim != other.dim or len(self) != len(other):
            return False
        return all(
            id_ in other._entries and np.array_equal(vec, other._entries[id_], equal_nan=True)
            for id_, vec in self._entries.items()
        )

    def ids(self) -> list[str]:
        """All ids in ascending order."""
        return self._matrix()[0][:]

    def subset(self, ids: Iterable[str]) -> "EmbeddingStore":
        sub = EmbeddingStore(self.dim, normalized=self.normalized)
        for id_ in ids:
            vec = self._entries.get(id_)
            if vec is None:
                raise KeyError(id_)
            sub.add(id_, vec)
        return sub

    def _matrix(self) -> tuple[list[str], dict[str, int], np.ndarray, np.ndarray]:
        # (sorted ids, id->row, float64 matrix, float64 row norms)
        if self._cache is None:
            ids = sorted(self._entries)
            if ids:
                mat = np.stack([self._entries[i] for i in ids]).astype(np.float64)
            else:
                mat = np.empty((0, self.dim), dtype=np.float64)
            norms = np.linalg.norm(mat, axis=1)
            self._cache = (ids, {i: r for r, i in enumerate(ids)}, mat, norms)
        return self._cache

    def score_ids(
        self, ids: Sequence[str], query: VectorLike, counter: SimCounter | None = None
    ) -> np.ndarray:
        """Float32 cosine scores of `query` against the given ids, in order.

        One similarity evaluation is counted per id. Missing ids raise
        KeyError; zero-norm queries raise ZeroNormError.
        """
        q = np.asarray(query, dtype=np.float64)
        if q.shape[0] != self.dim:
            raise DimMismatchError(f"query dim {q.shape[0]} != store dim {self.dim}")
        qn = float(np.linalg.norm(q))
        if qn == 0.0:
            raise ZeroNormError("cosine undefined for a zero query")
        all_ids, row_of, mat, norms = self._matrix()
        rows = np.array([row_of[i] for i in ids], dtype=np.intp)
        scores = (mat[rows] @ q) / (norms[rows] * qn)
        if counter is not None:
            counter.add(len(rows))
        return np.clip(scores, -1.0, 1.0).astype(np.float32)


def rank_ids(
    store: EmbeddingStore,
    ids: Sequence[str],
    query: VectorLike,
    counter: SimCounter | None = None,
) -> list[tuple[str, float]]:
    """Rank ids by cosine to `query`, score descending, ascending-id ties."""
    ordered = sorted(ids)
    if not ordered:
        return []
    scores = store.score_ids(ordered, query, counter)
    id_arr = np.array(ordered)
    order = np.lexsort((id_arr, -scores.astype(np.float64)))
    return [(str(id_arr[i]), float(scores[i])) for i in order]


def brute_force_topk(
    store: EmbeddingStore,
    query: VectorLike,
    k: int,
    counter: SimCounter | None = None,
) -> list[tuple[str, float]]:
    """Exhaustive top-k over the whole store; the pruning oracle.

    Counts exactly len(store) similarity evaluations. Returns min(k, n)
    (id, score) pairs sorted by score descending, ties by ascending id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = rank_ids(store, store.ids(), query, counter)
    return ranked[:k]


def save_store(store: EmbeddingStore, sink: IO[bytes]) -> int:
    """Write the EMB1 binary format; records in ascending id order.

    Layout: magic "EMB1"; u32 LE dim; u64 LE record count; per record a
    u32 LE id byte-length, the UTF-8 id bytes, then dim float32 LE values.
    Returns the byte count written.
    """
    written = 0
    ids = sorted(store._entries)
    written += sink.write(EMB1_MAGIC)
    written += sink.write(struct.pack("<I", store.dim))
    written += sink.write(struct.pack("<Q", len(ids)))
    for id_ in ids:
        raw = id_.encode("utf-8")
        written += sink.write(struct.pack("<I", len(raw)))
        written += sink.write(raw)
        written += sink.write(store._entries[id_].astype("<f4").tobytes())
    return written


def load_store(source: IO[bytes] | bytes, normalized: bool = False) -> EmbeddingStore:
    """Read an EMB1 file into a store; bit-exact inverse of save_store.

    Raises FormatError (with the failing byte offset) on bad magic,
    truncation or trailing bytes, and DuplicateIdError on repeated ids.
    """
    data = source if isinstance(source, bytes) else source.read()
    store, consumed = _parse_emb1(data, offset_base=0, normalized=normalized)
    if consumed != len(data):
        raise FormatError("trailing bytes after last record", offset=consumed)
    return store


def _parse_emb1(
    data: bytes, offset_base: int, normalized: bool = False
) -> tuple[EmbeddingStore, int]:
    """Parse one EMB1 block starting at data[0]; returns (store, bytes consumed).

    offset_base shifts reported error offsets for blocks embedded in a
    larger container.
    """
    pos = 0

    def need(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"truncated {what}", offset=offset_base + pos)
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    magic = need(4, "magic")
    if magic != EMB1_MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=offset_base)
    dim = struct.unpack("<I", need(4, "dim field"))[0]
    if dim == 0:
        raise FormatError("dim must be positive", offset=offset_base + 4)
    count = struct.unpack("<Q", need(8, "record count"))[0]
    store = EmbeddingStore(dim, normalized=normalized)
    for _ in range(count):
        id_off = offset_base + pos
        id_len = struct.unpack("<I", need(4, "id length"))[0]
        raw_id = need(id_len, "id bytes")
        try:
            id_ = raw_id.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"id is not valid UTF-8 ({exc.reason})", offset=id_off + 4)
        values = np.frombuffer(need(dim * 4, f"values for {id_!r}"), dtype="<f4")
        store.add(id_, values)
    return store, pos
