"""Exact top-k cosine similarity search over stored embeddings.

A brute-force scan over unit-normalized rows: with every stored vector (and
the query) normalized on entry, cosine similarity reduces to a dot product,
so search is one matrix-vector product plus a sort. Exact scan is the only
built-in index — the datasets this serves are small enough that metric
correctness dominates — but the search contract is written so an
approximate index could be slotted in behind the same operations.

Ties are broken by insertion order (smaller insert_seq first) so results
are deterministic. The index is fixed-dimension: the first insert pins the
dimensionality.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .core import Embedding, clamp_score, normalize
from .errors import DimensionMismatch, DuplicateId


@dataclass(frozen=True)
class SearchHit:
    """One search result: entry id and its cosine similarity to the query."""

    id: int
    score: float


class VectorIndex:
    """In-memory exact-scan vector index.

    Thread contract: reads and writes are serialized by an internal lock, so
    a search never observes a partially inserted entry.
    """

    def __init__(self):
        self._lock = threading.RLock()
        self._ids: list[int] = []
        self._seqs: list[int] = []
        self._rows: list[np.ndarray] = []
        self._pos: dict[int, int] = {}
        self._next_seq = 0
        self._dim: int | None = None
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        with self._lock:
            return len(self._ids)

    @property
    def dim(self) -> int | None:
        """Dimension pinned by the first insert, or None while empty."""
        return self._dim

    def insert(self, entry_id: int, embedding: Embedding) -> None:
        """Insert a vector under a new id, normalizing it on entry.

        Raises:
            DuplicateId: the id is already present.
            DimensionMismatch: the vector does not match the index dimension.
            ZeroVector: the vector cannot be normalized.
        """
        unit = normalize(embedding)
        with self._lock:
            if entry_id in self._pos:
                raise DuplicateId(f"id {entry_id} already present")
            if self._dim is not None and unit.dim != self._dim:
                raise DimensionMismatch(f"entry dim {unit.dim} vs index dim {self._dim}")
            if self._dim is None:
                self._dim = unit.dim
            self._pos[entry_id] = len(self._ids)
            self._ids.append(entry_id)
            self._seqs.append(self._next_seq)
            self._rows.append(unit.values)
            self._next_seq += 1
            self._matrix = None

    def remove(self, entry_id: int) -> bool:
        """Remove an id; returns True iff it was present. Re-insertion is allowed."""
        with self._lock:
            pos = self._pos.pop(entry_id, None)
            if pos is None:
                return False
            self._ids.pop(pos)
            self._seqs.pop(pos)
            self._rows.pop(pos)
            for i in range(pos, len(self._ids)):
                self._pos[self._ids[i]] = i
            self._matrix = None
            return True

    def search(self, query: Embedding, k: int) -> list[SearchHit]:
        """Top-k entries by cosine similarity, score descending.

        Ties are broken by smaller insert_seq. Returns at most
        min(k, size) hits; an empty index yields an empty list.

        Raises:
            DimensionMismatch: query dim differs from the index dim.
            ZeroVector: the query cannot be normalized.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        unit = normalize(query)
        with self._lock:
            if not self._ids:
                return []
            if unit.dim != self._dim:
                raise DimensionMismatch(f"query dim {unit.dim} vs index dim {self._dim}")
            if self._matrix is None:
                self._matrix = np.vstack(self._rows)
            scores = self._matrix @ unit.values
            seqs = np.asarray(self._seqs)
            ids = list(self._ids)
        order = np.lexsort((seqs, -scores))[: min(k, len(ids))]
        return [SearchHit(id=ids[i], score=clamp_score(scores[i])) for i in order]
