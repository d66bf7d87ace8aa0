"""The semantic cache: embed, search, threshold, store, persist.

A lookup embeds the incoming query, takes the single best stored entry by
cosine similarity, and declares a hit iff that score meets the threshold.
Hit semantics are strictly top-1 — no voting over k entries — because the
hit/miss decision is binary.

Near-duplicate puts (textually different, semantically close) are stored as
separate entries; only exact-text puts (after trimming) replace an existing
response. Which near-duplicates *should* collapse is exactly what threshold
calibration is for, so the cache does not guess.

Snapshot format: JSON Lines. Line one is a header
``{"format_version", "model_id", "dim", "threshold", "checksum"}``; each
further line is one entry with its embedding encoded as base64 of
little-endian 64-bit floats (lossless). Runtime hit/miss counters are not
persisted, which keeps save idempotent: save -> load -> save is
byte-identical.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass

import numpy as np

from .core import Embedding, normalize, validate_threshold
from .errors import CorruptSnapshot, EmptyQuery, ModelMismatch
from .index import VectorIndex
from .provider import ProviderConfig, embed_batch

SNAPSHOT_FORMAT_VERSION = 1

DEFAULT_THRESHOLD = 0.9

EVICTION_LRU = "lru"
EVICTION_FIFO = "fifo"


@dataclass
class CacheConfig:
    """Cache behavior knobs.

    The default threshold of 0.9 is deliberately conservative; calibrate a
    per-domain value with the evalkit (``langcache calibrate``) before
    trusting hit quality.
    """

    threshold: float = DEFAULT_THRESHOLD
    max_entries: int = 10_000
    eviction: str = EVICTION_LRU
    persist_path: str | None = None

    def __post_init__(self):
        validate_threshold(self.threshold)
        if self.max_entries < 1:
            raise ValueError("max_entries must be >= 1")
        if self.eviction not in (EVICTION_LRU, EVICTION_FIFO):
            raise ValueError(f"unknown eviction policy {self.eviction!r}")


@dataclass
class CacheEntry:
    """One stored (query, response) pair with its embedding."""

    id: int
    query_text: str
    response_text: str
    embedding: Embedding
    created_at: int
    hit_count: int = 0
    model_id: str = ""


@dataclass(frozen=True)
class LookupOutcome:
    """Result of one lookup. similarity is the best score found and is
    present whenever the cache was non-empty, hit or miss."""

    hit: bool
    entry: CacheEntry | None = None
    similarity: float | None = None


@dataclass
class CacheStats:
    size: int
    hits: int
    misses: int
    hit_rate: float
    evictions: int

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "hits": self.hits,
            "misses": self.misses,
            "hit_rate": self.hit_rate,
            "evictions": self.evictions,
        }


@dataclass
class _Slot:
    entry: CacheEntry
    insert_seq: int
    last_used_seq: int


class SemanticCache:
    """Similarity-threshold cache over a provider and a vector index.

    Thread-safe: all operations serialize on an internal lock, so lookups
    never observe a partially applied put or eviction.
    """

    def __init__(self, cache_config: CacheConfig, provider_config: ProviderConfig):
        self.config = cache_config
        self.provider_config = provider_config
        self._lock = threading.RLock()
        self._index = VectorIndex()
        self._slots: dict[int, _Slot] = {}
        self._by_text: dict[str, int] = {}
        self._next_id = 1
        self._seq = 0
        self._hits = 0
        self._misses = 0
        self._evictions = 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._slots)

    # -- internal helpers -------------------------------------------------

    def _tick(self) -> int:
        self._seq += 1
        return self._seq

    def _embed_one(self, text: str) -> Embedding:
        result = embed_batch(self.provider_config, [text])
        return normalize(result.embeddings[0])

    def _evict_until_room(self) -> None:
        while len(self._slots) >= self.config.max_entries:
            if self.config.eviction == EVICTION_FIFO:
                victim = min(self._slots.values(), key=lambda s: s.insert_seq)
            else:
                victim = min(self._slots.values(), key=lambda s: s.last_used_seq)
            self._drop(victim.entry.id)
            self._evictions += 1

    def _drop(self, entry_id: int) -> None:
        slot = self._slots.pop(entry_id)
        self._by_text.pop(slot.entry.query_text, None)
        self._index.remove(entry_id)

    # -- operations --------------------------------------------------------

    def put(self, query_text: str, response_text: str) -> int:
        """Store a response under a query; returns the entry id.

        An exact-text repeat (after trimming) replaces the existing entry's
        response in place and returns its id — no duplicate vector is
        stored. Otherwise the query is embedded, normalized, and inserted,
        evicting per policy first if the cache is full.
        """
        query = query_text.strip()
        if not query:
            raise EmptyQuery("put requires a non-empty query")
        with self._lock:
            existing = self._by_text.get(query)
            if existing is not None:
                slot = self._slots[existing]
                slot.entry.response_text = response_text
                slot.last_used_seq = self._tick()
                return existing
        # Embed outside the lock: provider calls can be slow and must not
        # block concurrent lookups.
        embedding = self._embed_one(query)
        with self._lock:
            existing = self._by_text.get(query)
            if existing is not None:
                slot = self._slots[existing]
                slot.entry.response_text = response_text
                slot.last_used_seq = self._tick()
                return existing
            self._evict_until_room()
            entry_id = self._next_id
            self._next_id += 1
            entry = CacheEntry(
                id=entry_id,
                query_text=query,
                response_text=response_text,
                embedding=embedding,
                created_at=int(time.time() * 1000),
                hit_count=0,
                model_id=self.provider_config.model_name,
            )
            seq = self._tick()
            self._slots[entry_id] = _Slot(entry=entry, insert_seq=seq, last_used_seq=seq)
            self._by_text[query] = entry_id
            self._index.insert(entry_id, embedding)
            return entry_id

    def lookup(self, query_text: str, threshold_override: float | None = None) -> LookupOutcome:
        """Declare hit or miss for a query against the stored entries.

        Hit iff the top-1 cosine similarity >= the effective threshold
        (override when given, else the configured one). A hit increments
        the entry's hit_count; nothing else is mutated beyond the hit/miss
        counters.
        """
        query = query_text.strip()
        if not query:
            raise EmptyQuery("lookup requires a non-empty query")
        threshold = self.config.threshold
        if threshold_override is not None:
            threshold = validate_threshold(threshold_override)
        embedding = self._embed_one(query)
        with self._lock:
            hits = self._index.search(embedding, k=1)
            if not hits:
                self._misses += 1
                return LookupOutcome(hit=False)
            best = hits[0]
            if best.score >= threshold:
                slot = self._slots[best.id]
                slot.entry.hit_count += 1
                slot.last_used_seq = self._tick()
                self._hits += 1
                return LookupOutcome(hit=True, entry=slot.entry, similarity=best.score)
            self._misses += 1
            return LookupOutcome(hit=False, similarity=best.score)

    def remove(self, entry_id: int) -> bool:
        """Delete an entry by id; True iff it existed."""
        with self._lock:
            if entry_id not in self._slots:
                return False
            self._drop(entry_id)
            return True

    def stats(self) -> CacheStats:
        with self._lock:
            lookups = self._hits + self._misses
            return CacheStats(
                size=len(self._slots),
                hits=self._hits,
                misses=self._misses,
                hit_rate=self._hits / max(1, lookups),
                evictions=self._evictions,
            )

    # -- persistence -------------------------------------------------------

    def save(self, path: str | None = None) -> str:
        """Write the snapshot; returns the path written.

        Entries are written in insertion order so that tie-breaking (and the
        snapshot bytes) survive a round-trip. Counters are not included.
        """
        target = path or self.config.persist_path
        if not target:
            raise ValueError("no persist_path configured and no path given")
        with self._lock:
            ordered = sorted(self._slots.values(), key=lambda s: s.insert_seq)
            entry_lines = [_entry_line(s.entry) for s in ordered]
            dim = self._index.dim or 0
            header = {
                "format_version": SNAPSHOT_FORMAT_VERSION,
                "model_id": self.provider_config.model_name,
                "dim": dim,
                "threshold": self.config.threshold,
                "checksum": _checksum(entry_lines),
            }
        content = "\n".join([json.dumps(header, separators=(",", ":"))] + entry_lines) + "\n"
        tmp = f"{target}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(content)
        os.replace(tmp, target)
        return target


def _checksum(entry_lines: list[str]) -> str:
    return hashlib.sha256("\n".join(entry_lines).encode("utf-8")).hexdigest()


def _entry_line(entry: CacheEntry) -> str:
    vec = np.asarray(entry.embedding.values, dtype="<f8")
    record = {
        "id": entry.id,
        "query_text": entry.query_text,
        "response_text": entry.response_text,
        "created_at": entry.created_at,
        "hit_count": entry.hit_count,
        "model_id": entry.model_id,
        "embedding": base64.b64encode(vec.tobytes()).decode("ascii"),
    }
    return json.dumps(record, separators=(",", ":"))


def _decode_embedding(b64: str, model_id: str) -> Embedding:
    raw = base64.b64decode(b64.encode("ascii"))
    vec = np.frombuffer(raw, dtype="<f8")
    return Embedding(values=vec, model_id=model_id, normalized=True)


def load(
    persist_path: str,
    provider_config: ProviderConfig,
    cache_config: CacheConfig | None = None,
) -> SemanticCache:
    """Restore a cache from a snapshot file.

    The snapshot's model_id must match the provider's configured model.
    When no cache_config is given, the threshold stored in the header is
    used with default limits, and persist_path is carried over.

    Raises:
        CorruptSnapshot: malformed lines or checksum mismatch.
        ModelMismatch: snapshot written by a different embedding model.
        OSError: unreadable file.
    """
    with open(persist_path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CorruptSnapshot("snapshot is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CorruptSnapshot(f"unparseable header: {exc}") from exc
    if header.get("format_version") != SNAPSHOT_FORMAT_VERSION:
        raise CorruptSnapshot(f"unsupported format_version {header.get('format_version')!r}")
    entry_lines = lines[1:]
    if header.get("checksum") != _checksum(entry_lines):
        raise CorruptSnapshot("checksum mismatch")
    if header.get("model_id") != provider_config.model_name:
        raise ModelMismatch(
            f"snapshot model {header.get('model_id')!r} != provider model "
            f"{provider_config.model_name!r}"
        )
    if cache_config is None:
        cache_config = CacheConfig(
            threshold=float(header["threshold"]), persist_path=persist_path
        )
    cache = SemanticCache(cache_config, provider_config)
    max_id = 0
    for line in entry_lines:
        try:
            record = json.loads(line)
            entry = CacheEntry(
                id=int(record["id"]),
                query_text=record["query_text"],
                response_text=record["response_text"],
                embedding=_decode_embedding(record["embedding"], record["model_id"]),
                created_at=int(record["created_at"]),
                hit_count=int(record["hit_count"]),
                model_id=record["model_id"],
            )
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise CorruptSnapshot(f"unparseable entry line: {exc}") from exc
        seq = cache._tick()
        cache._slots[entry.id] = _Slot(entry=entry, insert_seq=seq, last_used_seq=seq)
        cache._by_text[entry.query_text] = entry.id
        cache._index.insert(entry.id, entry.embedding)
        max_id = max(max_id, entry.id)
    cache._next_id = max_id + 1
    return cache
