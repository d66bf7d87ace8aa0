"""Uniform embedding generation over remote HTTP APIs and a deterministic mock.

The remote client speaks the widely adopted embeddings-API JSON shape —
request ``{"model": ..., "input": [texts]}``, response
``{"data": [{"index": i, "embedding": [...]}]}`` — which covers
OpenAI-compatible servers and local embedding servers with a single code
path. Credentials are only ever read from the environment variable named in
the config, never from config files.

Every call reports its wall time (request start to last byte) so the
latency benchmark can reuse the same client.
"""

from __future__ import annotations

import hashlib
import os
import random
import time
from dataclasses import dataclass

import numpy as np
import requests

from .core import Embedding, normalize
from .errors import DimensionMismatch, EmptyInput, ProviderHttpError, ProviderTimeout

MOCK_KIND = "mock"
REMOTE_KIND = "remote_http"

DEFAULT_MOCK_DIM = 256

# Retry policy for timeouts and 5xx: up to 3 attempts, exponential backoff
# with full jitter. Sleeps of failed attempts land inside wall_time_s; a
# clean first attempt measures exactly one request.
MAX_ATTEMPTS = 3
BACKOFF_BASE_S = 0.25
BACKOFF_FACTOR = 4.0


@dataclass(frozen=True)
class ProviderConfig:
    """Which embedding source to call and how.

    ``expected_dim`` doubles as the mock's vector dimension (default 256
    when unset); ``mock_seed`` parameterizes the mock's pseudorandom
    vectors so tests can pin concrete scores.
    """

    kind: str = MOCK_KIND
    model_name: str = "mock"
    endpoint_url: str = ""
    api_key_env: str = ""
    timeout_ms: int = 30_000
    max_batch: int = 64
    expected_dim: int | None = None
    mock_seed: int = 0

    def __post_init__(self):
        if self.kind not in (MOCK_KIND, REMOTE_KIND):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be >= 1")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if self.expected_dim is not None and self.expected_dim < 1:
            raise ValueError("expected_dim must be positive")
        if self.kind == REMOTE_KIND and not self.endpoint_url:
            raise ValueError("remote_http provider requires endpoint_url")


@dataclass(frozen=True)
class EmbedResult:
    """Embeddings for one batch plus the latency observable."""

    embeddings: list[Embedding]
    wall_time_s: float
    text_count: int

    def __post_init__(self):
        if len(self.embeddings) != self.text_count:
            raise ValueError("embedding count must equal text_count")
        if self.wall_time_s < 0:
            raise ValueError("wall_time_s must be nonnegative")
        dims = {e.dim for e in self.embeddings}
        models = {e.model_id for e in self.embeddings}
        if len(dims) > 1 or len(models) > 1:
            raise ValueError("all embeddings in a result must share dim and model_id")


def mock_embed(text: str, dim: int, seed: int) -> Embedding:
    """Deterministic pseudorandom unit vector for a text.

    The text and seed are hashed (SHA-256, platform-independent) into an RNG
    seed; a Gaussian vector of that RNG is normalized to unit length.
    Distinct texts land nearly orthogonal in high dimensions, which is what
    makes hit/miss tests clean.
    """
    if dim < 2:
        raise ValueError("mock embeddings need dim >= 2")
    digest = hashlib.sha256(f"{seed}\x1f{text}".encode("utf-8")).digest()
    rng_seed = int.from_bytes(digest[:8], "little")
    rng = np.random.default_rng(rng_seed)
    vec = rng.standard_normal(dim)
    return normalize(Embedding(values=vec, model_id=f"mock-{dim}"))


def _validate_texts(config: ProviderConfig, texts) -> list[str]:
    texts = list(texts)
    if not texts:
        raise EmptyInput("embed_batch requires at least one text")
    if any(not t for t in texts):
        raise EmptyInput("embed_batch texts must be non-empty")
    if len(texts) > config.max_batch:
        raise ValueError(f"batch of {len(texts)} exceeds max_batch={config.max_batch}")
    return texts


def _auth_headers(config: ProviderConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if config.api_key_env:
        key = os.environ.get(config.api_key_env)
        if key is None:
            raise ValueError(
                f"api_key_env names {config.api_key_env!r} but that variable is not set"
            )
        headers["Authorization"] = f"Bearer {key}"
    return headers


def _post_with_retries(config: ProviderConfig, payload: dict) -> dict:
    timeout_s = config.timeout_ms / 1000.0
    headers = _auth_headers(config)
    last_exc: Exception | None = None
    for attempt in range(MAX_ATTEMPTS):
        try:
            resp = requests.post(
                config.endpoint_url, json=payload, headers=headers, timeout=timeout_s
            )
        except requests.Timeout:
            last_exc = ProviderTimeout(
                f"no response from {config.endpoint_url} within {config.timeout_ms} ms"
            )
        except requests.RequestException as exc:
            last_exc = ProviderHttpError(
                f"request to {config.endpoint_url} failed: {exc}", status=None
            )
        else:
            if resp.status_code >= 500:
                last_exc = ProviderHttpError(
                    f"provider returned {resp.status_code}",
                    status=resp.status_code,
                    body=resp.text,
                )
            elif resp.status_code >= 400:
                raise ProviderHttpError(
                    f"provider returned {resp.status_code}",
                    status=resp.status_code,
                    body=resp.text,
                )
            else:
                try:
                    return resp.json()
                except ValueError:
                    raise ProviderHttpError(
                        "provider returned non-JSON body",
                        status=resp.status_code,
                        body=resp.text,
                    )
        if attempt < MAX_ATTEMPTS - 1:
            time.sleep(random.uniform(0, BACKOFF_BASE_S * BACKOFF_FACTOR**attempt))
    assert last_exc is not None
    raise last_exc


def _parse_remote_response(config: ProviderConfig, body: dict, n_texts: int) -> list[Embedding]:
    data = body.get("data")
    if not isinstance(data, list) or len(data) != n_texts:
        got = len(data) if isinstance(data, list) else type(data).__name__
        raise ProviderHttpError(
            f"provider returned {got} embeddings for {n_texts} inputs", status=None
        )
    ordered: list[list[float] | None] = [None] * n_texts
    for item in data:
        try:
            ordered[int(item["index"])] = item["embedding"]
        except (KeyError, TypeError, ValueError, IndexError):
            raise ProviderHttpError("malformed item in provider 'data' array", status=None)
    if any(v is None for v in ordered):
        raise ProviderHttpError("provider 'data' indexes do not cover the batch", status=None)
    return [Embedding(values=vec, model_id=config.model_name) for vec in ordered]


def embed_batch(config: ProviderConfig, texts) -> EmbedResult:
    """Embed a batch of texts, preserving input order.

    wall_time_s measures request start to last byte received; for the mock
    it measures the local computation. When expected_dim is configured,
    every returned embedding must match it.
    """
    texts = _validate_texts(config, texts)
    start = time.perf_counter()
    if config.kind == MOCK_KIND:
        dim = config.expected_dim or DEFAULT_MOCK_DIM
        embeddings = [
            Embedding(
                values=mock_embed(t, dim, config.mock_seed).values,
                model_id=config.model_name,
                normalized=True,
            )
            for t in texts
        ]
    else:
        payload = {"model": config.model_name, "input": texts}
        body = _post_with_retries(config, payload)
        embeddings = _parse_remote_response(config, body, len(texts))
    wall = time.perf_counter() - start
    if config.expected_dim is not None:
        for emb in embeddings:
            if emb.dim != config.expected_dim:
                raise DimensionMismatch(
                    f"provider returned dim {emb.dim}, expected {config.expected_dim}"
                )
    return EmbedResult(embeddings=embeddings, wall_time_s=wall, text_count=len(texts))
