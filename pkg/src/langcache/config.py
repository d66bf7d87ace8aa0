"""Configuration files and environment overrides.

One TOML file configures the server (bind address, cache, provider); the
same [provider] and [llm] tables are reused by the CLI's eval, bench, and
synthgen commands. Environment variables beat the file, which beats
built-in defaults:

    LANGCACHE_BIND          -> bind_address
    LANGCACHE_THRESHOLD     -> cache threshold
    LANGCACHE_PERSIST_PATH  -> cache persist_path

Credentials never appear in files; the provider's api_key_env names the
variable that holds them.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cache import CacheConfig
from .provider import ProviderConfig
from .synthgen import GenConfig

ENV_BIND = "LANGCACHE_BIND"
ENV_THRESHOLD = "LANGCACHE_THRESHOLD"
ENV_PERSIST_PATH = "LANGCACHE_PERSIST_PATH"

DEFAULT_BIND = "127.0.0.1:8080"
DEFAULT_MAX_BODY_BYTES = 64 * 1024


@dataclass(frozen=True)
class ServerConfig:
    bind_address: str = DEFAULT_BIND
    cache_config: CacheConfig = field(default_factory=CacheConfig)
    provider_config: ProviderConfig = field(default_factory=ProviderConfig)
    request_timeout_ms: int = 30_000
    max_body_bytes: int = DEFAULT_MAX_BODY_BYTES

    def __post_init__(self):
        split_bind_address(self.bind_address)
        if self.request_timeout_ms < 1:
            raise ValueError("request_timeout_ms must be >= 1")
        if self.max_body_bytes < 1:
            raise ValueError("max_body_bytes must be >= 1")


def split_bind_address(bind_address: str) -> tuple[str, int]:
    host, sep, port = bind_address.rpartition(":")
    if not sep or not host:
        raise ValueError(f"bind_address must be host:port, got {bind_address!r}")
    return host, int(port)


def _read_toml(path: str) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def provider_from_dict(data: dict) -> ProviderConfig:
    known = {
        "kind",
        "model_name",
        "endpoint_url",
        "api_key_env",
        "timeout_ms",
        "max_batch",
        "expected_dim",
        "mock_seed",
    }
    return ProviderConfig(**{k: v for k, v in data.items() if k in known})


def cache_from_dict(data: dict) -> CacheConfig:
    known = {"threshold", "max_entries", "eviction", "persist_path"}
    return CacheConfig(**{k: v for k, v in data.items() if k in known})


def gen_from_dict(data: dict) -> GenConfig:
    if "llm" in data:
        table = dict(data["llm"])
        table.setdefault("llm_endpoint", table.pop("endpoint", ""))
        table.setdefault("llm_model", table.pop("model", ""))
    else:
        table = data
    known = {
        "llm_endpoint",
        "llm_model",
        "temperature",
        "concurrency",
        "max_retries",
        "domain_role",
        "timeout_ms",
        "expand_pairs",
    }
    return GenConfig(**{k: v for k, v in table.items() if k in known})


def load_provider_config(path: str) -> ProviderConfig:
    """Read a provider config from a TOML file ([provider] table or top level)."""
    data = _read_toml(path)
    return provider_from_dict(data.get("provider", data))


def load_gen_config(path: str) -> GenConfig:
    """Read a generation config from a TOML file ([llm] table or top level)."""
    return gen_from_dict(_read_toml(path))


def load_server_config(path: str | None = None, env=os.environ) -> ServerConfig:
    """Build the server config with precedence env > file > defaults."""
    data = _read_toml(path) if path else {}
    cache_data = dict(data.get("cache", {}))
    provider_data = dict(data.get("provider", {}))
    bind = env.get(ENV_BIND, data.get("bind_address", DEFAULT_BIND))
    if ENV_THRESHOLD in env:
        cache_data["threshold"] = float(env[ENV_THRESHOLD])
    if ENV_PERSIST_PATH in env:
        cache_data["persist_path"] = env[ENV_PERSIST_PATH]
    return ServerConfig(
        bind_address=bind,
        cache_config=cache_from_dict(cache_data),
        provider_config=provider_from_dict(provider_data),
        request_timeout_ms=int(data.get("request_timeout_ms", 30_000)),
        max_body_bytes=int(data.get("max_body_bytes", DEFAULT_MAX_BODY_BYTES)),
    )
