"""langcache: a semantic cache for LLM applications and its toolchain.

A lookup is a cache hit when the cosine similarity between the incoming
query's embedding and a stored query's embedding meets a threshold. The
package bundles the cache (with an exact vector index and HTTP server), the
pair-classification evalkit used to calibrate that threshold, a synthetic
duplicate/distinct pair generator, and an embedding-latency benchmark.
"""

from .cache import CacheConfig, CacheEntry, LookupOutcome, SemanticCache, load
from .core import Embedding, LabeledPair, cosine_similarity, normalize
from .errors import LangCacheError
from .evalkit import EvalReport, ForgettingReport, ScoredPair, evaluate
from .index import SearchHit, VectorIndex
from .provider import EmbedResult, ProviderConfig, embed_batch, mock_embed

__all__ = [
    "CacheConfig",
    "CacheEntry",
    "EmbedResult",
    "Embedding",
    "EvalReport",
    "ForgettingReport",
    "LabeledPair",
    "LangCacheError",
    "LookupOutcome",
    "ProviderConfig",
    "ScoredPair",
    "SearchHit",
    "SemanticCache",
    "VectorIndex",
    "cosine_similarity",
    "embed_batch",
    "evaluate",
    "load",
    "mock_embed",
    "normalize",
]

__version__ = "0.1.0"
