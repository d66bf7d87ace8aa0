"""A tiny trainable sentence encoder: hashed bag of tokens.

Tokens are lowercased word characters hashed (SHA-256, so bucket assignment
is stable across runs and platforms) into a fixed bucket table; a sentence
embedding is the mean of its bucket vectors, L2-normalized. This is
deliberately the smallest encoder that contrastive fine-tuning can steer:
no pretrained weights to download, seconds to train on CPU, and the same
training recipe (optimizer, batch size, gradient-norm clip) transfers
unchanged to a real transformer encoder on real hardware.
"""

from __future__ import annotations

import hashlib
import re

import torch
from torch import nn

_TOKEN_RE = re.compile(r"\w+")

# Reserved bucket for texts with no word characters.
_EMPTY_TOKEN = "\x00empty"

FORMAT_VERSION = 1


def _bucket(token: str, num_buckets: int) -> int:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % num_buckets


def tokenize(text: str) -> list[str]:
    tokens = _TOKEN_RE.findall(text.lower())
    return tokens if tokens else [_EMPTY_TOKEN]


class HashedBagEncoder(nn.Module):
    """Mean of hashed token embeddings, L2-normalized. Double precision so
    downstream similarity comparisons are not quantized by the encoder."""

    def __init__(self, num_buckets: int = 4096, embed_dim: int = 64, seed: int = 0):
        super().__init__()
        if num_buckets < 1 or embed_dim < 2:
            raise ValueError("need num_buckets >= 1 and embed_dim >= 2")
        self.num_buckets = num_buckets
        self.embed_dim = embed_dim
        self.init_seed = seed
        generator = torch.Generator().manual_seed(seed)
        weight = torch.randn(num_buckets, embed_dim, generator=generator, dtype=torch.float64)
        weight /= weight.norm(dim=1, keepdim=True)
        self.bag = nn.EmbeddingBag(num_buckets, embed_dim, mode="mean", dtype=torch.float64)
        with torch.no_grad():
            self.bag.weight.copy_(weight)

    def token_ids(self, text: str) -> list[int]:
        return [_bucket(tok, self.num_buckets) for tok in tokenize(text)]

    def forward(self, texts: list[str]) -> torch.Tensor:
        flat: list[int] = []
        offsets: list[int] = []
        for text in texts:
            offsets.append(len(flat))
            flat.extend(self.token_ids(text))
        ids = torch.tensor(flat, dtype=torch.long)
        offs = torch.tensor(offsets, dtype=torch.long)
        pooled = self.bag(ids, offs)
        return torch.nn.functional.normalize(pooled, p=2, dim=1, eps=1e-12)

    def encode(self, texts: list[str]) -> torch.Tensor:
        """Inference helper: forward pass without gradient tracking."""
        with torch.no_grad():
            return self.forward(texts)


def save_model(encoder: HashedBagEncoder, path: str) -> str:
    torch.save(
        {
            "format_version": FORMAT_VERSION,
            "num_buckets": encoder.num_buckets,
            "embed_dim": encoder.embed_dim,
            "init_seed": encoder.init_seed,
            "state_dict": encoder.state_dict(),
        },
        path,
    )
    return path


def load_model(path: str) -> HashedBagEncoder:
    payload = torch.load(path, weights_only=True)
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {payload.get('format_version')!r}")
    encoder = HashedBagEncoder(
        num_buckets=payload["num_buckets"],
        embed_dim=payload["embed_dim"],
        seed=payload["init_seed"],
    )
    encoder.load_state_dict(payload["state_dict"])
    encoder.eval()
    return encoder
