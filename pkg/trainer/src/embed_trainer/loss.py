"""Online contrastive loss over labeled sentence pairs.

The batch is mined for its hard pairs before any loss is computed:

* hard positives — duplicate pairs whose cosine distance exceeds the
  *closest* negative pair's distance (if the batch has no negatives, every
  positive is hard);
* hard negatives — non-duplicate pairs whose cosine distance is below the
  *farthest* positive pair's distance (no positives: every negative is hard).

The loss is then a plain sum, not a mean:

    total = sum(d_i^2 over hard positives)
          + sum(max(0, margin - d_i)^2 over hard negatives)

with d_i = 1 - cos(emb1_i, emb2_i). Summing (rather than averaging) over
the hard subset matters for learning-rate interpretation, so it is part of
the contract here. Easy pairs contribute exactly zero, which concentrates
gradient on the region where duplicates and non-duplicates are still
confusable.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F


class EmptyBatch(ValueError):
    """The loss needs at least one pair."""


@dataclass(frozen=True)
class LossBreakdown:
    """Loss value plus how many pairs were mined as hard."""

    total: float
    n_hard_positives: int
    n_hard_negatives: int
    batch_size: int

    def __post_init__(self):
        if self.total < 0:
            raise ValueError("loss cannot be negative")
        if self.n_hard_positives + self.n_hard_negatives > self.batch_size:
            raise ValueError("hard pairs cannot outnumber the batch")


def _as_2d_tensor(values, name: str) -> torch.Tensor:
    tensor = torch.as_tensor(values, dtype=torch.float64)
    if tensor.ndim != 2:
        raise ValueError(f"{name} must be a batch of vectors, got shape {tuple(tensor.shape)}")
    return tensor


def loss_tensor(
    emb1: torch.Tensor, emb2: torch.Tensor, labels: torch.Tensor, margin: float
) -> tuple[torch.Tensor, int, int]:
    """Differentiable core: returns (loss, n_hard_positives, n_hard_negatives)."""
    if emb1.shape[0] == 0:
        raise EmptyBatch("empty batch")
    if emb1.shape != emb2.shape or labels.shape[0] != emb1.shape[0]:
        raise ValueError(
            f"shape mismatch: emb1 {tuple(emb1.shape)}, emb2 {tuple(emb2.shape)}, "
            f"labels {tuple(labels.shape)}"
        )
    distances = 1.0 - F.cosine_similarity(emb1, emb2)
    positive = labels == 1
    negative = labels == 0
    pos_d = distances[positive]
    neg_d = distances[negative]
    if neg_d.numel() > 0 and pos_d.numel() > 0:
        hard_pos = pos_d[pos_d > neg_d.min()]
        hard_neg = neg_d[neg_d < pos_d.max()]
    else:
        hard_pos = pos_d
        hard_neg = neg_d
    zero = distances.sum() * 0.0  # keeps the graph alive for all-easy batches
    total = zero + hard_pos.pow(2).sum() + F.relu(margin - hard_neg).pow(2).sum()
    return total, int(hard_pos.numel()), int(hard_neg.numel())


def online_contrastive_loss(emb1, emb2, labels, margin: float = 0.5) -> LossBreakdown:
    """Mine the batch's hard pairs and evaluate the loss on them.

    Accepts any array-likes; labels must be 0/1. Raises EmptyBatch for an
    empty batch and ValueError for mismatched shapes or bad labels.
    """
    if len(emb1) == 0:
        raise EmptyBatch("empty batch")
    t1 = _as_2d_tensor(emb1, "emb1")
    t2 = _as_2d_tensor(emb2, "emb2")
    lab = torch.as_tensor(labels)
    if lab.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if lab.numel() and not set(lab.tolist()) <= {0, 1}:
        raise ValueError("labels must be 0 or 1")
    with torch.no_grad():
        total, n_hp, n_hn = loss_tensor(t1, t2, lab, margin)
    return LossBreakdown(
        total=float(total),
        n_hard_positives=n_hp,
        n_hard_negatives=n_hn,
        batch_size=int(lab.numel()),
    )
