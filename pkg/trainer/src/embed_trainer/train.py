"""Contrastive fine-tuning loop.

The default hyperparameters are the deployment recipe this trainer
reproduces at desk scale: a single epoch, learning rate 6.5383156211679e-5,
batch size 16, Adam, and gradient norms clipped to 0.5. The single epoch
and the tight norm clip are what keep fine-tuning from erasing the
encoder's prior behavior on other domains, so the loop treats them as
first-class, instrumented settings rather than incidental knobs: every
step's post-clip gradient norm is recorded in the summary.

The learning-rate schedule is constant; no warmup or decay.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import torch

from .data import load_pairs_csv
from .encoder import HashedBagEncoder, save_model
from .loss import loss_tensor

OPTIMIZER_ADAM = "adam"
DISTANCE_COSINE = "cosine_distance"

DEFAULT_LEARNING_RATE = 6.5383156211679e-5


@dataclass(frozen=True)
class TrainConfig:
    base_model_id: str = "hashed-bag-4096x64"
    epochs: int = 1
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = 16
    optimizer: str = OPTIMIZER_ADAM
    max_grad_norm: float = 0.5
    margin: float = 0.5
    distance: str = DISTANCE_COSINE
    num_buckets: int = 4096
    embed_dim: int = 64

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer != OPTIMIZER_ADAM:
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")
        if self.max_grad_norm <= 0:
            raise ValueError("max_grad_norm must be positive")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.distance != DISTANCE_COSINE:
            raise ValueError(f"unsupported distance {self.distance!r}")


@dataclass
class TrainSummary:
    steps: int
    epochs: int
    first_batch_loss: float
    final_epoch_mean_loss: float
    model_path: str
    learning_rate: float
    batch_size: int
    max_grad_norm: float
    seed: int
    post_clip_grad_norms: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "epochs": self.epochs,
            "first_batch_loss": self.first_batch_loss,
            "final_epoch_mean_loss": self.final_epoch_mean_loss,
            "model_path": self.model_path,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_grad_norm": self.max_grad_norm,
            "seed": self.seed,
            "post_clip_grad_norms": self.post_clip_grad_norms,
        }


def _total_grad_norm(parameters) -> float:
    squares = [float(p.grad.norm()) ** 2 for p in parameters if p.grad is not None]
    return math.sqrt(sum(squares))


def train(
    config: TrainConfig,
    train_pairs_csv: str,
    output_dir: str,
    seed: int = 0,
) -> TrainSummary:
    """Fine-tune a fresh encoder on a labeled pair CSV.

    Deterministic for a fixed seed: the seed fixes the encoder init and the
    per-epoch shuffle. Writes model.pt and summary.json into output_dir.
    """
    pairs = load_pairs_csv(train_pairs_csv)
    os.makedirs(output_dir, exist_ok=True)
    torch.manual_seed(seed)
    encoder = HashedBagEncoder(
        num_buckets=config.num_buckets, embed_dim=config.embed_dim, seed=seed
    )
    encoder.train()
    optimizer = torch.optim.Adam(encoder.parameters(), lr=config.learning_rate)
    shuffle_rng = torch.Generator().manual_seed(seed + 1)

    steps = 0
    first_batch_loss: float | None = None
    last_epoch_losses: list[float] = []
    grad_norms: list[float] = []
    for _ in range(config.epochs):
        order = torch.randperm(len(pairs), generator=shuffle_rng).tolist()
        last_epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [pairs[i] for i in order[start : start + config.batch_size]]
            emb1 = encoder([p.question1 for p in batch])
            emb2 = encoder([p.question2 for p in batch])
            labels = torch.tensor([p.is_duplicate for p in batch])
            loss, _, _ = loss_tensor(emb1, emb2, labels, config.margin)
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(encoder.parameters(), config.max_grad_norm)
            grad_norms.append(_total_grad_norm(encoder.parameters()))
            optimizer.step()
            steps += 1
            batch_loss = float(loss.detach())
            if first_batch_loss is None:
                first_batch_loss = batch_loss
            last_epoch_losses.append(batch_loss)

    encoder.eval()
    model_path = save_model(encoder, os.path.join(output_dir, "model.pt"))
    summary = TrainSummary(
        steps=steps,
        epochs=config.epochs,
        first_batch_loss=first_batch_loss,
        final_epoch_mean_loss=sum(last_epoch_losses) / len(last_epoch_losses),
        model_path=model_path,
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        max_grad_norm=config.max_grad_norm,
        seed=seed,
        post_clip_grad_norms=grad_norms,
    )
    with open(os.path.join(output_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary.to_dict(), fh, indent=2)
        fh.write("\n")
    return summary
