"""embed-trainer: contrastive fine-tuning of small duplicate-query encoders.

Trains with the online contrastive loss (hard-pair mining, squared
distance / squared hinge terms) under the single-epoch, clipped-gradient
recipe, and serves the result over the embeddings HTTP protocol so the
cache toolchain can evaluate it like any other provider.
"""

from .encoder import HashedBagEncoder, load_model, save_model
from .loss import EmptyBatch, LossBreakdown, online_contrastive_loss
from .server import EmbeddingServer, serve_embeddings
from .train import TrainConfig, TrainSummary, train

__all__ = [
    "EmbeddingServer",
    "EmptyBatch",
    "HashedBagEncoder",
    "LossBreakdown",
    "TrainConfig",
    "TrainSummary",
    "load_model",
    "online_contrastive_loss",
    "save_model",
    "serve_embeddings",
    "train",
]

__version__ = "0.1.0"
