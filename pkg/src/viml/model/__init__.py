"""Tri-modal contrastive model: branches, fusion variants, and losses."""

from .config import FUSION_VARIANTS, ModelConfig
from .losses import (
    cosine,
    cosine_matrix,
    infonce,
    infonce_from_scores,
    symmetric_loss,
    symmetric_loss_and_grad,
)
from .network import (
    Embedding,
    ForwardPass,
    NullTextFeature,
    TriModalExample,
    ViMLModel,
    text_dropout,
)

__all__ = [
    "FUSION_VARIANTS",
    "ModelConfig",
    "cosine",
    "cosine_matrix",
    "infonce",
    "infonce_from_scores",
    "symmetric_loss",
    "symmetric_loss_and_grad",
    "Embedding",
    "ForwardPass",
    "NullTextFeature",
    "TriModalExample",
    "ViMLModel",
    "text_dropout",
]
