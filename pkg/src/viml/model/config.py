"""Model hyperparameter schema."""

from __future__ import annotations

from dataclasses import asdict, dataclass

FUSION_VARIANTS = ("addition", "linear", "mlp", "transformer1", "transformer2")
POOLING_MODES = ("mean", "first")
NULL_TEXT_SOURCES = ("zeros", "empty_string_embedding")


@dataclass
class ModelConfig:
    """Architecture and loss hyperparameters for the tri-modal network.

    Defaults follow the reference setup: 256-d embeddings from linear
    projections per modality, 2-layer Transformer encoders, a 2-layer
    Transformer fusion module over the video and text embeddings, InfoNCE
    temperature 0.03, and text dropout probability 0.8. ``use_video=False``
    drops the video branch entirely (music+text model); the fused query
    embedding then equals the text embedding.
    """

    embed_dim: int = 256
    video_layers: int = 2
    music_layers: int = 2
    text_layers: int = 2
    fusion_variant: str = "transformer2"
    heads: int = 4
    ff_dim: int = 1024
    tau: float = 0.03
    text_dropout_p: float = 0.8
    video_base_dim: int = 512
    music_base_dim: int = 256
    text_base_dim: int = 512
    use_video: bool = True
    pooling: str = "mean"
    max_positions: int = 64
    null_text_source: str = "zeros"
    # Initialization details. Output-layer biases start at embed_bias_init on
    # every coordinate so that initial embeddings share a dominant direction:
    # with tau as small as 0.03, uncorrelated initial embeddings would make
    # the softmax extremely peaked and the first steps unstable.
    init_scale: float = 0.05
    embed_bias_init: float = 4.0

    def __post_init__(self) -> None:
        if self.embed_dim < 1 or self.heads < 1:
            raise ValueError("embed_dim and heads must be positive")
        if self.embed_dim % self.heads != 0:
            raise ValueError("embed_dim must be divisible by heads")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not 0.0 <= self.text_dropout_p <= 1.0:
            raise ValueError("text_dropout_p must be in [0, 1]")
        if self.fusion_variant not in FUSION_VARIANTS:
            raise ValueError(f"unknown fusion variant {self.fusion_variant!r}")
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"unknown pooling mode {self.pooling!r}")
        if self.null_text_source not in NULL_TEXT_SOURCES:
            raise ValueError(f"unknown null text source {self.null_text_source!r}")
        for name in ("video_base_dim", "music_base_dim", "text_base_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def base_dim(self, modality: str) -> int:
        return {
            "video": self.video_base_dim,
            "music": self.music_base_dim,
            "text": self.text_base_dim,
        }[modality]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        return cls(**raw)
