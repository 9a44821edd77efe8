"""Language-guided music-for-video retrieval at desk scale."""

from .evaluation import (
    PoolSpec,
    RetrievalReport,
    build_pool,
    chance_baseline,
    ensemble_score,
    evaluate,
    median_rank,
    rank_of_positive,
    recall_at_k,
)
from .features import (
    BaseFeatureSequence,
    FeatureStore,
    HashingTextEncoder,
    aggregate_frames,
    read_store,
    write_store,
)
from .model import (
    Embedding,
    ModelConfig,
    NullTextFeature,
    TriModalExample,
    ViMLModel,
    cosine,
    infonce,
    symmetric_loss,
    text_dropout,
)
from .synthetic import SyntheticSpec, generate_synthetic
from .tagtext import (
    AnalogyExample,
    TagPrediction,
    TagSet,
    TemplateBank,
    build_analogy_prompt,
    data2text,
    fill_templates,
    filter_tags,
    prompt2text,
    rephrase,
    tags_to_text,
)
from .training import TrainConfig, TrainLog, preset, train

__version__ = "0.1.0"

__all__ = [
    "PoolSpec",
    "RetrievalReport",
    "build_pool",
    "chance_baseline",
    "ensemble_score",
    "evaluate",
    "median_rank",
    "rank_of_positive",
    "recall_at_k",
    "BaseFeatureSequence",
    "FeatureStore",
    "HashingTextEncoder",
    "aggregate_frames",
    "read_store",
    "write_store",
    "Embedding",
    "ModelConfig",
    "NullTextFeature",
    "TriModalExample",
    "ViMLModel",
    "cosine",
    "infonce",
    "symmetric_loss",
    "text_dropout",
    "SyntheticSpec",
    "generate_synthetic",
    "AnalogyExample",
    "TagPrediction",
    "TagSet",
    "TemplateBank",
    "build_analogy_prompt",
    "data2text",
    "fill_templates",
    "filter_tags",
    "prompt2text",
    "rephrase",
    "tags_to_text",
    "TrainConfig",
    "TrainLog",
    "preset",
    "train",
]
