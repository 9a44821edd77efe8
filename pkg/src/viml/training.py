"""Contrastive training loop and experiment presets.

Training minimizes the symmetric InfoNCE loss between fused (video+text)
query embeddings and music embeddings over seeded shuffled mini-batches,
using Adam with decoupled weight decay. Runs are fully deterministic given
the config seed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .features import FeatureStore, HashingTextEncoder
from .model import ModelConfig, NullTextFeature, ViMLModel, symmetric_loss_and_grad
from .tagtext import (
    AnalogyExample,
    MockLlmClient,
    TrackTextRecord,
    synthesize_description,
    tags_to_text,
)

TEXT_SOURCES = ("tags", "data2text", "prompt2text", "human", "none")

PRESET_NAMES = (
    "table1_viml",
    "table2_grid",
    "dropout_ablation",
    "fusion_study",
    "musictext",
)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    batch_size: int = 64
    epochs: int = 5
    learning_rate: float = 1e-4
    weight_decay: float = 0.0
    seed: int = 0
    text_source: str = "tags"
    checkpoint_every: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2 for in-batch negatives")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.text_source not in TEXT_SOURCES:
            raise ValueError(f"unknown text_source {self.text_source!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        raw = dict(raw)
        model = raw.pop("model", {})
        if isinstance(model, dict):
            model = ModelConfig.from_dict(model)
        return cls(model=model, **raw)


@dataclass
class StepRecord:
    step: int
    loss: float
    dropout_fraction: float


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    snapshot: dict | None = None


@dataclass
class TrainLog:
    steps: list[StepRecord] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)

    def losses(self) -> np.ndarray:
        return np.array([s.loss for s in self.steps])

    def observed_dropout_fraction(self) -> float:
        if not self.steps:
            return 0.0
        return float(np.mean([s.dropout_fraction for s in self.steps]))

    def to_dict(self) -> dict:
        return {
            "steps": [asdict(s) for s in self.steps],
            "epochs": [asdict(e) for e in self.epochs],
        }


class Adam:
    """Adam with decoupled weight decay over a model's named parameters."""

    def __init__(
        self,
        model: ViMLModel,
        lr: float,
        weight_decay: float = 0.0,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.model = model
        self.lr = lr
        self.weight_decay = weight_decay
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p) for name, p in model.named_parameters()}
        self.v = {name: np.zeros_like(p) for name, p in model.named_parameters()}

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        grads = dict(self.model.named_grads())
        for name, p in self.model.named_parameters():
            g = grads[name]
            if self.weight_decay > 0.0:
                p *= 1.0 - self.lr * self.weight_decay
            m = self.m[name]
            v = self.v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# ---------------------------------------------------------------------------
# Text resolution
# ---------------------------------------------------------------------------


def _per_track_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence((seed, index)).generate_state(1)[0])


def resolve_texts(
    records: Sequence[TrackTextRecord],
    text_source: str,
    seed: int = 0,
    few_shot_k: int = 3,
) -> dict[str, str]:
    """Produce the per-track training text for the configured source.

    ``human`` uses the text stored on each record; the synthesis sources
    regenerate text from each record's tag set. ``none`` maps every track to
    the empty string (the null-text path).
    """
    if text_source == "none":
        return {rec.track_id: "" for rec in records}
    out: dict[str, str] = {}
    examples: list[AnalogyExample] = []
    if text_source == "prompt2text":
        # Few-shot pool: held descriptions from the head of the corpus,
        # falling back to tag lists when no human text is present.
        for i, rec in enumerate(records[: max(few_shot_k, 16)]):
            if len(rec.tags) == 0:
                continue
            desc = rec.text or tags_to_text(rec.tags, _per_track_seed(seed, i))
            examples.append(AnalogyExample(tags=rec.tags, description=desc))
        llm = MockLlmClient()
    for i, rec in enumerate(records):
        if text_source == "human":
            if rec.text is None:
                raise ValueError(f"record {rec.track_id} has no human text")
            out[rec.track_id] = rec.text
        elif text_source == "prompt2text":
            out[rec.track_id] = synthesize_description(
                "prompt2text",
                rec.tags,
                rng_seed=_per_track_seed(seed, i),
                examples=examples,
                k=min(few_shot_k, len(examples)),
                llm=llm,
            )
        else:
            out[rec.track_id] = synthesize_description(
                text_source, rec.tags, rng_seed=_per_track_seed(seed, i)
            )
    return out


# ---------------------------------------------------------------------------
# Array preparation
# ---------------------------------------------------------------------------


def _stack_modality(
    store: FeatureStore, track_ids: list[str], modality: str
) -> np.ndarray:
    seqs = [store.load(tid, modality) for tid in track_ids]
    lengths = {s.n for s in seqs}
    if len(lengths) != 1:
        raise ValueError(
            f"training requires a uniform {modality} sequence length; "
            f"found lengths {sorted(lengths)}"
        )
    return np.stack([np.asarray(s.features, dtype=np.float64) for s in seqs])


def build_training_arrays(
    store: FeatureStore,
    config: TrainConfig,
    records: Sequence[TrackTextRecord] | None,
    text_encoder: HashingTextEncoder | None = None,
) -> tuple[list[str], np.ndarray | None, np.ndarray, np.ndarray]:
    """Assemble (track_ids, video, music, text) training arrays.

    Text features come from encoding the resolved text strings; when
    ``records`` is None they are read from the store's precomputed text
    modality instead (all-null if the store has none).
    """
    cfg = config.model
    track_ids = sorted(store.track_ids("music"))
    if not track_ids:
        raise ValueError("store has no music features")
    music = _stack_modality(store, track_ids, modality="music")
    video = None
    if cfg.use_video:
        missing = [t for t in track_ids if not store.has(t, "video")]
        if missing:
            raise ValueError(f"missing video features for {len(missing)} tracks")
        video = _stack_modality(store, track_ids, modality="video")
    if records is not None:
        texts = resolve_texts(list(records), config.text_source, seed=config.seed)
        encoder = text_encoder or HashingTextEncoder(dim=cfg.text_base_dim)
        rows = []
        for tid in track_ids:
            text = texts.get(tid, "")
            rows.append(
                encoder.encode(text).astype(np.float64)
                if text
                else np.zeros((1, cfg.text_base_dim))
            )
        text_arr = np.stack(rows)
    elif "text" in store.modalities() and config.text_source != "none":
        text_arr = _stack_modality(store, track_ids, modality="text")
    else:
        text_arr = np.zeros((len(track_ids), 1, cfg.text_base_dim))
    return track_ids, video, music, text_arr


# ---------------------------------------------------------------------------
# The loop
# ---------------------------------------------------------------------------


def train(
    config: TrainConfig,
    store: FeatureStore,
    records: Sequence[TrackTextRecord] | None,
    out_dir: str | Path | None = None,
    text_encoder: HashingTextEncoder | None = None,
    epoch_hook: Callable[[ViMLModel, int], dict] | None = None,
) -> tuple[ViMLModel, TrainLog]:
    """Run seeded mini-batch training and return (model, log).

    ``epoch_hook`` runs after each epoch (e.g. a small retrieval eval); its
    return value is stored on the epoch record. Raises TrainingDivergedError
    naming the step if the loss goes non-finite.
    """
    cfg = config.model
    encoder = text_encoder or HashingTextEncoder(dim=cfg.text_base_dim)
    null_text = None
    if cfg.null_text_source == "empty_string_embedding":
        null_text = NullTextFeature(
            encoder.encode("")[0].astype(np.float64), source="empty_string_embedding"
        )
    model = ViMLModel(cfg, seed=config.seed, null_text=null_text)
    track_ids, video, music, text = build_training_arrays(
        store, config, records, text_encoder=encoder
    )
    n_tracks = len(track_ids)
    opt = Adam(model, lr=config.learning_rate, weight_decay=config.weight_decay)
    rng = np.random.default_rng((config.seed, 1))
    log = TrainLog()
    step = 0
    for epoch in range(config.epochs):
        perm = rng.permutation(n_tracks)
        epoch_losses = []
        for lo in range(0, n_tracks, config.batch_size):
            idx = perm[lo : lo + config.batch_size]
            if idx.size < 2:
                continue
            vb = video[idx] if video is not None else None
            fp = model.forward(vb, music[idx], text[idx], mode="train", rng=rng)
            loss, d_q, d_k = symmetric_loss_and_grad(fp.y_vt, fp.y_m, cfg.tau)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"divergence at step {step}")
            model.zero_grad()
            model.backward(fp, d_q, d_k)
            opt.step()
            log.steps.append(
                StepRecord(
                    step=step,
                    loss=float(loss),
                    dropout_fraction=float(fp.drop_mask.mean()),
                )
            )
            epoch_losses.append(loss)
            step += 1
        if epoch_losses:
            log.epochs.append(
                EpochRecord(
                    epoch=epoch,
                    mean_loss=float(np.mean(epoch_losses)),
                    snapshot=epoch_hook(model, epoch) if epoch_hook else None,
                )
            )
        if (
            out_dir is not None
            and config.checkpoint_every > 0
            and (epoch + 1) % config.checkpoint_every == 0
        ):
            model.save(Path(out_dir) / f"epoch{epoch + 1:04d}")
    if out_dir is not None:
        model.save(out_dir)
    return model, log


# ---------------------------------------------------------------------------
# Experiment presets
# ---------------------------------------------------------------------------


def _desk_config(**overrides) -> TrainConfig:
    model_overrides = overrides.pop("model", {})
    model = ModelConfig(**model_overrides)
    base = dict(
        model=model,
        batch_size=64,
        epochs=8,
        learning_rate=1e-3,
        seed=0,
    )
    base.update(overrides)
    return TrainConfig(**base)


def preset(name: str) -> list[TrainConfig]:
    """Config grids mirroring the reported experiment tables at desk scale."""
    if name == "table1_viml":
        return [_desk_config(text_source="tags")]
    if name == "table2_grid":
        return [
            _desk_config(text_source=source)
            for source in ("tags", "data2text", "prompt2text")
        ]
    if name == "dropout_ablation":
        return [
            _desk_config(
                text_source="prompt2text", model={"text_dropout_p": 0.0}
            ),
            _desk_config(
                text_source="prompt2text", model={"text_dropout_p": 0.8}
            ),
        ]
    if name == "fusion_study":
        return [
            _desk_config(text_source="prompt2text", model={"fusion_variant": v})
            for v in ("addition", "linear", "mlp", "transformer1", "transformer2")
        ]
    if name == "musictext":
        return [_desk_config(text_source="tags", model={"use_video": False})]
    raise ValueError(f"unknown preset {name!r}; options: {PRESET_NAMES}")
