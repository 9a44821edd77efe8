"""Latent-factor synthetic dataset generator.

Stands in for a real music-video corpus at desk scale: every track owns a
latent vector z, and each modality observes a noisy linear view of it
(``A_modality @ z + noise``). The three mixing maps share a common component
so that matched (video, music) pairs are measurably more similar than
mismatched ones even in raw feature space. Tag confidences are sigmoid
readouts of individual z coordinates against the default tag vocabulary, and
each track's text is the shuffled comma-joined tag list.

Everything is a pure function of the spec, so two runs with the same seed
produce bit-identical stores.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import BaseFeatureSequence, FeatureStore, write_store
from .tagtext import TagPrediction, TagSet, TrackTextRecord, filter_tags, tags_to_text
from .vocab import DEFAULT_VOCABULARY

# Tag readout calibration: confidence = sigmoid(GAIN * sign * z_c + offset)
# with per-tag offsets ~ N(OFFSET_MU, OFFSET_SD). At the default 0.3 filter
# threshold this lands around 8-15 surviving tags per track.
_GAIN = 2.0
_OFFSET_MU = -3.0
_OFFSET_SD = 0.7


@dataclass
class SyntheticSpec:
    num_tracks: int
    latent_dim: int = 16
    noise_sigma: float = 0.1
    segments_per_track: int = 3
    seed: int = 0
    video_dim: int = 512
    music_dim: int = 256
    text_dim: int = 512
    tag_threshold: float = 0.3

    def __post_init__(self) -> None:
        if self.num_tracks < 2:
            raise ValueError("num_tracks must be at least 2")
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be at least 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.segments_per_track < 1:
            raise ValueError("segments_per_track must be at least 1")
        for name in ("video_dim", "music_dim", "text_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


def _flat_vocabulary() -> list[tuple[str, str]]:
    flat = []
    for category in ("genre", "mood", "instrument"):
        for tag in DEFAULT_VOCABULARY[category]:
            flat.append((category, tag))
    return flat


def mixing_maps(spec: SyntheticSpec) -> dict[str, np.ndarray]:
    """Fixed seeded per-modality mixing maps with a shared component."""
    root = np.random.SeedSequence(spec.seed)
    ss_shared, ss_video, ss_music, ss_text = root.spawn(4)
    max_dim = max(spec.video_dim, spec.music_dim, spec.text_dim)
    scale = 1.0 / np.sqrt(spec.latent_dim)
    shared = np.random.default_rng(ss_shared).normal(
        0.0, scale, size=(max_dim, spec.latent_dim)
    )
    maps = {}
    for modality, dim, ss in (
        ("video", spec.video_dim, ss_video),
        ("music", spec.music_dim, ss_music),
        ("text", spec.text_dim, ss_text),
    ):
        own = np.random.default_rng(ss).normal(0.0, scale, size=(dim, spec.latent_dim))
        maps[modality] = (shared[:dim] + own) / np.sqrt(2.0)
    return maps


def latent_vectors(spec: SyntheticSpec) -> np.ndarray:
    """The (num_tracks, latent_dim) latent matrix implied by the spec."""
    ss = np.random.SeedSequence(spec.seed).spawn(5)[4]
    return np.random.default_rng(ss).normal(
        0.0, 1.0, size=(spec.num_tracks, spec.latent_dim)
    )


def tag_set_for_latent(
    z: np.ndarray, track_id: str, spec: SyntheticSpec
) -> TagSet:
    """Threshold sigmoid readouts of z coordinates into a filtered TagSet.

    If nothing clears the confidence threshold, the single most confident
    prediction is kept so every track has a describable tag set.
    """
    flat = _flat_vocabulary()
    offsets_rng = np.random.default_rng((spec.seed, 7))
    offsets = offsets_rng.normal(_OFFSET_MU, _OFFSET_SD, size=len(flat))
    predictions = []
    for idx, (category, tag) in enumerate(flat):
        coord = idx % spec.latent_dim
        sign = 1.0 if (idx // spec.latent_dim) % 2 == 0 else -1.0
        logit = _GAIN * sign * z[coord] + offsets[idx]
        confidence = float(1.0 / (1.0 + np.exp(-logit)))
        predictions.append(
            TagPrediction(tag=tag, category=category, confidence=confidence)
        )
    kept = filter_tags(predictions, threshold=spec.tag_threshold, track_id=track_id)
    if len(kept) == 0:
        best = max(predictions, key=lambda p: p.confidence)
        kept = TagSet(track_id=track_id, predictions=[best])
    return kept


def generate_synthetic(
    spec: SyntheticSpec, root: str | Path
) -> tuple[FeatureStore, list[TagSet], list[str]]:
    """Generate a feature store plus per-track tag sets and text strings."""
    maps = mixing_maps(spec)
    z_all = latent_vectors(spec)
    noise_rng = np.random.default_rng((spec.seed, 11))
    text_seed_rng = np.random.default_rng((spec.seed, 13))
    sequences = []
    tag_sets = []
    texts = []
    n_seg = spec.segments_per_track
    for i in range(spec.num_tracks):
        track_id = f"track{i:05d}"
        z = z_all[i]
        clean = {m: maps[m] @ z for m in ("video", "music", "text")}
        video = clean["video"][None, :] + spec.noise_sigma * noise_rng.normal(
            size=(n_seg, spec.video_dim)
        )
        music = clean["music"][None, :] + spec.noise_sigma * noise_rng.normal(
            size=(n_seg, spec.music_dim)
        )
        text_feat = clean["text"][None, :] + spec.noise_sigma * noise_rng.normal(
            size=(1, spec.text_dim)
        )
        sequences.append(
            BaseFeatureSequence(track_id=track_id, modality="video", features=video)
        )
        sequences.append(
            BaseFeatureSequence(track_id=track_id, modality="music", features=music)
        )
        sequences.append(
            BaseFeatureSequence(track_id=track_id, modality="text", features=text_feat)
        )
        tag_set = tag_set_for_latent(z, track_id, spec)
        tag_sets.append(tag_set)
        texts.append(tags_to_text(tag_set, int(text_seed_rng.integers(2**62))))
    store = write_store(sequences, root)
    return store, tag_sets, texts


def synthetic_records(
    tag_sets: list[TagSet], texts: list[str]
) -> list[TrackTextRecord]:
    return [
        TrackTextRecord(track_id=ts.track_id, tags=ts, text=text)
        for ts, text in zip(tag_sets, texts)
    ]
