"""Shared fixtures: a small synthetic dataset and a quickly trained model."""

from __future__ import annotations

import numpy as np
import pytest

from viml.features import FeatureStore
from viml.model import ModelConfig
from viml.synthetic import SyntheticSpec, generate_synthetic, synthetic_records
from viml.training import TrainConfig, train


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """120-track synthetic corpus: (store, tag_sets, texts, records)."""
    root = tmp_path_factory.mktemp("store120")
    spec = SyntheticSpec(
        num_tracks=120, latent_dim=8, noise_sigma=0.05, segments_per_track=3, seed=11
    )
    store, tag_sets, texts = generate_synthetic(spec, root)
    return store, tag_sets, texts, synthetic_records(tag_sets, texts)


def tiny_model_config(**overrides) -> ModelConfig:
    base = dict(
        embed_dim=32,
        heads=2,
        ff_dim=64,
        video_layers=1,
        music_layers=1,
        text_layers=1,
        fusion_variant="linear",
        max_positions=8,
    )
    base.update(overrides)
    return ModelConfig(**base)


@pytest.fixture(scope="session")
def small_trained(small_dataset):
    """A small model trained for a few epochs on the 120-track corpus."""
    store, _, _, records = small_dataset
    config = TrainConfig(
        model=tiny_model_config(),
        batch_size=32,
        epochs=3,
        learning_rate=1e-3,
        seed=5,
        text_source="tags",
    )
    model, log = train(config, store, records)
    return model, log, store, records


def gradcheck_config(fusion_variant: str) -> ModelConfig:
    """The tiny configuration used for finite-difference verification."""
    return ModelConfig(
        embed_dim=8,
        heads=1,
        video_layers=1,
        music_layers=1,
        text_layers=1,
        ff_dim=16,
        video_base_dim=6,
        music_base_dim=5,
        text_base_dim=7,
        max_positions=2,
        tau=0.2,
        fusion_variant=fusion_variant,
    )


def gradcheck_batch(seed: int = 7):
    rng = np.random.default_rng(seed)
    video = rng.normal(size=(3, 2, 6))
    music = rng.normal(size=(3, 2, 5))
    text = rng.normal(size=(3, 1, 7))
    return video, music, text


def assert_store_equal(a: FeatureStore, b: FeatureStore) -> None:
    assert {(e.track_id, e.modality) for e in a.entries} == {
        (e.track_id, e.modality) for e in b.entries
    }
    for entry in a.entries:
        fa = a.load(entry.track_id, entry.modality).features
        fb = b.load(entry.track_id, entry.modality).features
        assert fa.tobytes() == fb.tobytes()
