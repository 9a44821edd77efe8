"""Build a small store + checkpoint for the end-to-end frontend test."""

import sys
from pathlib import Path

from viml.model import ModelConfig
from viml.synthetic import SyntheticSpec, generate_synthetic, synthetic_records
from viml.training import TrainConfig, train


def main(out_dir: str) -> None:
    out = Path(out_dir)
    spec = SyntheticSpec(num_tracks=40, latent_dim=8, noise_sigma=0.05, seed=13)
    store, tag_sets, texts = generate_synthetic(spec, out / "store")
    records = synthetic_records(tag_sets, texts)
    config = TrainConfig(
        model=ModelConfig(
            embed_dim=32,
            heads=2,
            ff_dim=64,
            video_layers=1,
            music_layers=1,
            text_layers=1,
            fusion_variant="linear",
            max_positions=8,
        ),
        batch_size=16,
        epochs=2,
        learning_rate=1e-3,
        seed=0,
        text_source="tags",
    )
    train(config, store, records, out_dir=out / "ckpt")
    print("fixture ready")


if __name__ == "__main__":
    main(sys.argv[1])
