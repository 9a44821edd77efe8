"""Video-text fusion module variants.

All variants map a pair of embeddings (video, text) to one fused embedding
of the same width: parameter-free addition, a linear layer or a two-layer
MLP over the concatenated pair, or a 1/2-layer Transformer over the
two-token sequence [y_video; y_text].
"""

from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .layers import Linear, Module, TransformerEncoder, gelu, gelu_grad


class AdditionFusion(Module):
    def forward(self, yv: np.ndarray, yt: np.ndarray):
        return yv + yt, None

    def backward(self, dy: np.ndarray, cache):
        return dy, dy


class LinearFusion(Module):
    def __init__(self, name: str, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__(name)
        d = cfg.embed_dim
        self.lin = self.add_child(
            Linear(f"{name}.lin", 2 * d, d, rng, cfg.init_scale, cfg.embed_bias_init)
        )

    def forward(self, yv: np.ndarray, yt: np.ndarray):
        concat = np.concatenate([yv, yt], axis=-1)
        out, c = self.lin.forward(concat)
        return out, c

    def backward(self, dy: np.ndarray, cache):
        dconcat = self.lin.backward(dy, cache)
        d = dconcat.shape[-1] // 2
        return dconcat[..., :d], dconcat[..., d:]


class MlpFusion(Module):
    """Two-layer MLP over the concatenated pair, hidden width 2*embed_dim."""

    def __init__(self, name: str, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__(name)
        d = cfg.embed_dim
        hidden = 2 * d
        self.lin1 = self.add_child(
            Linear(f"{name}.lin1", 2 * d, hidden, rng, cfg.init_scale)
        )
        self.lin2 = self.add_child(
            Linear(f"{name}.lin2", hidden, d, rng, cfg.init_scale, cfg.embed_bias_init)
        )

    def forward(self, yv: np.ndarray, yt: np.ndarray):
        concat = np.concatenate([yv, yt], axis=-1)
        pre, c1 = self.lin1.forward(concat)
        out, c2 = self.lin2.forward(gelu(pre))
        return out, (c1, pre, c2)

    def backward(self, dy: np.ndarray, cache):
        c1, pre, c2 = cache
        dhidden = self.lin2.backward(dy, c2)
        dconcat = self.lin1.backward(dhidden * gelu_grad(pre), c1)
        d = dconcat.shape[-1] // 2
        return dconcat[..., :d], dconcat[..., d:]


class TransformerFusion(Module):
    def __init__(
        self, name: str, cfg: ModelConfig, layers: int, rng: np.random.Generator
    ):
        super().__init__(name)
        self.encoder = self.add_child(
            TransformerEncoder(
                f"{name}.encoder",
                dim=cfg.embed_dim,
                layers=layers,
                heads=cfg.heads,
                ff_dim=cfg.ff_dim,
                max_positions=2,
                pooling="mean",
                rng=rng,
                w_scale=cfg.init_scale,
                embed_bias_init=cfg.embed_bias_init,
            )
        )

    def forward(self, yv: np.ndarray, yt: np.ndarray):
        tokens = np.stack([yv, yt], axis=1)
        return self.encoder.forward(tokens)

    def backward(self, dy: np.ndarray, cache):
        dtokens = self.encoder.backward(dy, cache)
        return dtokens[:, 0], dtokens[:, 1]


def make_fusion(cfg: ModelConfig, rng: np.random.Generator) -> Module:
    variant = cfg.fusion_variant
    if variant == "addition":
        return AdditionFusion("fusion")
    if variant == "linear":
        return LinearFusion("fusion", cfg, rng)
    if variant == "mlp":
        return MlpFusion("fusion", cfg, rng)
    if variant == "transformer1":
        return TransformerFusion("fusion", cfg, layers=1, rng=rng)
    if variant == "transformer2":
        return TransformerFusion("fusion", cfg, layers=2, rng=rng)
    raise ValueError(f"unknown fusion variant {variant!r}")
