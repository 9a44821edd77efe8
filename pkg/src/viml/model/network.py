"""The tri-modal retrieval network.

Three modality branches (linear projection + Transformer encoder) produce
256-d embeddings; a fusion module combines the video and text embeddings
into the query embedding that is matched against music embeddings. During
training the text input is replaced by a fixed null feature with probability
``text_dropout_p``, independently per example.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..features import BaseFeatureSequence
from .config import ModelConfig
from .fusion import make_fusion
from .layers import Linear, Module, TransformerEncoder

MODES = ("train", "eval_with_text", "eval_no_text")

EMBEDDING_ROLES = ("video", "music", "text", "fused")


@dataclass
class Embedding:
    """A single output embedding tagged with the branch that produced it."""

    vector: np.ndarray
    role: str

    def __post_init__(self) -> None:
        if self.role not in EMBEDDING_ROLES:
            raise ValueError(f"unknown embedding role {self.role!r}")
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("embedding contains non-finite values")


@dataclass
class NullTextFeature:
    """The fixed substitute for a missing/dropped text input."""

    vector: np.ndarray
    source: str = "zeros"

    def __post_init__(self) -> None:
        self.vector = np.asarray(self.vector, dtype=np.float64).reshape(-1)


def text_dropout(
    x_t: np.ndarray,
    p: float,
    null: NullTextFeature,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Replace each example's text feature by the null feature with
    probability ``p``, decided independently per example.

    ``x_t`` has shape (batch, 1, text_base_dim). Returns the possibly
    modified copy and the boolean drop mask.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("dropout probability must be in [0, 1]")
    batch = x_t.shape[0]
    if p <= 0.0:
        return x_t, np.zeros(batch, dtype=bool)
    mask = rng.random(batch) < p
    out = np.array(x_t, dtype=np.float64)
    out[mask, 0, :] = null.vector
    return out, mask


class ModalityBranch(Module):
    """Linear projection into the shared width, then a Transformer encoder."""

    def __init__(
        self,
        name: str,
        base_dim: int,
        layers: int,
        cfg: ModelConfig,
        rng: np.random.Generator,
    ):
        super().__init__(name)
        self.base_dim = base_dim
        self.proj = self.add_child(
            Linear(f"{name}.proj", base_dim, cfg.embed_dim, rng, cfg.init_scale)
        )
        self.encoder = self.add_child(
            TransformerEncoder(
                f"{name}.encoder",
                dim=cfg.embed_dim,
                layers=layers,
                heads=cfg.heads,
                ff_dim=cfg.ff_dim,
                max_positions=cfg.max_positions,
                pooling=cfg.pooling,
                rng=rng,
                w_scale=cfg.init_scale,
                embed_bias_init=cfg.embed_bias_init,
            )
        )

    def forward(self, x: np.ndarray):
        if x.shape[-1] != self.base_dim:
            raise ValueError(
                f"{self.name}: expected base dim {self.base_dim}, got {x.shape[-1]}"
            )
        projected, c_proj = self.proj.forward(x)
        pooled, c_enc = self.encoder.forward(projected)
        return pooled, (c_proj, c_enc)

    def backward(self, dpooled: np.ndarray, cache) -> np.ndarray:
        c_proj, c_enc = cache
        dprojected = self.encoder.backward(dpooled, c_enc)
        return self.proj.backward(dprojected, c_proj)


@dataclass
class TriModalExample:
    """Aligned (video, music, text) base features for one clip/track.

    ``text`` may be a feature row of shape (1, text_base_dim), a raw string
    (encoded by the caller-supplied text encoder), or None for the null path.
    """

    track_id: str
    music: np.ndarray
    video: np.ndarray | None = None
    text: np.ndarray | str | None = None


@dataclass
class ForwardPass:
    """Outputs of one batched forward, with caches for a later backward."""

    y_vt: np.ndarray
    y_m: np.ndarray
    y_v: np.ndarray | None
    y_t: np.ndarray
    drop_mask: np.ndarray
    caches: dict


class ViMLModel:
    """Trainable tri-modal model over precomputed base features."""

    def __init__(
        self,
        config: ModelConfig,
        seed: int = 0,
        null_text: NullTextFeature | None = None,
    ):
        self.config = config
        rng = np.random.default_rng(seed)
        cfg = config
        self._modules: list[Module] = []
        self.video: ModalityBranch | None = None
        self.fusion: Module | None = None
        if cfg.use_video:
            self.video = ModalityBranch(
                "video", cfg.video_base_dim, cfg.video_layers, cfg, rng
            )
            self._modules.append(self.video)
        self.music = ModalityBranch(
            "music", cfg.music_base_dim, cfg.music_layers, cfg, rng
        )
        self._modules.append(self.music)
        self.text = ModalityBranch(
            "text", cfg.text_base_dim, cfg.text_layers, cfg, rng
        )
        self._modules.append(self.text)
        if cfg.use_video:
            self.fusion = make_fusion(cfg, rng)
            self._modules.append(self.fusion)
        if null_text is None:
            if cfg.null_text_source != "zeros":
                raise ValueError(
                    "null_text vector must be supplied when "
                    f"null_text_source={cfg.null_text_source!r}"
                )
            null_text = NullTextFeature(np.zeros(cfg.text_base_dim), source="zeros")
        if null_text.vector.shape != (cfg.text_base_dim,):
            raise ValueError("null text feature has the wrong dimension")
        self.null_text = null_text

    # -- parameter plumbing -------------------------------------------------

    def named_parameters(self):
        for module in self._modules:
            yield from module.named_parameters()

    def named_grads(self):
        for module in self._modules:
            yield from module.named_grads()

    def zero_grad(self) -> None:
        for module in self._modules:
            module.zero_grad()

    def parameter_count(self) -> int:
        return sum(p.size for _, p in self.named_parameters())

    # -- forward / backward -------------------------------------------------

    def forward(
        self,
        video: np.ndarray | None,
        music: np.ndarray,
        text: np.ndarray | None,
        mode: str = "eval_with_text",
        rng: np.random.Generator | None = None,
    ) -> ForwardPass:
        """Run a batch through all branches and the fusion module.

        ``video`` is (B, n_v, d_v) or None, ``music`` is (B, n_m, d_m),
        ``text`` is (B, 1, d_t) or None (None means the null feature for
        every example). ``mode`` is one of train / eval_with_text /
        eval_no_text; train applies text dropout and requires ``rng``.
        """
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        cfg = self.config
        music = np.asarray(music, dtype=np.float64)
        batch = music.shape[0]
        if text is None or mode == "eval_no_text":
            text = np.broadcast_to(
                self.null_text.vector, (batch, 1, cfg.text_base_dim)
            ).copy()
            drop_mask = np.ones(batch, dtype=bool)
        else:
            text = np.asarray(text, dtype=np.float64)
            drop_mask = np.zeros(batch, dtype=bool)
            if mode == "train" and cfg.text_dropout_p > 0.0:
                if rng is None:
                    raise ValueError("train mode requires an rng for text dropout")
                text, drop_mask = text_dropout(
                    text, cfg.text_dropout_p, self.null_text, rng
                )
        caches: dict = {}
        y_m, caches["music"] = self.music.forward(music)
        y_t, caches["text"] = self.text.forward(text)
        y_v = None
        if cfg.use_video:
            if video is None:
                raise ValueError("missing modality: video input required")
            video = np.asarray(video, dtype=np.float64)
            y_v, caches["video"] = self.video.forward(video)
            y_vt, caches["fusion"] = self.fusion.forward(y_v, y_t)
        else:
            y_vt = y_t
        return ForwardPass(
            y_vt=y_vt, y_m=y_m, y_v=y_v, y_t=y_t, drop_mask=drop_mask, caches=caches
        )

    def backward(self, fp: ForwardPass, d_y_vt: np.ndarray, d_y_m: np.ndarray) -> None:
        """Accumulate parameter gradients from output-embedding gradients."""
        self.music.backward(d_y_m, fp.caches["music"])
        if self.config.use_video:
            d_y_v, d_y_t = self.fusion.backward(d_y_vt, fp.caches["fusion"])
            self.video.backward(d_y_v, fp.caches["video"])
        else:
            d_y_t = d_y_vt
        self.text.backward(d_y_t, fp.caches["text"])

    def forward_examples(
        self,
        examples: Sequence[TriModalExample],
        mode: str = "eval_with_text",
        rng: np.random.Generator | None = None,
        text_encoder: Callable[[str], np.ndarray] | None = None,
    ) -> ForwardPass:
        """Stack aligned examples and run one batched forward.

        All examples must share per-modality sequence lengths (batching is
        dense); raw-string texts require ``text_encoder``.
        """
        if not examples:
            raise ValueError("empty batch")
        cfg = self.config
        music = np.stack([np.asarray(ex.music, dtype=np.float64) for ex in examples])
        video = None
        if cfg.use_video:
            if any(ex.video is None for ex in examples):
                raise ValueError("missing modality: video input required")
            video = np.stack(
                [np.asarray(ex.video, dtype=np.float64) for ex in examples]
            )
        rows = []
        for ex in examples:
            if ex.text is None:
                rows.append(self.null_text.vector[None, :])
            elif isinstance(ex.text, str):
                if not ex.text.strip():
                    rows.append(self.null_text.vector[None, :])
                else:
                    if text_encoder is None:
                        raise ValueError("string texts require a text_encoder")
                    rows.append(np.asarray(text_encoder(ex.text), dtype=np.float64))
            else:
                rows.append(np.asarray(ex.text, dtype=np.float64).reshape(1, -1))
        text = np.stack(rows)
        return self.forward(video, music, text, mode=mode, rng=rng)

    # -- spec-level single-sequence operations -------------------------------

    def _branch(self, modality: str) -> ModalityBranch:
        branch = {"video": self.video, "music": self.music, "text": self.text}[
            modality
        ]
        if branch is None:
            raise ValueError(f"model has no {modality} branch")
        return branch

    def project(self, features: np.ndarray, modality: str) -> np.ndarray:
        """Affine projection of one n x base_dim sequence to n x embed_dim."""
        branch = self._branch(modality)
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != branch.base_dim:
            raise ValueError(
                f"expected (n, {branch.base_dim}) features for {modality}"
            )
        out, _ = branch.proj.forward(x)
        return out

    def encode(self, projected: np.ndarray, modality: str) -> Embedding:
        """Encode one already-projected sequence into a single embedding."""
        branch = self._branch(modality)
        x = np.asarray(projected, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.config.embed_dim:
            raise ValueError(f"expected (n, {self.config.embed_dim}) projected rows")
        pooled, _ = branch.encoder.forward(x[None, :, :])
        return Embedding(vector=pooled[0], role=modality)

    def embed_sequence(self, seq: BaseFeatureSequence) -> Embedding:
        branch = self._branch(seq.modality)
        pooled, _ = branch.forward(
            np.asarray(seq.features, dtype=np.float64)[None, :, :]
        )
        return Embedding(vector=pooled[0], role=seq.modality)

    def embed_sequences(
        self,
        modality: str,
        seqs: Sequence[BaseFeatureSequence],
        chunk: int = 256,
    ) -> np.ndarray:
        """Embed many sequences, batching those of equal length together."""
        branch = self._branch(modality)
        out = np.empty((len(seqs), self.config.embed_dim))
        by_len: dict[int, list[int]] = {}
        for i, seq in enumerate(seqs):
            if seq.modality != modality:
                raise ValueError(f"expected {modality} sequence, got {seq.modality}")
            by_len.setdefault(seq.n, []).append(i)
        for indices in by_len.values():
            for lo in range(0, len(indices), chunk):
                batch_idx = indices[lo : lo + chunk]
                stacked = np.stack(
                    [np.asarray(seqs[i].features, dtype=np.float64) for i in batch_idx]
                )
                pooled, _ = branch.forward(stacked)
                out[batch_idx] = pooled
        return out

    def embed_query_batch(
        self,
        video: np.ndarray | None,
        text: np.ndarray | None,
    ) -> np.ndarray:
        """Fused query embeddings for a batch, skipping the music branch.

        ``text`` of None selects the null-text path for every example.
        """
        cfg = self.config
        if text is None:
            if video is None:
                raise ValueError("query needs at least one modality")
            batch = video.shape[0]
            text = np.broadcast_to(
                self.null_text.vector, (batch, 1, cfg.text_base_dim)
            ).copy()
        else:
            text = np.asarray(text, dtype=np.float64)
        y_t, _ = self.text.forward(text)
        if not cfg.use_video:
            return y_t
        if video is None:
            raise ValueError("missing modality: video input required")
        y_v, _ = self.video.forward(np.asarray(video, dtype=np.float64))
        y_vt, _ = self.fusion.forward(y_v, y_t)
        return y_vt

    def embed_query(
        self,
        video_features: np.ndarray | None,
        text_features: np.ndarray | None,
    ) -> np.ndarray:
        """Fused embedding for one (video, text) query.

        ``text_features`` of None selects the null-text path, so a video-only
        query is ``embed_query(video, None)``.
        """
        video = None
        if video_features is not None:
            video = np.asarray(video_features, dtype=np.float64)[None, :, :]
        text = None
        if text_features is not None:
            text = np.asarray(text_features, dtype=np.float64).reshape(1, 1, -1)
        return self.embed_query_batch(video, text)[0]

    # -- checkpointing --------------------------------------------------------

    def save(self, out_dir: str | Path) -> None:
        """Write config.json plus one flat little-endian float32 file per
        named parameter (and the fixed null-text feature)."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = {
            "config": self.config.to_dict(),
            "null_text_source": self.null_text.source,
        }
        (out / "config.json").write_text(json.dumps(payload, indent=2))
        for name, param in self.named_parameters():
            _write_tensor(out / f"{name}.bin", param)
        _write_tensor(out / "null_text.bin", self.null_text.vector)

    @classmethod
    def load(cls, ckpt_dir: str | Path) -> "ViMLModel":
        ckpt = Path(ckpt_dir)
        payload = json.loads((ckpt / "config.json").read_text())
        config = ModelConfig.from_dict(payload["config"])
        null_vec = _read_tensor(ckpt / "null_text.bin", (config.text_base_dim,))
        model = cls(
            config,
            seed=0,
            null_text=NullTextFeature(
                null_vec, source=payload.get("null_text_source", "zeros")
            ),
        )
        for name, param in model.named_parameters():
            param[...] = _read_tensor(ckpt / f"{name}.bin", param.shape)
        return model

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(json.dumps(self.config.to_dict(), sort_keys=True).encode())
        for name, param in self.named_parameters():
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(param, dtype="<f4").tobytes())
        return digest.hexdigest()[:16]


def _write_tensor(path: Path, array: np.ndarray) -> None:
    path.write_bytes(np.ascontiguousarray(array, dtype="<f4").tobytes())


def _read_tensor(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    if not path.exists():
        raise FileNotFoundError(f"checkpoint is missing tensor file {path.name}")
    data = path.read_bytes()
    expected = 4 * int(np.prod(shape))
    if len(data) != expected:
        raise ValueError(
            f"checkpoint tensor {path.name} holds {len(data)} bytes; "
            f"config implies {expected}"
        )
    return np.frombuffer(data, dtype="<f4").reshape(shape).astype(np.float64)


TextFeatureFn = Callable[[str], np.ndarray]
