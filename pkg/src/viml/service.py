"""HTTP retrieval service over a pre-embedded music index.

The index is built once at startup (one L2-normalized embedding per music
track) and is immutable afterwards, so request handling is a pure function
of (index, request) and safe under concurrency.

Endpoints: GET /health, GET /tracks, GET /videos, POST /query.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .evaluation import descending_order
from .features import FeatureStore, HashingTextEncoder, read_store
from .model import ViMLModel
from .model.losses import NORM_EPS, unit_rows


@dataclass
class MusicIndex:
    """Unit-norm music embeddings keyed by track id."""

    track_ids: list[str]
    embeddings: np.ndarray
    fingerprint: str

    def __post_init__(self) -> None:
        if len(self.track_ids) != len(set(self.track_ids)):
            raise ValueError("track ids must be unique")
        if self.embeddings.shape[0] != len(self.track_ids):
            raise ValueError("one embedding row per track id required")
        norms = np.linalg.norm(self.embeddings, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise ValueError("index rows must be unit-normalized")

    def __len__(self) -> int:
        return len(self.track_ids)


def build_index(model: ViMLModel, store: FeatureStore) -> MusicIndex:
    """Embed every music track in the store and normalize the rows."""
    track_ids = sorted(store.track_ids("music"))
    if not track_ids:
        raise ValueError("store has no music tracks")
    if store.dim("music") != model.config.music_base_dim:
        raise ValueError(
            f"store music dim {store.dim('music')} does not match model "
            f"config ({model.config.music_base_dim})"
        )
    embs = model.embed_sequences("music", [store.load(t, "music") for t in track_ids])
    units, _ = unit_rows(embs)
    return MusicIndex(
        track_ids=track_ids, embeddings=units, fingerprint=model.fingerprint()
    )


def query_index(
    index: MusicIndex, query_embedding: np.ndarray, top_k: int
) -> list[tuple[str, float]]:
    """Top-k (track_id, cosine score) pairs, descending, ties in id order."""
    if not 1 <= top_k <= len(index):
        raise ValueError(f"top_k must be in [1, {len(index)}]")
    q = np.asarray(query_embedding, dtype=np.float64)
    q = q / max(float(np.linalg.norm(q)), NORM_EPS)
    scores = index.embeddings @ q
    order = descending_order(scores)[:top_k]
    return [(index.track_ids[i], float(scores[i])) for i in order]


class QueryRequest(BaseModel):
    video_id: str
    text: str = ""
    top_k: int = Field(default=10, ge=1)


def create_app(
    model: ViMLModel,
    store: FeatureStore,
    text_encoder: HashingTextEncoder | None = None,
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    index = build_index(model, store)
    video_ids = sorted(store.track_ids("video"))
    video_id_set = set(video_ids)
    encoder = text_encoder or HashingTextEncoder(dim=model.config.text_base_dim)
    app = FastAPI(title="viml retrieval service")

    @app.get("/health")
    def health() -> dict:
        return {
            "status": "ok",
            "tracks": len(index),
            "videos": len(video_ids),
            "fingerprint": index.fingerprint,
        }

    @app.get("/tracks")
    def tracks() -> dict:
        return {"track_ids": index.track_ids}

    @app.get("/videos")
    def videos() -> dict:
        return {"video_ids": video_ids}

    @app.post("/query")
    def query(req: QueryRequest) -> dict:
        if req.video_id not in video_id_set:
            raise HTTPException(status_code=404, detail=f"unknown video_id {req.video_id!r}")
        if req.top_k > len(index):
            raise HTTPException(
                status_code=400,
                detail=f"top_k {req.top_k} exceeds index size {len(index)}",
            )
        video_seq = store.load(req.video_id, "video")
        text_features = None
        if req.text.strip():
            text_features = encoder.encode(req.text)
        query_emb = model.embed_query(
            np.asarray(video_seq.features, dtype=np.float64), text_features
        )
        results = query_index(index, query_emb, req.top_k)
        return {
            "results": [
                {"track_id": tid, "score": score} for tid, score in results
            ]
        }

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True))
    return app


def create_app_from_paths(
    ckpt_dir: str | Path,
    store_root: str | Path,
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    model = ViMLModel.load(ckpt_dir)
    store = read_store(store_root)
    return create_app(model, store, frontend_dir=frontend_dir)
