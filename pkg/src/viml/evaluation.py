"""Pool-based retrieval protocol: Recall@K and Median Rank.

Each query gets its own candidate pool containing the single ground-truth
music track plus ``pool_size - 1`` distinct negatives sampled without
replacement, seeded by (protocol seed, query index). Candidates are ranked
by cosine similarity; ties break by pool position, and the positive sits at
pool position 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .features import FeatureStore, HashingTextEncoder
from .model import ViMLModel
from .model.losses import unit_rows
from .tagtext import TrackTextRecord

QUERY_MODES = ("video_only", "video_plus_text", "text_only")

_CHUNK = 1024


@dataclass
class PoolSpec:
    pool_size: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        if self.pool_size < 1:
            raise ValueError("pool_size must be positive")


@dataclass
class RetrievalReport:
    ranks: list[int]
    recall_at: dict[int, float]
    median_rank: float
    protocol: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "ranks": self.ranks,
            "recall_at": {str(k): v for k, v in self.recall_at.items()},
            "median_rank": self.median_rank,
            "protocol": self.protocol,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def from_dict(cls, raw: dict) -> "RetrievalReport":
        return cls(
            ranks=[int(r) for r in raw["ranks"]],
            recall_at={int(k): float(v) for k, v in raw["recall_at"].items()},
            median_rank=float(raw["median_rank"]),
            protocol=raw.get("protocol", {}),
        )


# ---------------------------------------------------------------------------
# Protocol primitives
# ---------------------------------------------------------------------------


def build_pool(query_index: int, corpus_size: int, spec: PoolSpec) -> np.ndarray:
    """Pool of item indices for one query: the positive first, then
    ``pool_size - 1`` distinct negatives sampled uniformly."""
    if corpus_size < spec.pool_size:
        raise ValueError(
            f"corpus too small: {corpus_size} items for pool size {spec.pool_size}"
        )
    if not 0 <= query_index < corpus_size:
        raise ValueError("query_index out of range")
    rng = np.random.default_rng((spec.seed, query_index))
    negatives = rng.permutation(corpus_size - 1)[: spec.pool_size - 1]
    negatives = negatives + (negatives >= query_index)
    pool = np.empty(spec.pool_size, dtype=np.int64)
    pool[0] = query_index
    pool[1:] = negatives
    return pool


def rank_of_positive(scores: Sequence[float], positive_position: int) -> int:
    """1-based rank of the positive under descending score, stable in pool
    order for ties."""
    arr = np.ascontiguousarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("scores must be finite")
    if not 0 <= positive_position < arr.shape[0]:
        raise ValueError("positive_position out of range")
    return int(kernels.rank_of_scores(arr, positive_position))


def recall_at_k(ranks: Sequence[int], k: int) -> float:
    """Percentage of queries whose positive ranked at or above k."""
    arr = np.asarray(ranks)
    if arr.size == 0:
        raise ValueError("empty ranks")
    return float(100.0 * np.mean(arr <= k))


def median_rank(ranks: Sequence[int]) -> float:
    """Middle order statistic; the lower middle for even counts, so the
    result is always an attained rank."""
    arr = np.sort(np.asarray(ranks))
    if arr.size == 0:
        raise ValueError("empty ranks")
    return float(arr[(arr.size - 1) // 2])


def ensemble_score(s1, s2, alpha: float):
    """Weighted-sum scoring for two-model ensembles: (1-alpha)*s1 + alpha*s2."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    return (1.0 - alpha) * np.asarray(s1) + alpha * np.asarray(s2)


def descending_order(scores: np.ndarray) -> np.ndarray:
    """Indices sorted by descending score, ties kept in index order."""
    return np.argsort(-np.asarray(scores), kind="stable")


# ---------------------------------------------------------------------------
# Ranking embeddings through the protocol
# ---------------------------------------------------------------------------


def ranks_for_embeddings(
    query_embs: np.ndarray,
    item_embs: np.ndarray,
    spec: PoolSpec,
    positives: np.ndarray | None = None,
) -> np.ndarray:
    """Protocol ranks for each query embedding against the item table.

    Query i's positive item defaults to item i. Scoring is cosine similarity.
    """
    queries, _ = unit_rows(np.asarray(query_embs, dtype=np.float64))
    items, _ = unit_rows(np.asarray(item_embs, dtype=np.float64))
    queries = np.ascontiguousarray(queries)
    items = np.ascontiguousarray(items)
    n_items = items.shape[0]
    n_queries = queries.shape[0]
    if positives is None:
        positives = np.arange(n_queries)
    ranks = np.empty(n_queries, dtype=np.int64)
    for lo in range(0, n_queries, _CHUNK):
        hi = min(lo + _CHUNK, n_queries)
        pools = np.stack(
            [build_pool(int(positives[i]), n_items, spec) for i in range(lo, hi)]
        )
        ranks[lo:hi] = kernels.pool_ranks(queries[lo:hi], items, pools)
    return ranks


def aggregate_report(
    ranks: np.ndarray,
    spec: PoolSpec,
    query_mode: str,
    k_values: Sequence[int] = (1, 5, 10),
) -> RetrievalReport:
    return RetrievalReport(
        ranks=[int(r) for r in ranks],
        recall_at={int(k): recall_at_k(ranks, k) for k in k_values},
        median_rank=median_rank(ranks),
        protocol={
            "pool_size": spec.pool_size,
            "seed": spec.seed,
            "query_mode": query_mode,
            "num_queries": int(len(ranks)),
        },
    )


# ---------------------------------------------------------------------------
# Model evaluation
# ---------------------------------------------------------------------------


def evaluate(
    model: ViMLModel,
    store: FeatureStore,
    records: Sequence[TrackTextRecord] | None,
    spec: PoolSpec,
    query_mode: str = "video_plus_text",
    text_encoder: HashingTextEncoder | None = None,
) -> RetrievalReport:
    """Embed the corpus once, rank every query in its own pool, aggregate.

    ``video_only`` substitutes the null text feature for every query;
    ``video_plus_text`` encodes each record's text (empty text falls back to
    the null feature); ``text_only`` queries with the text-branch embedding
    alone.
    """
    if query_mode not in QUERY_MODES:
        raise ValueError(f"unknown query mode {query_mode!r}")
    cfg = model.config
    track_ids = sorted(store.track_ids("music"))
    if spec.pool_size > len(track_ids):
        raise ValueError("corpus too small for the requested pool size")
    music_embs = model.embed_sequences("music", store.load_all("music"))

    needs_video = query_mode in ("video_only", "video_plus_text") and cfg.use_video
    video_seqs = None
    if needs_video:
        missing = [t for t in track_ids if not store.has(t, "video")]
        if missing:
            raise ValueError(
                f"missing modality for mode {query_mode!r}: "
                f"{len(missing)} tracks lack video features"
            )
        video_seqs = [store.load(t, "video") for t in track_ids]
    if query_mode in ("video_only", "video_plus_text") and not cfg.use_video:
        raise ValueError(f"missing modality for mode {query_mode!r}: model has no video branch")

    text_rows = _query_text_rows(model, track_ids, records, query_mode, text_encoder)

    if query_mode == "text_only":
        query_embs = _embed_text_only(model, text_rows)
    else:
        query_embs = _embed_fused(model, video_seqs, text_rows)
    ranks = ranks_for_embeddings(query_embs, music_embs, spec)
    return aggregate_report(ranks, spec, query_mode)


def _query_text_rows(
    model: ViMLModel,
    track_ids: list[str],
    records: Sequence[TrackTextRecord] | None,
    query_mode: str,
    text_encoder: HashingTextEncoder | None,
) -> np.ndarray:
    cfg = model.config
    null_row = model.null_text.vector
    if query_mode == "video_only":
        return np.tile(null_row, (len(track_ids), 1))[:, None, :]
    if records is None:
        raise ValueError(f"missing modality for mode {query_mode!r}: no texts given")
    by_id = {rec.track_id: rec for rec in records}
    encoder = text_encoder or HashingTextEncoder(dim=cfg.text_base_dim)
    rows = np.empty((len(track_ids), 1, cfg.text_base_dim))
    for i, tid in enumerate(track_ids):
        rec = by_id.get(tid)
        text = (rec.text or "") if rec is not None else ""
        if text.strip():
            rows[i, 0] = encoder.encode(text)[0]
        else:
            rows[i, 0] = null_row
    return rows


def _embed_fused(
    model: ViMLModel,
    video_seqs,
    text_rows: np.ndarray,
) -> np.ndarray:
    n = text_rows.shape[0]
    out = np.empty((n, model.config.embed_dim))
    if video_seqs is None:
        for lo in range(0, n, _CHUNK):
            hi = min(lo + _CHUNK, n)
            out[lo:hi] = model.embed_query_batch(None, text_rows[lo:hi])
        return out
    by_len: dict[int, list[int]] = {}
    for i, seq in enumerate(video_seqs):
        by_len.setdefault(seq.n, []).append(i)
    for indices in by_len.values():
        for lo in range(0, len(indices), _CHUNK):
            batch_idx = indices[lo : lo + _CHUNK]
            video = np.stack(
                [
                    np.asarray(video_seqs[i].features, dtype=np.float64)
                    for i in batch_idx
                ]
            )
            out[batch_idx] = model.embed_query_batch(video, text_rows[batch_idx])
    return out


def _embed_text_only(model: ViMLModel, text_rows: np.ndarray) -> np.ndarray:
    n = text_rows.shape[0]
    out = np.empty((n, model.config.embed_dim))
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        pooled, _ = model.text.forward(text_rows[lo:hi])
        out[lo:hi] = pooled
    return out


# ---------------------------------------------------------------------------
# Chance baseline
# ---------------------------------------------------------------------------


def chance_baseline(
    num_queries: int,
    pool_size: int,
    dim: int = 16,
    seed: int = 0,
) -> RetrievalReport:
    """Protocol metrics for random unit embeddings (the chance rows)."""
    rng = np.random.default_rng((seed, 17))
    queries = rng.standard_normal((num_queries, dim))
    items = rng.standard_normal((num_queries, dim))
    spec = PoolSpec(pool_size=pool_size, seed=seed)
    ranks = ranks_for_embeddings(queries, items, spec)
    return aggregate_report(ranks, spec, query_mode="chance")
