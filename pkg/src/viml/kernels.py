"""Hot numeric kernels, JIT-compiled with numba when available.

The pure-numpy fallback path is selected automatically when numba is not
installed, or explicitly by setting the environment variable ``VIML_NUMBA=0``
before import. Both paths are kept importable (``*_numpy`` and, when compiled,
``*_numba``) so tests and ``benchmarks/bench_kernels.py`` can compare them.

All kernels expect C-contiguous float64 inputs; callers are responsible for
dtype conversion.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_ENABLED",
    "window_mean",
    "pool_ranks",
    "rank_of_scores",
    "window_mean_numpy",
    "pool_ranks_numpy",
    "rank_of_scores_numpy",
]


def _numba_requested() -> bool:
    flag = os.environ.get("VIML_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


# ---------------------------------------------------------------------------
# Pure-numpy reference implementations
# ---------------------------------------------------------------------------


def window_mean_numpy(frames: np.ndarray, window: int) -> np.ndarray:
    """Mean of consecutive row blocks of size ``window``.

    A trailing partial block is averaged over its actual row count, so the
    output has ``ceil(m / window)`` rows for ``m`` input rows.
    """
    m, d = frames.shape
    n = -(-m // window)
    out = np.empty((n, d), dtype=np.float64)
    for i in range(n):
        out[i] = frames[i * window : (i + 1) * window].mean(axis=0)
    return out


def rank_of_scores_numpy(scores: np.ndarray, positive_position: int) -> int:
    """1-based rank of ``scores[positive_position]`` under descending sort.

    Ties are broken by position: an equal score only outranks the positive
    if it sits at a smaller index.
    """
    s_pos = scores[positive_position]
    higher = int(np.sum(scores > s_pos))
    tied_before = int(np.sum(scores[:positive_position] == s_pos))
    return 1 + higher + tied_before


def pool_ranks_numpy(
    queries: np.ndarray, items: np.ndarray, pools: np.ndarray
) -> np.ndarray:
    """Rank of the positive item within each query's candidate pool.

    ``pools`` holds item indices, one row per query, with the positive at
    column 0. Scores are plain dot products, so pass unit-normalized rows
    to rank by cosine similarity.
    """
    num_queries = queries.shape[0]
    ranks = np.empty(num_queries, dtype=np.int64)
    for q in range(num_queries):
        scores = items[pools[q]] @ queries[q]
        ranks[q] = 1 + int(np.sum(scores[1:] > scores[0]))
    return ranks


# ---------------------------------------------------------------------------
# Numba path
# ---------------------------------------------------------------------------

NUMBA_ENABLED = False

if _numba_requested():
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - exercised via VIML_NUMBA=0 instead
        NUMBA_ENABLED = False

if NUMBA_ENABLED:

    @njit(cache=True)
    def window_mean_numba(frames: np.ndarray, window: int) -> np.ndarray:
        m, d = frames.shape
        n = (m + window - 1) // window
        out = np.zeros((n, d), dtype=np.float64)
        for i in range(n):
            lo = i * window
            hi = min(lo + window, m)
            for r in range(lo, hi):
                for c in range(d):
                    out[i, c] += frames[r, c]
            count = hi - lo
            for c in range(d):
                out[i, c] /= count
        return out

    @njit(cache=True)
    def rank_of_scores_numba(scores: np.ndarray, positive_position: int) -> int:
        s_pos = scores[positive_position]
        rank = 1
        for j in range(scores.shape[0]):
            if scores[j] > s_pos:
                rank += 1
            elif scores[j] == s_pos and j < positive_position:
                rank += 1
        return rank

    @njit(cache=True)
    def pool_ranks_numba(
        queries: np.ndarray, items: np.ndarray, pools: np.ndarray
    ) -> np.ndarray:
        num_queries, pool_size = pools.shape
        d = queries.shape[1]
        ranks = np.empty(num_queries, dtype=np.int64)
        for q in range(num_queries):
            s_pos = 0.0
            for c in range(d):
                s_pos += queries[q, c] * items[pools[q, 0], c]
            rank = 1
            for j in range(1, pool_size):
                s = 0.0
                row = pools[q, j]
                for c in range(d):
                    s += queries[q, c] * items[row, c]
                if s > s_pos:
                    rank += 1
            ranks[q] = rank
        return ranks

    window_mean = window_mean_numba
    rank_of_scores = rank_of_scores_numba
    pool_ranks = pool_ranks_numba
else:
    window_mean = window_mean_numpy
    rank_of_scores = rank_of_scores_numpy
    pool_ranks = pool_ranks_numpy
